# =============================================================================
# IMPORTAÇÕES E CONFIGURAÇÕES
# =============================================================================

# Canvas Agg: as figuras são só gravadas em SVG, sem janela
import matplotlib
matplotlib.use("Agg")
import matplotlib.style as mplstyle
from matplotlib.backends.backend_agg import FigureCanvasAgg as FigureCanvas
from matplotlib.figure import Figure
import seaborn as sns
import numpy as np
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from nhkpm import SpectralMap
from observables import ProjectedCorrelator, TimeSeries

logger = logging.getLogger(__name__)

# =============================================================================
# CONFIGURAÇÃO DE ESTILO DOS GRÁFICOS
# =============================================================================
mplstyle.use('seaborn-v0_8')
sns.set_palette("husl")


# =============================================================================
# CLASSE PRINCIPAL PARA CRIAÇÃO DE GRÁFICOS
# =============================================================================
class NhkpmCharts:
    """
    Figuras SVG dos produtos de cada comando. O CSV é o contrato; estas
    figuras são conveniência e cada método devolve o que o relatório registra
    (por exemplo a faixa de cores usada).
    """

    def __init__(self, figsize=(8, 5), dpi=100):
        self.figure = Figure(figsize=figsize, dpi=dpi)
        self.canvas = FigureCanvas(self.figure)

    def _save(self, path: Path) -> Path:
        self.figure.tight_layout()
        self.figure.savefig(path, format="svg")
        logger.info(f"Figura gravada em {path}")
        return Path(path)

    @staticmethod
    def _extent(smap: SpectralMap):
        g = smap.grid
        return [g.re_min, g.re_max, g.im_min, g.im_max]

    # =========================================================================
    # MAPAS NO PLANO COMPLEXO
    # =========================================================================
    def heatmap_abs(self, smap: SpectralMap, path: Path, title: str = "|C(ω)|") -> Tuple[float, float]:
        """Mapa de |C(ω)| com escala linear; devolve (vmin, vmax)."""
        self.figure.clear()
        ax = self.figure.add_subplot(111)
        magnitude = np.where(smap.valid, np.abs(smap.values), 0.0)
        vmin, vmax = 0.0, float(magnitude.max(initial=0.0)) or 1.0
        image = ax.imshow(magnitude.T, origin="lower", extent=self._extent(smap), aspect="auto",
                          cmap="magma", vmin=vmin, vmax=vmax)
        self.figure.colorbar(image, ax=ax, label="|C(ω)|")
        ax.set_xlabel("Re ω")
        ax.set_ylabel("Im ω")
        ax.set_title(title)
        self._save(path)
        return vmin, vmax

    def real_imag_maps(self, smap: SpectralMap, path: Path) -> Path:
        """Partes real e imaginária lado a lado (escala simétrica)."""
        self.figure.clear()
        for k, (part, label) in enumerate(((smap.values.real, "Re C(ω)"), (smap.values.imag, "Im C(ω)"))):
            ax = self.figure.add_subplot(1, 2, k + 1)
            bound = float(np.abs(part[smap.valid]).max(initial=0.0)) or 1.0
            image = ax.imshow(part.T, origin="lower", extent=self._extent(smap), aspect="auto",
                              cmap="RdBu_r", vmin=-bound, vmax=bound)
            self.figure.colorbar(image, ax=ax)
            ax.set_title(label)
            ax.set_xlabel("Re ω")
            if k == 0:
                ax.set_ylabel("Im ω")
        return self._save(path)

    # =========================================================================
    # DINÂMICA
    # =========================================================================
    def time_series(self, series: TimeSeries, path: Path, overlays: Optional[Dict[str, TimeSeries]] = None,
                    short_time: float = 5.0) -> Path:
        """Painel de tempos curtos (Re C) e de tempos longos (log|C|)."""
        overlays = overlays or {}
        self.figure.clear()
        ax_short = self.figure.add_subplot(1, 2, 1)
        ax_long = self.figure.add_subplot(1, 2, 2)

        short = series.times <= short_time
        ax_short.plot(series.times[short], series.values.real[short], label=series.source, linewidth=2)
        ax_long.semilogy(series.times, np.abs(series.values), label=series.source, linewidth=2)
        for name, other in overlays.items():
            ax_short.plot(other.times[short], other.values.real[short], "--", label=name)
            ax_long.semilogy(other.times, np.abs(other.values), "--", label=name)

        ax_short.set_xlabel("t")
        ax_short.set_ylabel("C(t)")
        ax_long.set_xlabel("t")
        ax_long.set_ylabel("|C(t)|")
        ax_short.legend()
        return self._save(path)

    # =========================================================================
    # VARREDURAS E ESPECTROS
    # =========================================================================
    def projected(self, cp: ProjectedCorrelator, path: Path, delta: Optional[float] = None) -> Path:
        self.figure.clear()
        ax = self.figure.add_subplot(111)
        ax.plot(cp.gammas, cp.values, linewidth=2)
        if delta is not None and np.isfinite(delta):
            ax.axvline(-delta, color="gray", linestyle=":", label=f"Δ = {delta:.3f}")
            ax.legend()
        ax.set_xlabel("Γ")
        ax.set_ylabel("C_P(Γ)")
        return self._save(path)

    def gamma_scan(self, gammas: Sequence[float], scan: Sequence[ProjectedCorrelator], path: Path,
                   deltas: Optional[Sequence[float]] = None) -> Path:
        """Mapa de |C_P(Γ)| por γ com a curva -Δ(γ) sobreposta."""
        self.figure.clear()
        ax = self.figure.add_subplot(111)
        matrix = np.array([np.abs(cp.values) for cp in scan])
        gamma_axis = scan[0].gammas
        if len(gammas) > 1:
            extent = [gamma_axis[0], gamma_axis[-1], gammas[0], gammas[-1]]
            image = ax.imshow(matrix, origin="lower", extent=extent, aspect="auto", cmap="viridis")
            self.figure.colorbar(image, ax=ax, label="|C_P(Γ)|")
        else:
            ax.plot(gamma_axis, matrix[0])
        if deltas is not None:
            ax.plot(-np.asarray(deltas, dtype=float), gammas, "w.-", label="-Δ(γ)")
            ax.legend()
        ax.set_xlabel("Γ")
        ax.set_ylabel("γ")
        return self._save(path)

    def x_spectrum(self, eigenvalues: np.ndarray, overlap_weight: np.ndarray, path: Path) -> Path:
        """Autovalores da matriz de amortecimento; tamanho do ponto ∝ peso de sobreposição."""
        self.figure.clear()
        ax = self.figure.add_subplot(111)
        weight = np.asarray(overlap_weight, dtype=float)
        sizes = 2 + 60 * weight / (weight.max() or 1.0)
        ax.scatter(eigenvalues.real, eigenvalues.imag, s=sizes, alpha=0.7)
        ax.set_xlabel("Re λ")
        ax.set_ylabel("Im λ")
        return self._save(path)

    def delta_vs_gamma(self, gammas: Sequence[float], deltas: Sequence[float], path: Path) -> Path:
        self.figure.clear()
        ax = self.figure.add_subplot(111)
        ax.plot(gammas, deltas, "o-", linewidth=2)
        ax.set_xlabel("γ")
        ax.set_ylabel("Δ")
        return self._save(path)
