import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from nhkpm import FrequencyGrid, KpmParams, SpectralMap
from observables import ProjectedCorrelator, RelaxationRate, TimeSeries

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ["re_omega", "im_omega", "re_G", "im_G", "re_C", "im_C"]


@dataclass
class Check:
    name: str
    value: Optional[float]
    tolerance: Optional[float]
    passed: bool
    gating: bool = True
    detail: str = ""


@dataclass
class RunReport:
    """Resumo de uma execução; todo arquivo emitido entra no manifesto com SHA-256."""
    command: str
    backend: str = ""
    started: float = field(default_factory=time.perf_counter)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)
    error: Optional[str] = None

    def add_check(self, name: str, value, tolerance, passed: bool, gating: bool = True, detail: str = ""):
        value = None if value is None else float(value)
        self.checks.append(Check(name, value, tolerance, bool(passed), gating, detail))
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, f"Checagem {name}: {'ok' if passed else 'FALHOU'} (valor={value}, tolerância={tolerance})")

    @property
    def failed_checks(self) -> List[str]:
        return [c.name for c in self.checks if c.gating and not c.passed]


class DataProcessor:
    # =========================================================================
    # MAPA ESPECTRAL
    # =========================================================================
    @staticmethod
    def spectral_map_frame(smap: SpectralMap) -> pd.DataFrame:
        """Uma linha por nó; Im varia devagar e Re rápido."""
        omegas = smap.grid.omegas().T.reshape(-1)
        greens = smap.greens.T.reshape(-1)
        values = smap.values.T.reshape(-1)
        return pd.DataFrame({
            "re_omega": omegas.real, "im_omega": omegas.imag,
            "re_G": greens.real, "im_G": greens.imag,
            "re_C": values.real, "im_C": values.imag,
        }, columns=SPECTRUM_COLUMNS)

    @staticmethod
    def write_spectral_map(path: Path, smap: SpectralMap) -> Path:
        DataProcessor.spectral_map_frame(smap).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def read_spectral_map(path: Path, kpm: KpmParams, backend: str = "csv",
                          expected_weight: complex = 1.0) -> SpectralMap:
        """Reconstrói um SpectralMap de um CSV gerado pelo comando spectrum."""
        frame = pd.read_csv(path)
        missing = [c for c in SPECTRUM_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"{path}: colunas ausentes {missing}")
        re_axis = np.unique(frame["re_omega"].to_numpy())
        im_axis = np.unique(frame["im_omega"].to_numpy())
        n_re, n_im = re_axis.size, im_axis.size
        if n_re * n_im != len(frame):
            raise ValueError(f"{path}: {len(frame)} linhas não formam uma grade {n_re}x{n_im}")
        frame = frame.sort_values(["im_omega", "re_omega"])
        grid = FrequencyGrid(float(re_axis[0]), float(re_axis[-1]), float(im_axis[0]), float(im_axis[-1]), n_re, n_im)

        def field_of(prefix):
            data = frame[f"re_{prefix}"].to_numpy() + 1j * frame[f"im_{prefix}"].to_numpy()
            return data.reshape(n_im, n_re).T.copy()

        smap = SpectralMap(grid, field_of("C"), field_of("G"), grid.interior_mask(), kpm, backend, expected_weight)
        smap.symmetry_residual = smap.compute_symmetry_residual()
        return smap

    # =========================================================================
    # SÉRIES E CORRELADORES
    # =========================================================================
    @staticmethod
    def write_time_series(path: Path, series: TimeSeries, overlays: Optional[Dict[str, TimeSeries]] = None) -> Path:
        data = {"t": series.times, "re_C": series.values.real, "im_C": series.values.imag}
        for name, other in (overlays or {}).items():
            if other.values.shape != series.values.shape:
                raise ValueError(f"Série {name} com {other.values.size} amostras, esperado {series.values.size}")
            data[f"re_C_{name}"] = other.values.real
            data[f"im_C_{name}"] = other.values.imag
        pd.DataFrame(data).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def read_time_series(path: Path, source: str = "csv") -> TimeSeries:
        frame = pd.read_csv(path)
        return TimeSeries(frame["t"].to_numpy(), frame["re_C"].to_numpy() + 1j * frame["im_C"].to_numpy(), source)

    @staticmethod
    def write_projected(path: Path, cp: ProjectedCorrelator) -> Path:
        pd.DataFrame({"gamma_axis": cp.gammas, "value": cp.values}).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def write_cp_scan(path: Path, scan: Sequence[Tuple[float, ProjectedCorrelator]]) -> Path:
        """Formato longo: uma linha por (γ, Γ)."""
        frames = [pd.DataFrame({"gamma": gamma, "gamma_axis": cp.gammas, "value": cp.values})
                  for gamma, cp in scan]
        pd.concat(frames, ignore_index=True).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def write_delta_vs_gamma(path: Path, rates: Sequence[Tuple[float, RelaxationRate]]) -> Path:
        pd.DataFrame({
            "gamma": [g for g, _ in rates],
            "delta": [r.delta if r.found else np.nan for _, r in rates],
            "found": [r.found for _, r in rates],
        }).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def write_poles(path: Path, eigenvalues: np.ndarray, weights: np.ndarray) -> Path:
        pd.DataFrame({"re_omega": eigenvalues.real, "im_omega": eigenvalues.imag,
                      "re_weight": weights.real, "im_weight": weights.imag}).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def write_x_spectrum(path: Path, eigenvalues: np.ndarray, overlap_weight: np.ndarray) -> Path:
        pd.DataFrame({"re_lambda": eigenvalues.real, "im_lambda": eigenvalues.imag,
                      "overlap_weight": overlap_weight}).to_csv(path, index=False)
        return Path(path)

    @staticmethod
    def write_bonds(path: Path, rows: Sequence[Tuple[int, int, int]]) -> Path:
        pd.DataFrame(list(rows), columns=["step", "site", "bond"]).to_csv(path, index=False)
        return Path(path)

    # =========================================================================
    # RELATÓRIO
    # =========================================================================
    @staticmethod
    def sha256(path: Path) -> str:
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(1 << 16), b""):
                digest.update(block)
        return digest.hexdigest()

    @staticmethod
    def _jsonable(value):
        if isinstance(value, dict):
            return {str(k): DataProcessor._jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple, np.ndarray)):
            return [DataProcessor._jsonable(v) for v in value]
        if isinstance(value, (complex, np.complexfloating)):
            return {"re": float(value.real), "im": float(value.imag)}
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, float) and not np.isfinite(value):
            return None
        if isinstance(value, Path):
            return str(value)
        return value

    @staticmethod
    def write_report(path: Path, report: RunReport) -> Path:
        manifest = [{"file": Path(f).name, "sha256": DataProcessor.sha256(f)}
                    for f in report.files if Path(f).exists()]
        payload = {
            "command": report.command,
            "backend": report.backend,
            "wall_time_s": round(time.perf_counter() - report.started, 3),
            "diagnostics": DataProcessor._jsonable(report.diagnostics),
            "checks": [DataProcessor._jsonable(vars(c)) for c in report.checks],
            "failed_checks": report.failed_checks,
            "error": report.error,
            "files": manifest,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, ensure_ascii=False)
        logger.info(f"Relatório gravado em {path} ({len(manifest)} arquivos)")
        return Path(path)
