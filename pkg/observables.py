# =============================================================================
# OBSERVÁVEIS: C(t), CORRELADOR PROJETADO E TAXA DE RELAXAÇÃO
# =============================================================================
# Convenção de normalização: C(ω) é uma densidade em d²ω = dRe·dIm, de modo
# que a soma de C·ΔRe·ΔIm sobre uma região isolando um polo ω_n devolve o peso
# ⟨ψ_L|R_n⟩⟨L_n|ψ_R⟩. O correlador projetado C_P(Γ) = Σ_Im C(Γ + iIm)·ΔIm é
# portanto uma densidade em Γ e os mapas de varredura usam essa mesma unidade.

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from config import Settings
from nhkpm import FrequencyGrid, KpmParams, SpectralMap, spectral_map
from workers import WorkerPool

logger = logging.getLogger(__name__)


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    source: str = "nhkpm"
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.times.shape != self.values.shape:
            raise ValueError(f"times {self.times.shape} e values {self.values.shape} com formas diferentes")
        if np.any(self.times < 0) or np.any(np.diff(self.times) <= 0):
            raise ValueError("times devem ser não negativos e estritamente crescentes")

    def imag_residue(self) -> float:
        """max|Im C| / max|C|"""
        scale = float(np.max(np.abs(self.values), initial=0.0))
        return float(np.max(np.abs(self.values.imag), initial=0.0) / scale) if scale > 0 else 0.0


@dataclass
class ProjectedCorrelator:
    gammas: np.ndarray
    values: np.ndarray
    imag_residue: float = 0.0
    metadata: Dict = field(default_factory=dict)


@dataclass
class RelaxationRate:
    delta: float
    peak_positions: np.ndarray
    method: str
    found: bool = True
    peak_weights: np.ndarray = None
    tolerances: Dict = field(default_factory=dict)

    def summary(self) -> Dict:
        return {
            "delta": None if not self.found else float(self.delta),
            "found": self.found,
            "method": self.method,
            "peaks": [{"re": float(np.real(w)), "im": float(np.imag(w))} for w in self.peak_positions],
            "tolerances": self.tolerances,
        }


def time_axis(t_max: float, n_samples: int) -> np.ndarray:
    """Amostras uniformes em [0, t_max]; t_max = 0 dá uma única amostra."""
    if t_max < 0:
        raise ValueError(f"t_max deve ser ≥ 0, recebido {t_max}")
    if t_max == 0 or n_samples <= 1:
        return np.array([0.0])
    return np.linspace(0.0, t_max, n_samples)


# =============================================================================
# C(t) A PARTIR DO MAPA
# =============================================================================
def region_weight(smap: SpectralMap, center: complex, radius: float) -> complex:
    """Σ C(ω)·ΔRe·ΔIm sobre os nós válidos do disco |ω - center| ≤ radius."""
    omegas = smap.grid.omegas()
    inside = smap.valid & (np.abs(omegas - center) <= radius)
    return complex(np.sum(smap.values[inside]) * smap.grid.area_element)


def autocorrelator(smap: SpectralMap, times: Sequence[float], coverage_tolerance: float = 0.03) -> TimeSeries:
    """C(t) = Σ_interior ΔRe·ΔIm·e^{ωt}·C(ω)."""
    times = np.asarray(times, dtype=float)
    omegas = smap.grid.omegas()[smap.valid]
    weights = smap.values[smap.valid] * smap.grid.area_element
    values = np.exp(np.outer(times, omegas)) @ weights

    captured = complex(weights.sum())
    expected = smap.expected_weight
    metadata = {"captured_weight": captured, "expected_weight": expected, "coverage_ok": True}
    if expected != 0 and abs(captured - expected) > coverage_tolerance * abs(expected):
        metadata["coverage_ok"] = False
        logger.warning(f"Grade captura {abs(captured / expected):.1%} do peso espectral esperado; "
                       f"amplie a grade ou aumente M")
    series = TimeSeries(times, values, source=f"nhkpm-{smap.backend}", metadata=metadata)
    residue = series.imag_residue()
    series.metadata["imag_residue"] = residue
    if residue > Settings.IMAG_RESIDUE_TOLERANCE:
        logger.warning(f"Resíduo imaginário de C(t): {residue:.2e}")
    return series


def decay_rate(series: TimeSeries, window: Optional[float] = None) -> float:
    """Taxa -d log|C|/dt ajustada por mínimos quadrados na janela final [t_max - window, t_max]."""
    t = series.times
    if t.size < 3:
        raise ValueError("Série curta demais para ajustar a taxa de decaimento")
    window = window if window is not None else 0.5 * t[-1]
    mask = (t >= t[-1] - window) & (np.abs(series.values) > 0)
    if mask.sum() < 2:
        raise ValueError("Janela sem amostras não nulas suficientes")
    slope, _ = np.polyfit(t[mask], np.log(np.abs(series.values[mask])), 1)
    return float(-slope)


# =============================================================================
# CORRELADOR PROJETADO
# =============================================================================
def project_map(smap: SpectralMap) -> ProjectedCorrelator:
    """C_P(Γ) = Σ_Im C(Γ + iIm)·ΔIm para cada coluna interior de Re."""
    interior = slice(1, -1)
    column_sums = smap.values[interior, interior].sum(axis=1) * smap.grid.d_im
    gammas = smap.grid.re_axis[interior]
    scale = float(np.max(np.abs(column_sums.real), initial=0.0))
    residue = float(np.max(np.abs(column_sums.imag), initial=0.0) / scale) if scale > 0 else 0.0
    if residue > Settings.IMAG_RESIDUE_TOLERANCE:
        logger.warning(f"Resíduo imaginário do correlador projetado: {residue:.2e}")

    # cobertura vertical: peso nas linhas extremas indica espectro cortado
    edge = np.abs(smap.values[interior, [1, -2]]).max(initial=0.0)
    peak = np.abs(smap.values[smap.valid]).max(initial=0.0)
    coverage_ok = not (peak > 0 and edge > 1e-2 * peak)
    if not coverage_ok:
        logger.warning("Faixa vertical da grade pode não cobrir a extensão imaginária do espectro")
    return ProjectedCorrelator(gammas, column_sums.real.copy(), residue,
                               metadata={"coverage_ok": coverage_ok, "d_im": smap.grid.d_im,
                                         "sigma_omega": (smap.kpm.scale or 0.0) * smap.kpm.sigma})


def projected_correlator(backend, psi_left, psi_right, gammas: Sequence[float], kpm: KpmParams,
                         im_range: Sequence[float], n_im: int, pool: Optional[WorkerPool] = None) -> ProjectedCorrelator:
    """
    Varre linhas verticais Re ω = Γ. Os Γ devem ser uniformemente espaçados;
    a grade ganha uma coluna extra de cada lado para as diferenças centrais.
    """
    gammas = np.asarray(gammas, dtype=float)
    if gammas.size < 1:
        raise ValueError("Lista de Γ vazia")
    step = float(np.diff(gammas).mean()) if gammas.size > 1 else (im_range[1] - im_range[0]) / (n_im - 1)
    if gammas.size > 1 and not np.allclose(np.diff(gammas), step, rtol=1e-6, atol=1e-12):
        raise ValueError("Os valores de Γ devem ser uniformemente espaçados")
    grid = FrequencyGrid(gammas[0] - step, gammas[-1] + step, im_range[0], im_range[1],
                         gammas.size + 2, n_im)
    return project_map(spectral_map(grid, backend, psi_left, psi_right, kpm, pool=pool))


# =============================================================================
# DETECÇÃO DE PICOS
# =============================================================================
def _refine_peak(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vértice da parábola pelos três pontos ao redor de i."""
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom == 0:
        return float(x[i])
    offset = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(x[i] + np.clip(offset, -0.5, 0.5) * (x[1] - x[0]))


def _map_sigma(smap: SpectralMap) -> float:
    """Largura σ_ω do núcleo no plano; sem escala, duas células da grade."""
    if smap.kpm.scale:
        return float(smap.kpm.scale * smap.kpm.sigma)
    return 2.0 * max(smap.grid.d_re, smap.grid.d_im)


def _map_peaks(smap: SpectralMap, weight_threshold: float, rel_height: float):
    """
    Polos isolados do mapa: máximos locais de |C| em janelas 3×3.

    Cada candidato recebe o peso do disco de raio 3σ_ω ao redor. O núcleo
    suavizado é positivo no centro e negativo num anel entre ~2σ_ω e ~4σ_ω
    (mínimo de ~3% do pico em ~2.8σ_ω). Um polo genuíno satisfaz Re(C·w̄) > 0;
    máximos do anel de um polo mais forte têm C com fase oposta à do peso
    desse polo e são descartados.
    """
    grid = smap.grid
    sigma = _map_sigma(smap)
    amplitude = np.where(smap.valid, np.abs(smap.values), 0.0)
    top = float(amplitude.max(initial=0.0))
    if top == 0.0:
        return [], [], sigma
    padded = np.pad(amplitude, 1)
    neighbours = np.stack([padded[1 + di:1 + di + amplitude.shape[0], 1 + dj:1 + dj + amplitude.shape[1]]
                           for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)])
    # só nós cujos oito vizinhos são válidos: na borda do anel um pico cortado vira máximo falso
    inner = np.pad(smap.valid, 1)
    inner = np.all([inner[1 + di:1 + di + amplitude.shape[0], 1 + dj:1 + dj + amplitude.shape[1]]
                    for di in (-1, 0, 1) for dj in (-1, 0, 1)], axis=0)
    is_max = inner & (amplitude >= neighbours.max(axis=0)) & (amplitude >= rel_height * top)
    candidates = sorted(zip(*np.nonzero(is_max)), key=lambda ij: -amplitude[ij])

    re_axis, im_axis = grid.re_axis, grid.im_axis
    omegas = grid.omegas()
    zero_reach = 2 * max(grid.d_re, grid.d_im)
    peaks, weights = [], []
    for i, j in candidates:
        node = omegas[i, j]
        # platô: um máximo já aceito a menos de uma largura
        if any(abs(node - p) < sigma for p in peaks):
            continue
        # anel negativo de um polo mais forte já aceito: C ∝ -w desse polo
        if any(abs(node - p) <= 4.5 * sigma and (smap.values[i, j] * np.conj(w)).real < 0
               for p, w in zip(peaks, weights)):
            continue
        weight = region_weight(smap, node, 3 * sigma)
        if (smap.values[i, j] * np.conj(weight)).real <= 0:
            logger.debug(f"Máximo em ω={node:.4g} descartado (lóbulo negativo do núcleo)")
            continue
        if abs(weight) < weight_threshold:
            if abs(node) < zero_reach:
                logger.debug(f"Pico em ω={node:.4g} descartado (peso {abs(weight):.2e} do estado estacionário)")
            continue
        position = complex(_refine_peak(re_axis, amplitude[:, j], i), _refine_peak(im_axis, amplitude[i, :], j))
        peaks.append(position)
        weights.append(weight)
    return peaks, weights, sigma


def _projected_peaks(cp: ProjectedCorrelator, weight_threshold: float, rel_height: float):
    """Máximos locais de |C_P(Γ)| ao longo de Γ."""
    x = np.asarray(cp.gammas, dtype=float)
    signed = np.asarray(cp.values, dtype=float)
    y = np.abs(signed)
    dx = x[1] - x[0]
    # o lóbulo negativo projetado de um polo fica a ~3σ_ω e tem ~8% da altura do pico
    sigma = cp.metadata.get("sigma_omega", 0.0)
    peaks, weights = [], []
    for i in range(1, x.size - 1):
        if not (y[i] >= y[i - 1] and y[i] > y[i + 1] and y[i] >= rel_height * y.max()):
            continue
        near = (np.abs(x - x[i]) <= 4 * sigma) & (np.sign(signed) != np.sign(signed[i]))
        if sigma > 0 and np.any(near & (0.15 * y > y[i])):
            continue
        position = _refine_peak(x, y, i)
        lo, hi = max(i - 3, 0), min(i + 4, x.size)
        weight = float(np.sum(signed[lo:hi]) * dx)
        if abs(position) < 2 * abs(dx) and abs(weight) < weight_threshold:
            logger.debug(f"Pico em Γ={position:.4g} descartado (peso {weight:.2e} do estado estacionário)")
            continue
        peaks.append(complex(position, 0.0))
        weights.append(weight)
    return peaks, weights


def extract_relaxation_rate(source: Union[ProjectedCorrelator, SpectralMap],
                            weight_threshold: Optional[float] = None,
                            rel_height: float = 0.01) -> RelaxationRate:
    """
    Δ = |Re| do pico não nulo mais próximo do eixo imaginário.

    Com um SpectralMap os polos são localizados no plano, o que separa polos
    com Re próximos mas Im distintos (na projeção eles viram um ombro). Ali o
    limiar de peso vale para todos os picos, como na seleção dos oráculos.
    Com um ProjectedCorrelator o pico em Γ ≈ 0 só é descartado quando seu peso
    fica abaixo do limiar (resíduo numérico do estado estacionário).
    """
    weight_threshold = Settings.WEIGHT_THRESHOLD if weight_threshold is None else weight_threshold
    tolerances = {"weight_threshold": weight_threshold, "rel_height": rel_height}
    if isinstance(source, SpectralMap):
        method = "spectral-map"
        tolerances["grid_step"] = [source.grid.d_re, source.grid.d_im]
        peaks, weights, sigma = _map_peaks(source, weight_threshold, rel_height)
        tolerances["sigma_omega"] = sigma
    else:
        method = "projected-correlator"
        x = np.asarray(source.gammas, dtype=float)
        tolerances["grid_step"] = float(x[1] - x[0]) if x.size > 1 else None
        if x.size < 3 or np.max(np.abs(source.values), initial=0.0) == 0.0:
            return RelaxationRate(float('nan'), np.array([]), method, found=False, tolerances=tolerances)
        peaks, weights = _projected_peaks(source, weight_threshold, rel_height)

    if not peaks:
        logger.warning("Nenhum pico não nulo encontrado")
        return RelaxationRate(float('nan'), np.array([]), method, found=False, tolerances=tolerances)
    peaks = np.array(peaks)
    order = np.lexsort((np.abs(peaks.imag), np.abs(peaks.real)))
    return RelaxationRate(float(abs(peaks[order[0]].real)), peaks[order], method,
                          peak_weights=np.array(weights)[order], tolerances=tolerances)
