# =============================================================================
# ORÁCULOS EXATOS: DIAGONALIZAÇÃO, RUNGE-KUTTA 4 E MATRIZ DE AMORTECIMENTO
# =============================================================================

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import Settings
from linalg_core import EigenDecomposition, ResourceError, eig_nonsymmetric
from model import ModelParams, apply_liouvillian, sigma_z
from observables import RelaxationRate, TimeSeries
from vectorize import VectorizationBasis, boundary_states, build_transformed_liouvillian

logger = logging.getLogger(__name__)


class OracleError(RuntimeError):
    """Falha de um oráculo (instabilidade, calibração, modelo fora do setor quadrático)"""
    def __init__(self, message: str, exit_code: int = 1, suggested_step: float = None):
        self.message = message
        self.exit_code = exit_code
        self.suggested_step = suggested_step
        super().__init__(self.message)


# =============================================================================
# DIAGONALIZAÇÃO EXATA
# =============================================================================
@dataclass
class EdSpectrum:
    eigenvalues: np.ndarray
    weights: np.ndarray
    decomposition: EigenDecomposition


def ed_spectrum(p: ModelParams, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> EdSpectrum:
    """Autovalores de 𝓛̃ e pesos de polo ⟨ψ_L|R_n⟩⟨L_n|ψ_R⟩ (somam C(0) = 1)."""
    dim = 4 ** p.n_spins
    if dim > Settings.DENSE_LIMIT:
        raise ResourceError(f"ED de 𝓛̃ com dimensão {dim} excede o limite denso {Settings.DENSE_LIMIT}")
    terms = build_transformed_liouvillian(p, basis)
    decomposition = eig_nonsymmetric(terms.to_operator())
    psi_left, psi_right = boundary_states(p.n_spins, basis)
    weights = decomposition.pole_weights(psi_left, psi_right)
    logger.info(f"ED: {dim} autovalores, cond={decomposition.condition:.2e}")
    return EdSpectrum(decomposition.eigenvalues, weights, decomposition)


def ed_autocorrelator(p: ModelParams, times: Sequence[float], spectrum: Optional[EdSpectrum] = None) -> TimeSeries:
    """C(t) = Σ_n w_n e^{ω_n t}"""
    spectrum = spectrum or ed_spectrum(p)
    times = np.asarray(times, dtype=float)
    values = np.exp(np.outer(times, spectrum.eigenvalues)) @ spectrum.weights
    return TimeSeries(times, values, source="ed",
                      metadata={"condition": spectrum.decomposition.condition,
                                "reconstruction_ok": spectrum.decomposition.reconstruction_ok})


def _rate_from_poles(eigenvalues: np.ndarray, weights: np.ndarray, threshold: float,
                     method: str) -> RelaxationRate:
    keep = (np.abs(weights) > threshold) & (np.abs(eigenvalues) > 1e-8)
    poles = eigenvalues[keep]
    tolerances = {"weight_threshold": threshold}
    if poles.size == 0:
        return RelaxationRate(float('nan'), np.array([]), method, found=False, tolerances=tolerances)
    order = np.argsort(np.abs(poles.real))
    return RelaxationRate(float(abs(poles[order[0]].real)), poles[order], method,
                          peak_weights=weights[keep][order], tolerances=tolerances)


def ed_relaxation_rate(p: ModelParams, weight_threshold: Optional[float] = None,
                       spectrum: Optional[EdSpectrum] = None) -> RelaxationRate:
    """Δ a partir dos polos de ED com peso acima do limiar."""
    spectrum = spectrum or ed_spectrum(p)
    threshold = Settings.WEIGHT_THRESHOLD if weight_threshold is None else weight_threshold
    return _rate_from_poles(spectrum.eigenvalues, spectrum.weights, threshold, "ed")


# =============================================================================
# RUNGE-KUTTA 4 NA FORMA MATRICIAL
# =============================================================================
def rk4_autocorrelator(p: ModelParams, h: float, horizon: float, sample_every: int = 1) -> TimeSeries:
    """
    Integra dy/dt = 𝓛[y] com y(0) = σᶻ_N ρ_s e registra C(t_n) = tr(σᶻ_N y_n).
    Também acompanha o desvio do traço e da hermiticidade de y.
    """
    if h <= 0:
        raise ValueError(f"Passo h deve ser positivo, recebido {h}")
    if p.n_spins > Settings.RK4_MAX_SPINS:
        raise ResourceError(f"RK4 limitado a N ≤ {Settings.RK4_MAX_SPINS}, recebido N={p.n_spins}")
    n_steps = int(round(horizon / h))
    z_last = sigma_z(p.n_spins - 1, p.n_spins).to_dense().diagonal().real
    y = np.diag(z_last).astype(np.complex128) / p.dim
    reference = np.linalg.norm(y)
    trace0 = np.trace(y)

    times, values = [0.0], [complex(np.dot(z_last, y.diagonal()))]
    trace_drift = hermiticity_drift = 0.0
    for step in range(1, n_steps + 1):
        k1 = apply_liouvillian(p, y)
        k2 = apply_liouvillian(p, y + 0.5 * h * k1)
        k3 = apply_liouvillian(p, y + 0.5 * h * k2)
        k4 = apply_liouvillian(p, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        size = np.linalg.norm(y)
        if not np.isfinite(size) or size > 1.5 * reference:
            suggested = h / 2
            raise OracleError(f"RK4 instável no passo {step} (t={step * h:.3g}, ‖y‖={size:.3g}); "
                              f"tente h ≤ {suggested:.3g}", suggested_step=suggested)
        trace_drift = max(trace_drift, abs(np.trace(y) - trace0))
        hermiticity_drift = max(hermiticity_drift, float(np.max(np.abs(y - y.conj().T))))
        if step % sample_every == 0:
            times.append(step * h)
            values.append(complex(np.dot(z_last, y.diagonal())))

    logger.info(f"RK4: {n_steps} passos, desvio de traço {trace_drift:.2e}, "
                f"desvio de hermiticidade {hermiticity_drift:.2e}")
    return TimeSeries(np.array(times), np.array(values), source="rk4",
                      metadata={"step": h, "trace_drift": float(trace_drift),
                                "hermiticity_drift": hermiticity_drift})


# =============================================================================
# MATRIZ DE AMORTECIMENTO (SETOR QUADRÁTICO EM MAJORANAS)
# =============================================================================
# Jordan-Wigner com c_l = K_l σ⁻_l, K_l = Π_{j<l}(-σᶻ_j), e os majoranas
# a_l = c + c† = K σˣ, b_l = i(c - c†) = K σʸ. A atribuição alterna com a
# paridade do sítio (1-based): ímpar γ⁻ = b, γ⁺ = a; par γ⁻ = a, γ⁺ = b.
# Vetor γ = (γ⁻_1..γ⁻_N, γ⁺_1..γ⁺_N). Um operador quadrático é
# O = (i/4) γᵀ o γ com o antissimétrica; um termo c·γ_j γ_k entra como
# o_jk = -2ic, o_kj = +2ic.

def majorana_operators(n: int) -> List[np.ndarray]:
    """Matrizes densas de γ⁻_l (índice l) e γ⁺_l (índice N+l), só para N pequeno."""
    z = np.diag([1.0, -1.0]).astype(np.complex128)
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    eye = np.eye(2, dtype=np.complex128)

    def string(site, op):
        mats = [-z] * site + [op] + [eye] * (n - site - 1)
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    minus, plus = [], []
    for l in range(n):
        a, b = string(l, x), string(l, y)
        if l % 2 == 0:
            minus.append(b)
            plus.append(a)
        else:
            minus.append(a)
            plus.append(b)
    return minus + plus


def _quadratic(entries: List[Tuple[int, int, complex]], n: int) -> np.ndarray:
    mat = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    for j, k, c in entries:
        mat[j, k] += -2j * c
        mat[k, j] += 2j * c
    if np.allclose(mat.imag, 0):
        return mat.real.copy()
    return mat


def _sigma_z_entry(l: int, n: int, coef: complex = 1.0) -> Tuple[int, int, complex]:
    # σᶻ_l = iγ⁻γ⁺ (sítio 1-based ímpar) ou -iγ⁻γ⁺ (par)
    return l, n + l, coef * (1j if l % 2 == 0 else -1j)


@dataclass
class MajoranaQuadratic:
    """O = (i/4) γᵀ o γ"""
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1] or self.matrix.shape[0] % 2:
            raise OracleError(f"Matriz quadrática deve ser 2N×2N, recebido {self.matrix.shape}")
        if np.max(np.abs(self.matrix + self.matrix.T), initial=0.0) > 1e-12:
            raise OracleError("Matriz quadrática de majoranas não é antissimétrica")

    @property
    def n_spins(self) -> int:
        return self.matrix.shape[0] // 2

    def to_operator(self) -> np.ndarray:
        gammas = majorana_operators(self.n_spins)
        dim = gammas[0].shape[0]
        out = np.zeros((dim, dim), dtype=np.complex128)
        for j in range(len(gammas)):
            for k in range(len(gammas)):
                if self.matrix[j, k] != 0:
                    out += self.matrix[j, k] * (gammas[j] @ gammas[k])
        return 0.25j * out


def _require_quadratic(p: ModelParams):
    if p.Jz != 0:
        raise OracleError("A matriz de amortecimento exige Jz = 0: o termo σᶻσᶻ é quártico em majoranas "
                          "e a evolução dos correladores de dois pontos deixa de ser fechada", exit_code=2)
    if p.n_spins > Settings.DAMPING_MAX_SPINS:
        raise ResourceError(f"Matriz de amortecimento limitada a N ≤ {Settings.DAMPING_MAX_SPINS}")


def majorana_hamiltonian(p: ModelParams) -> np.ndarray:
    """h com H = (i/4) γᵀ h γ; blocos [[T, M], [-M, 0]] na ordem (γ⁻, γ⁺)."""
    _require_quadratic(p)
    n = p.n_spins
    entries = []
    for l in range(0, n, 2):
        # σˣ_l σˣ_{l+1} = i γ⁻_l γ⁻_{l+1}
        entries.append((l, l + 1, -p.Jx * 1j))
    for l in range(1, n - 1, 2):
        # σʸ_l σʸ_{l+1} = -i γ⁻_l γ⁻_{l+1}
        entries.append((l, l + 1, p.Jy * 1j))
    for l in range(n):
        if p.B * l != 0:
            entries.append(_sigma_z_entry(l, n, p.B * l))
    return _quadratic(entries, n)


def dissipator_matrices(p: ModelParams) -> List[np.ndarray]:
    """l_l com L_l = √γ σᶻ_l = (i/4) γᵀ l_l γ."""
    n = p.n_spins
    return [_quadratic([_sigma_z_entry(l, n, np.sqrt(p.gamma))], n) for l in range(n)]


@dataclass
class XSpectrum:
    eigenvalues: np.ndarray
    overlap_weight: np.ndarray
    amplitude: np.ndarray


@dataclass
class DampingMatrix:
    n_spins: int
    x: np.ndarray
    majorana_h: np.ndarray
    dissipators: List[np.ndarray]
    observable: np.ndarray
    eigen: Optional[EigenDecomposition] = None
    # |s̃·s̃/8 - 1|: codificação de σᶻ_N com tr(σᶻ²)/2^N = 1
    norm_residual: float = field(default=0.0)
    # ‖Σ_n R_n⟨L_n|s̃⟩ - s̃‖/‖s̃‖ na autodecomposição de X
    completeness_residual: float = field(default=0.0)

    def diagonalize(self) -> EigenDecomposition:
        if self.eigen is None:
            self.eigen = eig_nonsymmetric(self.x, dense_limit=self.x.shape[0])
        return self.eigen


def build_damping_matrix(p: ModelParams) -> DampingMatrix:
    """
    X = h⊗1 - 1⊗hᵀ - Σ_l l_l⊗l_lᵀ - 4γ·1⊗1 (vetorização por linhas), gerador de
    dõ/dt = [h, o] - Σ_l l_l o l_l - 4γ o.
    """
    _require_quadratic(p)
    n = p.n_spins
    h = majorana_hamiltonian(p)
    dissipators = dissipator_matrices(p)
    eye = np.eye(2 * n)
    x = np.kron(h, eye) - np.kron(eye, h.T) - 4 * p.gamma * np.eye(4 * n * n)
    for l_mat in dissipators:
        x -= np.kron(l_mat, l_mat.T)
    observable = _quadratic([_sigma_z_entry(n - 1, n)], n)
    logger.info(f"Matriz de amortecimento {x.shape[0]}x{x.shape[0]} para N={n}")
    return DampingMatrix(n, x, h, dissipators, observable)


def damping_autocorrelator(p: ModelParams, times: Sequence[float],
                           damping: Optional[DampingMatrix] = None) -> Tuple[TimeSeries, XSpectrum]:
    """
    C(t) = tr(σᶻ_N O(t)) = (2^N/8)⟨s̃|õ(t)⟩ com õ(0) = s̃/2^N, usando
    tr(AB) = (2^N/8)Σ a_ij b_ij. O fator 2^N cancela: C(t) = (1/8)⟨s̃|e^{Xt}|s̃⟩.
    """
    damping = damping or build_damping_matrix(p)
    eigen = damping.diagonalize()
    s = damping.observable.reshape(-1)
    damping.norm_residual = abs(float(s @ s) / 8.0 - 1.0)
    if damping.norm_residual > 1e-12:
        raise OracleError(f"Codificação de σᶻ_N fora da normalização tr(σᶻ²)/2^N = 1 "
                          f"(resíduo {damping.norm_residual:.2e})")

    projection = s @ eigen.right                   # ⟨s̃|R_n⟩
    coefficients = eigen.left.conj().T @ s         # 2^N ⟨L_n|õ(0)⟩
    # s̃ precisa ser reconstruído pela base de autovetores: Σ_n R_n⟨L_n|s̃⟩ = s̃
    damping.completeness_residual = float(np.linalg.norm(eigen.right @ coefficients - s) / np.linalg.norm(s))
    if damping.completeness_residual > 1e-6:
        raise OracleError(f"Autovetores de X não reconstroem σᶻ_N (resíduo {damping.completeness_residual:.2e}); "
                          f"X pode ser defectiva nestes parâmetros")
    amplitude = projection * coefficients / 8.0

    times = np.asarray(times, dtype=float)
    values = np.exp(np.outer(times, eigen.eigenvalues)) @ amplitude
    spectrum = XSpectrum(eigen.eigenvalues, np.abs(coefficients) / 2.0 ** p.n_spins, amplitude)
    series = TimeSeries(times, values, source="damping",
                        metadata={"norm_residual": damping.norm_residual,
                                  "completeness_residual": damping.completeness_residual,
                                  "condition": eigen.condition})
    return series, spectrum


def damping_cross_check(p: ModelParams, times: Optional[Sequence[float]] = None) -> Tuple[int, float]:
    """
    Compara a matriz de amortecimento com ED numa cadeia de N' = min(N, 4)
    sítios e os mesmos acoplamentos. Devolve (N', max|C_X - C_ED|).
    """
    n_small = min(p.n_spins, 4)
    small = ModelParams(n_small, Jx=p.Jx, Jy=p.Jy, Jz=p.Jz, B=p.B, gamma=p.gamma)
    times = np.linspace(0.0, 5.0, 51) if times is None else np.asarray(times, dtype=float)
    series, _ = damping_autocorrelator(small, times)
    deviation = float(np.max(np.abs(series.values - ed_autocorrelator(small, times).values)))
    logger.info(f"Matriz de amortecimento contra ED em N'={n_small}: desvio {deviation:.2e}")
    return n_small, deviation


def _antisymmetric_basis(dim: int) -> np.ndarray:
    """Colunas ortonormais (E_jk - E_kj)/√2, j < k, na vetorização por linhas."""
    pairs = [(j, k) for j in range(dim) for k in range(j + 1, dim)]
    basis = np.zeros((dim * dim, len(pairs)))
    for col, (j, k) in enumerate(pairs):
        basis[j * dim + k, col] = 1 / np.sqrt(2)
        basis[k * dim + j, col] = -1 / np.sqrt(2)
    return basis


def damping_spectral_gap(p: ModelParams, damping: Optional[DampingMatrix] = None) -> float:
    """
    min |Re λ| sobre os autovalores não nulos de X restrita às matrizes
    antissimétricas (o setor das observáveis quadráticas), sem ponderar pela
    sobreposição com σᶻ_N. Em B = 0 os modos mais lentos deste setor têm
    sobreposição nula com σᶻ_N, então o gap fica abaixo do Δ ponderado.
    """
    damping = damping or build_damping_matrix(p)
    basis = _antisymmetric_basis(2 * damping.n_spins)
    restricted = basis.T @ damping.x @ basis
    eigenvalues = eig_nonsymmetric(restricted, dense_limit=restricted.shape[0]).eigenvalues
    decaying = eigenvalues[np.abs(eigenvalues) > 1e-8]
    return float(np.min(np.abs(decaying.real)))


def damping_relaxation_rate(p: ModelParams, weight_threshold: Optional[float] = None,
                            spectrum: Optional[XSpectrum] = None) -> RelaxationRate:
    """Δ dos autovalores de X cuja contribuição para C(t) passa o limiar."""
    if spectrum is None:
        _, spectrum = damping_autocorrelator(p, [0.0])
    threshold = Settings.WEIGHT_THRESHOLD if weight_threshold is None else weight_threshold
    return _rate_from_poles(spectrum.eigenvalues, spectrum.amplitude, threshold, "damping-matrix")
