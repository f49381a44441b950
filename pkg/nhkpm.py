# =============================================================================
# MÉTODO DO POLINÔMIO NÚCLEO NÃO HERMITIANO (NHKPM)
# =============================================================================
# Para cada frequência complexa ω o operador não hermitiano ω - 𝓛̃ é embutido
# no bloco fora da diagonal de
#
#     ℋ(ω) = [[0, ω - 𝓛̃], [ω* - 𝓛̃†, 0]]
#
# cujo espectro é ±(valores singulares de ω - 𝓛̃). Com |L⟩ = (0, ψ_L) e
# |R⟩ = (ψ_R, 0), ⟨L|ℋ^{-1}|R⟩ = ⟨ψ_L|(ω - 𝓛̃)^{-1}|ψ_R⟩ = G(ω), e a
# densidade espectral complexa é C(ω) = (1/π) ∂_{ω*} G(ω).
# G é reconstruída dos momentos de Chebyshev μ_m = ⟨L|T_m(ℋ/a)|R⟩ com o
# núcleo de Jackson aplicado à expansão do inverso em valor principal.

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.sparse.linalg import norm as sparse_norm
from scipy.special import dawsn

from config import Settings
from linalg_core import DimensionError, SparseOperator, ensure_finite
from tn import (MatrixProductState, apply_mpo, bond_profile_rows, from_dense, inner,
                linear_combination, mpo_from_terms)
from vectorize import LiouvillianTerms
from workers import WorkerPool

logger = logging.getLogger(__name__)


# =============================================================================
# EXCEÇÕES
# =============================================================================
class ScaleViolationError(RuntimeError):
    """A recursão cresceu além da cota de T_m: a escala a não cobre o espectro de ℋ."""
    exit_code = 1

    def __init__(self, message: str, step: int = None, suggested_scale: float = None):
        self.message = message
        self.step = step
        self.suggested_scale = suggested_scale
        super().__init__(self.message)


class KernelCheckError(RuntimeError):
    exit_code = 1

    def __init__(self, message: str, check: str = "jackson-kernel"):
        self.message = message
        self.check = check
        super().__init__(self.message)


class GridError(ValueError):
    def __init__(self, message: str, field: str = None):
        self.message = message
        self.field = field
        super().__init__(self.message)


# =============================================================================
# PARÂMETROS E GRADE
# =============================================================================
@dataclass(frozen=True)
class KpmParams:
    n_moments: int
    scale: Optional[float] = None
    kernel: str = "jackson"

    def __post_init__(self):
        if self.n_moments < Settings.MIN_MOMENTS:
            raise ValueError(f"n_moments deve ser ≥ {Settings.MIN_MOMENTS}, recebido {self.n_moments}")
        if self.kernel != "jackson":
            raise ValueError(f"Núcleo não suportado: {self.kernel}")
        if self.scale is not None and not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"Escala deve ser positiva e finita, recebido {self.scale}")

    @property
    def sigma(self) -> float:
        """Largura do núcleo de Jackson em unidades reescaladas: σ = π/M."""
        return np.pi / self.n_moments

    def with_scale(self, scale: float) -> 'KpmParams':
        return replace(self, scale=float(scale))


@dataclass(frozen=True)
class FrequencyGrid:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int

    def __post_init__(self):
        for name in ("n_re", "n_im"):
            if getattr(self, name) < 3:
                raise GridError(f"{name} deve ser ≥ 3 (diferenças centrais), recebido {getattr(self, name)}", name)
        if not self.re_max > self.re_min:
            raise GridError(f"re_max ({self.re_max}) deve exceder re_min ({self.re_min})", "re_max")
        if not self.im_max > self.im_min:
            raise GridError(f"im_max ({self.im_max}) deve exceder im_min ({self.im_min})", "im_max")

    @property
    def re_axis(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.n_re)

    @property
    def im_axis(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.n_im)

    @property
    def d_re(self) -> float:
        return (self.re_max - self.re_min) / (self.n_re - 1)

    @property
    def d_im(self) -> float:
        return (self.im_max - self.im_min) / (self.n_im - 1)

    @property
    def area_element(self) -> float:
        return self.d_re * self.d_im

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_re, self.n_im

    def omegas(self) -> np.ndarray:
        """Nós ω[i, j] = re[i] + i·im[j]."""
        re, im = np.meshgrid(self.re_axis, self.im_axis, indexing='ij')
        return re + 1j * im

    def corners(self) -> List[complex]:
        return [complex(r, i) for r in (self.re_min, self.re_max) for i in (self.im_min, self.im_max)]

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask

    def is_reflection_symmetric(self) -> bool:
        return abs(self.im_min + self.im_max) <= 1e-12 * max(abs(self.im_min), abs(self.im_max), 1.0)

    def refined(self, re_min: float, re_max: float, im_min: float, im_max: float,
                n_re: Optional[int] = None, n_im: Optional[int] = None) -> 'FrequencyGrid':
        return FrequencyGrid(re_min, re_max, im_min, im_max, n_re or self.n_re, n_im or self.n_im)


@dataclass
class BlockVector:
    """Vetor em blocos (superior, inferior) de ℋ; None representa um bloco nulo."""
    upper: Any = None
    lower: Any = None


# =============================================================================
# BACKENDS
# =============================================================================
class DenseBackend:
    """
    Vetores densos com lote de frequências: cada coluna de um bloco é um nó da
    grade, e (ω - 𝓛̃)V vira V·diag(ω) - 𝓛̃V numa única multiplicação esparsa.
    """
    name = "dense"
    batched = True

    def __init__(self, operator: Union[LiouvillianTerms, SparseOperator]):
        if isinstance(operator, LiouvillianTerms):
            self.terms = operator
            op = operator.to_operator()
        else:
            self.terms = None
            op = operator
        self.matrix = op.matrix
        self.matrix_dag = op.matrix.conj().T.tocsr()
        self.record_bonds = False
        self.bond_rows: List[Tuple[int, int, int]] = []
        self.last_truncation_error = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def operator_bound(self) -> float:
        """Cota superior para ‖𝓛̃‖₂."""
        if self.terms is not None:
            return self.terms.coefficient_norm()
        return float(np.sqrt(sparse_norm(self.matrix, 1) * sparse_norm(self.matrix, np.inf)))

    def prepare(self, state) -> np.ndarray:
        vec = np.asarray(state, dtype=np.complex128).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimensionError(f"Estado de dimensão {vec.shape[0]}, operador {self.dim}",
                                 expected=self.dim, got=vec.shape[0])
        return vec

    def start(self, state: np.ndarray, n_nodes: int) -> np.ndarray:
        return np.repeat(state[:, None], n_nodes, axis=1)

    def shifted(self, omega: np.ndarray, x: np.ndarray, adjoint: bool) -> np.ndarray:
        if adjoint:
            return x * np.conj(omega) - self.matrix_dag @ x
        return x * omega - self.matrix @ x

    def scale(self, alpha: complex, x):
        return alpha * x

    def combine(self, alpha: complex, x, beta: complex, y):
        return alpha * x + beta * y

    def overlap(self, left: np.ndarray, x: np.ndarray) -> np.ndarray:
        return left.conj() @ x

    def norm(self, x) -> np.ndarray:
        return np.linalg.norm(x, axis=0)

    def error(self, x) -> float:
        return 0.0


class MpsBackend:
    """
    Vetores como MPS na cadeia de 2N sítios, um nó da grade por vez.
    O MPO de (ω - 𝓛̃) é montado por frequência com ω como termo de identidade.
    """
    name = "mps"
    batched = False

    def __init__(self, terms: LiouvillianTerms, max_bond: Optional[int] = None,
                 cutoff: Optional[float] = None, record_bonds: bool = False):
        self.terms = terms
        self.max_bond = max_bond or Settings.DEFAULT_MAX_BOND
        self.cutoff = Settings.DEFAULT_CUTOFF if cutoff is None else cutoff
        self.record_bonds = record_bonds
        self.bond_rows: List[Tuple[int, int, int]] = []
        self.last_truncation_error = 0.0
        self._mpos = {}
        # valida o alcance dos acoplamentos antes de qualquer recursão
        mpo_from_terms(terms)

    @property
    def dim(self) -> int:
        return 2 ** self.terms.n_sites

    def operator_bound(self) -> float:
        return self.terms.coefficient_norm()

    def prepare(self, state) -> MatrixProductState:
        if isinstance(state, MatrixProductState):
            if state.n_sites != self.terms.n_sites:
                raise DimensionError(f"MPS com {state.n_sites} sítios, 𝓛̃ com {self.terms.n_sites}")
            return state
        return from_dense(np.asarray(state, dtype=np.complex128).reshape(-1), self.terms.n_sites)

    def start(self, state: MatrixProductState, n_nodes: int) -> MatrixProductState:
        return state

    def _shifted_mpo(self, omega: complex, adjoint: bool):
        key = (complex(omega), adjoint)
        if key not in self._mpos:
            source = self.terms.adjoint() if adjoint else self.terms
            w = np.conj(omega) if adjoint else omega
            shifted = LiouvillianTerms(tuple((-c, word) for c, word in source.terms),
                                       complex(w - source.shift), source.n_sites, source.basis)
            self._mpos = {k: v for k, v in self._mpos.items() if k[0] == key[0]}
            self._mpos[key] = mpo_from_terms(shifted)
        return self._mpos[key]

    def shifted(self, omega, x: MatrixProductState, adjoint: bool) -> MatrixProductState:
        omega = complex(np.asarray(omega).reshape(-1)[0])
        return apply_mpo(self._shifted_mpo(omega, adjoint), x, self.max_bond, self.cutoff)

    def scale(self, alpha: complex, x: MatrixProductState) -> MatrixProductState:
        return x.with_scale(alpha)

    def combine(self, alpha, x, beta, y) -> MatrixProductState:
        return linear_combination([alpha, beta], [x, y], self.max_bond, self.cutoff)

    def overlap(self, left: MatrixProductState, x: MatrixProductState) -> np.ndarray:
        return np.array([inner(left, x)])

    def norm(self, x: MatrixProductState) -> np.ndarray:
        return np.array([x.norm()])

    def error(self, x: MatrixProductState) -> float:
        return x.truncation_error


Backend = Union[DenseBackend, MpsBackend]


# =============================================================================
# OPERADOR HERMITRIZADO E RECURSÃO DE CHEBYSHEV
# =============================================================================
def hermitrized_apply(omega, backend: Backend, v: BlockVector) -> BlockVector:
    """ℋ·v = ((ω - 𝓛̃)·inferior, (ω* - 𝓛̃†)·superior), sem montar ℋ."""
    upper = backend.shifted(omega, v.lower, adjoint=False) if v.lower is not None else None
    lower = backend.shifted(omega, v.upper, adjoint=True) if v.upper is not None else None
    return BlockVector(upper, lower)


def _combine(backend: Backend, alpha, x, beta, y):
    if x is None and y is None:
        return None
    if x is None:
        return backend.scale(beta, y)
    if y is None:
        return backend.scale(alpha, x)
    return backend.combine(alpha, x, beta, y)


def _block_norm(backend: Backend, v: BlockVector) -> np.ndarray:
    parts = [backend.norm(b) ** 2 for b in (v.upper, v.lower) if b is not None]
    return np.sqrt(sum(parts)) if parts else np.zeros(1)


def _block_error(backend: Backend, v: BlockVector) -> float:
    return sum(backend.error(b) for b in (v.upper, v.lower) if b is not None)


def estimate_scale(operator: Union[LiouvillianTerms, SparseOperator, Backend],
                   grid: FrequencyGrid, margin: Optional[float] = None) -> float:
    """a = margem·(max |ω| nos cantos + cota de ‖𝓛̃‖), cota do raio espectral de ℋ(ω)."""
    margin = margin or Settings.SCALE_MARGIN
    if isinstance(operator, LiouvillianTerms):
        bound = operator.coefficient_norm()
    elif isinstance(operator, SparseOperator):
        bound = DenseBackend(operator).operator_bound()
    else:
        bound = operator.operator_bound()
    corner = max(abs(w) for w in grid.corners())
    scale = margin * (corner + bound)
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError(f"Escala inválida: {scale}")
    return float(scale)


def chebyshev_moments(omega, backend: Backend, psi_left, psi_right, kpm: KpmParams) -> np.ndarray:
    """
    μ_m = ⟨L|T_m(ℋ/a)|R⟩, m = 0..M-1.

    `omega` pode ser um escalar ou, no backend denso, um array de nós
    (resultado com forma (M, n_nós)). Os blocos alternam a cada passo, então
    μ_m é identicamente nulo para m par.
    """
    if kpm.scale is None:
        raise ValueError("KpmParams sem escala: use estimate_scale ou KpmParams.with_scale")
    scalar_input = np.ndim(omega) == 0
    omegas = np.atleast_1d(np.asarray(omega, dtype=np.complex128))
    if not backend.batched and omegas.size != 1:
        raise DimensionError(f"Backend {backend.name} avalia um nó por vez, recebido {omegas.size}")
    a = kpm.scale
    n_moments = kpm.n_moments

    left = backend.prepare(psi_left)
    right = backend.start(backend.prepare(psi_right), omegas.size)

    def measure(v: BlockVector) -> np.ndarray:
        if v.lower is None:
            return np.zeros(omegas.size, dtype=np.complex128)
        return backend.overlap(left, v.lower)

    def record(step: int, v: BlockVector):
        if backend.record_bonds:
            block = v.upper if v.upper is not None else v.lower
            backend.bond_rows.extend(bond_profile_rows(step, block))

    mu = np.zeros((n_moments, omegas.size), dtype=np.complex128)
    v_prev = BlockVector(right, None)
    reference = _block_norm(backend, v_prev)
    mu[0] = measure(v_prev)
    record(0, v_prev)

    h = hermitrized_apply(omegas, backend, v_prev)
    v_cur = BlockVector(_combine(backend, 1.0 / a, h.upper, 0, None),
                        _combine(backend, 1.0 / a, h.lower, 0, None))
    mu[1] = measure(v_cur)
    record(1, v_cur)

    for m in range(2, n_moments):
        h = hermitrized_apply(omegas, backend, v_cur)
        v_next = BlockVector(_combine(backend, 2.0 / a, h.upper, -1.0, v_prev.upper),
                             _combine(backend, 2.0 / a, h.lower, -1.0, v_prev.lower))
        norms = _block_norm(backend, v_next)
        tolerance = 1e-6 + 10 * _block_error(backend, v_next) / max(float(np.max(reference)), 1e-300)
        if np.any(norms > (1 + tolerance) * reference):
            growth = float(np.max(norms / np.maximum(reference, 1e-300)))
            suggested = a * max(1.5, growth ** (1.0 / m) * 1.1)
            raise ScaleViolationError(
                f"Norma da recursão cresceu {growth:.3g}x no passo {m}: a={a:.4g} não cobre o espectro "
                f"de ℋ; tente kpm.scale ≥ {suggested:.4g}", step=m, suggested_scale=suggested)
        mu[m] = measure(v_next)
        record(m, v_next)
        v_prev, v_cur = v_cur, v_next

    backend.last_truncation_error = _block_error(backend, v_cur) + _block_error(backend, v_prev)
    ensure_finite(mu, "momentos de Chebyshev")
    return mu[:, 0] if scalar_input else mu


# =============================================================================
# NÚCLEO DE JACKSON E INVERSO EM VALOR PRINCIPAL
# =============================================================================
def jackson_coefficients(n_moments: int) -> np.ndarray:
    """g_m = [(M-m+1)cos(πm/(M+1)) + sen(πm/(M+1))cot(π/(M+1))]/(M+1)."""
    if n_moments < 1:
        raise ValueError(f"M deve ser ≥ 1, recebido {n_moments}")
    m = np.arange(n_moments)
    q = np.pi / (n_moments + 1)
    return ((n_moments - m + 1) * np.cos(q * m) + np.sin(q * m) / np.tan(q)) / (n_moments + 1)


def principal_value_coefficients(n_moments: int) -> np.ndarray:
    """Coeficientes de Chebyshev de 1/x em valor principal: 2(-1)^((m-1)/2) para m ímpar, 0 para m par."""
    m = np.arange(n_moments)
    coefs = np.zeros(n_moments)
    odd = m % 2 == 1
    coefs[odd] = 2.0 * (-1.0) ** ((m[odd] - 1) // 2)
    return coefs


@lru_cache(maxsize=16)
def verify_principal_value_coefficients(n_moments: int, tol: float = 1e-8) -> float:
    """
    Confere a forma fechada contra quadratura de Chebyshev-Gauss com K ≥ M nós
    (K par, nenhum nó em x = 0). T_m(x)/x é polinomial de grau m-1 para m
    ímpar, então a quadratura é exata.
    """
    k = n_moments + (n_moments % 2)
    nodes = np.cos(np.pi * (np.arange(k) + 0.5) / k)
    vander = cheb.chebvander(nodes, n_moments - 1)
    numeric = (2.0 / k) * (vander / nodes[:, None]).sum(axis=0)
    error = float(np.max(np.abs(numeric - principal_value_coefficients(n_moments))))
    if error > tol * max(1.0, n_moments / 100):
        raise KernelCheckError(f"Coeficientes do inverso em valor principal divergem da quadratura "
                               f"(erro {error:.2e}, M={n_moments})", check="principal-value-coefficients")
    logger.debug(f"Auto-teste dos coeficientes de valor principal: M={n_moments}, erro {error:.2e}")
    return error


def smoothed_inverse(energy, n_moments: int) -> np.ndarray:
    """(1/E)_J = Σ_m a_m g_m T_m(E) para |E| ≤ 1."""
    coefs = principal_value_coefficients(n_moments) * jackson_coefficients(n_moments)
    return cheb.chebval(np.asarray(energy, dtype=float), coefs)


def dawson_inverse(energy, sigma: float) -> np.ndarray:
    """Forma fechada (2/√(2σ²))·F(E/√(2σ²)), com F a função de Dawson."""
    width = np.sqrt(2.0) * sigma
    return 2.0 / width * dawsn(np.asarray(energy, dtype=float) / width)


def kernel_self_test(n_moments: int, tolerance: float = 3.0) -> dict:
    """
    Checa o núcleo efetivamente usado: g_0 = 1, 0 < g_m ≤ 1, e o inverso
    suavizado dentro de |(1/E)_J - 1/E| ≤ K·σ²/E³ para E ≥ 2σ.
    """
    sigma = np.pi / n_moments
    g = jackson_coefficients(n_moments)
    if len(g) != n_moments or abs(g[0] - 1.0) > 1e-12 or np.any(g <= -1e-12) or np.any(g > 1 + 1e-12):
        raise KernelCheckError(f"Coeficientes de Jackson fora do intervalo (0, 1] ou g_0 ≠ 1 (M={n_moments})")
    energies = np.array([2, 4, 8, 16]) * sigma
    energies = energies[energies < 0.5]
    smoothed = smoothed_inverse(energies, n_moments)
    ratio = np.abs(smoothed - 1.0 / energies) / (sigma ** 2 / energies ** 3)
    if np.any(ratio > tolerance):
        raise KernelCheckError(f"Inverso suavizado viola a cota σ²/E³ (razão máxima {ratio.max():.3g})")
    return {"n_moments": n_moments, "sigma": sigma, "max_ratio": float(ratio.max(initial=0.0))}


def greens_at_zero(moments: np.ndarray, kpm: KpmParams) -> np.ndarray:
    """G = (1/a) Σ_m a_m g_m μ_m ≈ ⟨L|ℋ^{-1}|R⟩."""
    if kpm.scale is None:
        raise ValueError("KpmParams sem escala")
    moments = np.asarray(moments)
    n_moments = moments.shape[0]
    coefs = principal_value_coefficients(n_moments) * jackson_coefficients(n_moments)
    return np.tensordot(coefs, moments, axes=(0, 0)) / kpm.scale


# =============================================================================
# MAPA ESPECTRAL
# =============================================================================
@dataclass
class SpectralMap:
    grid: FrequencyGrid
    values: np.ndarray
    greens: np.ndarray
    valid: np.ndarray
    kpm: KpmParams
    backend: str
    expected_weight: complex = 1.0
    truncation_error: float = 0.0
    symmetry_residual: Optional[float] = None
    bond_rows: List[Tuple[int, int, int]] = field(default_factory=list)

    def total_weight(self) -> complex:
        return complex(np.sum(self.values[self.valid]) * self.grid.area_element)

    def compute_symmetry_residual(self) -> Optional[float]:
        """max|C(ω*) - C(ω)*| / max|C| sobre nós válidos; None se a grade não é simétrica."""
        if not self.grid.is_reflection_symmetric():
            return None
        mirrored = self.values[:, ::-1]
        scale = float(np.max(np.abs(self.values[self.valid]), initial=0.0))
        if scale == 0.0:
            return 0.0
        diff = np.abs(mirrored - np.conj(self.values))[self.valid]
        return float(np.max(diff) / scale)


def dbar_map(grid: FrequencyGrid, greens: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """C = (1/π)·½(∂_Re + i∂_Im)G por diferenças centrais; o anel de borda fica inválido (C = 0)."""
    values = np.zeros(grid.shape, dtype=np.complex128)
    d_re = (greens[2:, 1:-1] - greens[:-2, 1:-1]) / (2 * grid.d_re)
    d_im = (greens[1:-1, 2:] - greens[1:-1, :-2]) / (2 * grid.d_im)
    values[1:-1, 1:-1] = (d_re + 1j * d_im) / (2 * np.pi)
    return values, grid.interior_mask()


def _greens_task(backend: Backend, omegas: np.ndarray, psi_left, psi_right,
                 kpm: KpmParams, record: bool = False) -> Tuple[np.ndarray, float, list]:
    """Tarefa de um lote de nós (função de módulo para ser serializável)."""
    if backend.batched:
        mu = chebyshev_moments(omegas, backend, psi_left, psi_right, kpm)
        return greens_at_zero(mu, kpm), 0.0, []
    wanted = backend.record_bonds
    backend.bond_rows = []
    greens = np.empty(omegas.size, dtype=np.complex128)
    worst = 0.0
    try:
        for k, w in enumerate(omegas):
            # perfil de ligações só do primeiro nó do mapa
            backend.record_bonds = wanted and record and k == 0
            mu = chebyshev_moments(complex(w), backend, psi_left, psi_right, kpm)
            greens[k] = greens_at_zero(mu, kpm)
            worst = max(worst, backend.last_truncation_error)
    finally:
        backend.record_bonds = wanted
    return greens, worst, list(backend.bond_rows)


def spectral_map(grid: FrequencyGrid, backend: Backend, psi_left, psi_right, kpm: KpmParams,
                 pool: Optional[WorkerPool] = None, chunk_size: Optional[int] = None) -> SpectralMap:
    """
    C(ω) em todos os nós da grade. Os nós são avaliados em lotes independentes
    (vários por tarefa no backend denso, um por tarefa no MPS) e montados pela
    posição na grade.
    """
    if kpm.scale is None:
        kpm = kpm.with_scale(estimate_scale(backend, grid))
    verify_principal_value_coefficients(kpm.n_moments)
    pool = pool or WorkerPool(1)
    chunk_size = chunk_size or (Settings.CHUNK_SIZE if backend.batched else 1)

    nodes = grid.omegas().reshape(-1)
    items = {}
    for k, start in enumerate(range(0, nodes.size, chunk_size)):
        items[k] = (backend, nodes[start:start + chunk_size], psi_left, psi_right, kpm, k == 0)
    logger.info(f"Mapa espectral: {grid.n_re}x{grid.n_im} nós, M={kpm.n_moments}, a={kpm.scale:.4g}, "
                f"backend={backend.name}, {len(items)} tarefas")

    results = pool.run_keyed(_greens_task, items)
    greens = np.concatenate([results[k][0] for k in sorted(results)]).reshape(grid.shape)
    truncation = max((results[k][1] for k in results), default=0.0)
    bond_rows = results[0][2] if results else []
    ensure_finite(greens, "G(ω)")

    values, valid = dbar_map(grid, greens)
    left = backend.prepare(psi_left)
    right = backend.prepare(psi_right)
    expected = complex(np.asarray(backend.overlap(left, right)).reshape(-1)[0])

    smap = SpectralMap(grid, values, greens, valid, kpm, backend.name, expected,
                       truncation_error=truncation, bond_rows=bond_rows)
    smap.symmetry_residual = smap.compute_symmetry_residual()
    if smap.symmetry_residual is not None:
        level = logging.WARNING if smap.symmetry_residual > Settings.SYMMETRY_TOLERANCE else logging.INFO
        logger.log(level, f"Resíduo de simetria C(ω*) = C(ω)*: {smap.symmetry_residual:.2e}")
    return smap


def candidate_rectangles(smap: SpectralMap, max_peaks: int = 5, half_width: int = 3,
                         rel_height: float = 0.1) -> List[Tuple[float, float, float, float]]:
    """Retângulos ao redor dos máximos locais de |C| para o segundo passe mais fino."""
    mag = np.where(smap.valid, np.abs(smap.values), 0.0)
    if mag.max(initial=0.0) == 0.0:
        return []
    peaks = []
    for i in range(1, mag.shape[0] - 1):
        for j in range(1, mag.shape[1] - 1):
            window = mag[i - 1:i + 2, j - 1:j + 2]
            if mag[i, j] >= window.max() and mag[i, j] >= rel_height * mag.max():
                peaks.append((mag[i, j], i, j))
    peaks.sort(reverse=True)
    re, im = smap.grid.re_axis, smap.grid.im_axis
    rects = []
    for _, i, j in peaks[:max_peaks]:
        i0, i1 = max(i - half_width, 0), min(i + half_width, len(re) - 1)
        j0, j1 = max(j - half_width, 0), min(j + half_width, len(im) - 1)
        rects.append((float(re[i0]), float(re[i1]), float(im[j0]), float(im[j1])))
    return rects
