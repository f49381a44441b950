# =============================================================================
# PRIMITIVAS DE ÁLGEBRA LINEAR COMPLEXA
# =============================================================================
# Operadores esparsos (CSR), produto matriz-vetor, autodecomposição não
# simétrica com autovetores à esquerda e à direita, e SVD com truncamento.
# Operadores e vetores são tratados como imutáveis depois de construídos.

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.typing import NDArray

from config import Settings

logger = logging.getLogger(__name__)

# Um StateVector é simplesmente um array complexo 1D (ou 2D: colunas = lote)
StateVector = NDArray[np.complex128]


# =============================================================================
# EXCEÇÕES
# =============================================================================
class DimensionError(ValueError):
    """Entrada rejeitada por dimensões incompatíveis"""
    def __init__(self, message: str, expected: int = None, got: int = None):
        self.message = message
        self.expected = expected
        self.got = got
        super().__init__(self.message)


class NonFiniteError(ValueError):
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class ResourceError(RuntimeError):
    """Limite de tamanho/memória excedido (código de saída 3)"""
    exit_code = 3

    def __init__(self, message: str, site: int = None):
        self.message = message
        self.site = site
        super().__init__(self.message)


def ensure_finite(data, what: str = "array"):
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{what} contém NaN/Inf")


# =============================================================================
# OPERADOR ESPARSO
# =============================================================================
@dataclass(frozen=True)
class SparseOperator:
    """Operador complexo sobre um espaço de dimensão `dim`, em formato CSR."""
    matrix: sp.csr_matrix

    def __post_init__(self):
        mat = sp.csr_matrix(self.matrix, dtype=np.complex128)
        if mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"Operador deve ser quadrado, recebido {mat.shape}")
        mat.sum_duplicates()
        mat.eliminate_zeros()
        ensure_finite(mat.data, "operador")
        object.__setattr__(self, 'matrix', mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_dense(cls, mat) -> 'SparseOperator':
        return cls(sp.csr_matrix(np.asarray(mat, dtype=np.complex128)))

    @classmethod
    def identity(cls, dim: int) -> 'SparseOperator':
        return cls(sp.identity(dim, dtype=np.complex128, format='csr'))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> 'SparseOperator':
        return SparseOperator(self.matrix.conj().T.tocsr())

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.matrix @ other.matrix)
        return matvec(self, other)


def matvec(op: SparseOperator, v: StateVector) -> StateVector:
    """Retorna op·v. Aceita um vetor (dim,) ou um lote de colunas (dim, k)."""
    v = np.asarray(v)
    if v.shape[0] != op.dim:
        raise DimensionError(
            f"Dimensão incompatível: operador {op.dim}, vetor {v.shape[0]}",
            expected=op.dim, got=v.shape[0])
    return op.matrix @ v


# =============================================================================
# AUTODECOMPOSIÇÃO NÃO SIMÉTRICA
# =============================================================================
@dataclass
class EigenDecomposition:
    """
    Autovalores ω_n e autovetores biortonormais:
    colunas de `right` têm norma 1 e ⟨L_m|R_n⟩ = δ_mn (colunas de `left`).
    """
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float = 1.0
    biorthogonality_error: float = 0.0
    reconstruction_error: float = 0.0
    reconstruction_ok: bool = True
    warnings: list = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left.conj().T

    def pole_weights(self, psi_left: np.ndarray, psi_right: np.ndarray) -> np.ndarray:
        """⟨ψ_L|R_n⟩⟨L_n|ψ_R⟩ para cada autovalor"""
        return (psi_left.conj() @ self.right) * (self.left.conj().T @ psi_right)


def _degenerate_clusters(eigenvalues: np.ndarray, gap: float):
    """Agrupa índices cujos autovalores distam menos que `gap` (união transitiva)."""
    order = np.argsort(eigenvalues.real)
    clusters = []
    used = np.zeros(len(eigenvalues), dtype=bool)
    for i in order:
        if used[i]:
            continue
        members = [i]
        used[i] = True
        k = 0
        while k < len(members):
            close = np.abs(eigenvalues - eigenvalues[members[k]]) < gap
            for j in np.flatnonzero(close & ~used):
                used[j] = True
                members.append(j)
            k += 1
        clusters.append(np.array(members))
    return clusters


def eig_nonsymmetric(op, dense_limit: int = None, tol: float = None) -> EigenDecomposition:
    """
    Diagonaliza um operador (SparseOperator ou matriz densa) e biortonormaliza.

    Convenção: autovetores à direita com norma 2 unitária; autovetores à
    esquerda escalados para ⟨L_n|R_n⟩ = 1. Dentro de grupos quase degenerados
    (gap < DEGENERACY_GAP) os vetores à esquerda são recombinados pela inversa da
    matriz de sobreposição do grupo.
    """
    dense_limit = dense_limit or Settings.DENSE_LIMIT
    tol = tol or Settings.BIORTHO_TOLERANCE

    mat = op.to_dense() if isinstance(op, SparseOperator) else np.asarray(op, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"Matriz deve ser quadrada, recebido {mat.shape}")
    if mat.shape[0] > dense_limit:
        raise ResourceError(f"Dimensão {mat.shape[0]} excede o limite denso {dense_limit}")
    ensure_finite(mat, "matriz")

    w, vl, vr = sla.eig(mat, left=True, right=True)
    vr = vr / np.linalg.norm(vr, axis=0)

    for members in _degenerate_clusters(w, Settings.DEGENERACY_GAP):
        overlap = vl[:, members].conj().T @ vr[:, members]
        try:
            vl[:, members] = vl[:, members] @ np.linalg.inv(overlap).conj().T
        except np.linalg.LinAlgError:
            logger.warning(f"Sobreposição singular no grupo degenerado {members.tolist()}")

    notes = []
    biortho = vl.conj().T @ vr
    bio_err = float(np.max(np.abs(biortho - np.eye(len(w))))) if len(w) else 0.0
    if bio_err > tol:
        # Grupos quase degenerados fora do gap: biortogonaliza globalmente
        logger.warning(f"Erro de biortogonalidade {bio_err:.2e}; usando L = (R^-1)†")
        notes.append("global-biorthogonalization")
        vl = np.linalg.inv(vr).conj().T
        bio_err = float(np.max(np.abs(vl.conj().T @ vr - np.eye(len(w)))))

    cond = float(np.linalg.cond(vr))
    decomposition = EigenDecomposition(w, vr, vl, condition=cond, biorthogonality_error=bio_err)
    scale = max(np.linalg.norm(mat), 1.0)
    decomposition.reconstruction_error = float(np.linalg.norm(decomposition.reconstruct() - mat) / scale)
    if decomposition.reconstruction_error > tol or cond > 1e10:
        decomposition.reconstruction_ok = False
        notes.append(f"defective-or-ill-conditioned (cond={cond:.2e})")
        logger.warning(f"Matriz possivelmente defectiva: cond={cond:.2e}, "
                       f"erro de reconstrução {decomposition.reconstruction_error:.2e}")
    decomposition.warnings = notes
    return decomposition


# =============================================================================
# SVD
# =============================================================================
def svd(mat) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD reduzida: mat = U·diag(S)·V†, com S não crescente."""
    mat = np.asarray(mat)
    ensure_finite(mat, "matriz")
    try:
        u, s, vh = sla.svd(mat, full_matrices=False)
    except sla.LinAlgError:
        u, s, vh = sla.svd(mat, full_matrices=False, lapack_driver='gesvd')
    return u, s, vh.conj().T


def truncation_rank(s: np.ndarray, max_rank: Optional[int] = None, cutoff: float = 0.0) -> int:
    """
    Menor posto k tal que o peso descartado Σ_{i≥k} s_i² ≤ cutoff²·Σ s_i² e k ≤ max_rank.
    Valores singulares numericamente nulos são sempre descartados.

    O limiar é relativo à norma do bloco. `compress` normaliza o estado antes
    da varredura, então ali ele coincide com o limiar absoluto ‖s_descartado‖ ≤ cutoff
    num vetor de norma 1; para um estado de norma ν o erro absoluto por
    ligação fica ≤ cutoff·ν.
    """
    total = float(np.sum(s ** 2))
    if total == 0.0:
        return 1
    # tail[k] = peso descartado ao manter k valores
    tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    floor = max(cutoff ** 2, 1e-28) * total
    k = int(np.argmax(tail <= floor))
    k = max(k, 1)
    if max_rank is not None:
        k = min(k, max_rank)
    return k


def truncated_svd(mat, max_rank: Optional[int] = None, cutoff: float = 0.0):
    """SVD truncada; devolve (U, S, V, peso_descartado_relativo)."""
    u, s, v = svd(mat)
    k = truncation_rank(s, max_rank, cutoff)
    total = float(np.sum(s ** 2))
    discarded = float(np.sum(s[k:] ** 2)) / total if total > 0 else 0.0
    return u[:, :k], s[:k], v[:, :k], discarded
