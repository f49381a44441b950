# =============================================================================
# MODELO: BÚSSOLA QUÂNTICA COM DEFASAGEM E GRADIENTE DE CAMPO
# =============================================================================
# Hamiltoniano H = -Σ Jx σˣσˣ (pares 2l-1,2l) - Σ Jy σʸσʸ (pares 2l,2l+1)
#                 + Σ B(l-1) σᶻ_l + Σ Jz σᶻ_l σᶻ_{l+1}
# com dissipadores L_l = √γ σᶻ_l e contorno aberto.
# Sítios são 1-based na documentação e 0-based no código: o sítio 0 tem campo nulo.

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp

from linalg_core import DimensionError, SparseOperator, ensure_finite

logger = logging.getLogger(__name__)

# Palavra de Pauli: tupla de (rótulo, sítio) com rótulo em {'X','Y','Z','I'}
PauliWord = Tuple[Tuple[str, int], ...]
PauliTerm = Tuple[complex, PauliWord]

PAULI = {
    'I': np.eye(2, dtype=np.complex128),
    'X': np.array([[0, 1], [1, 0]], dtype=np.complex128),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    'Z': np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


class ModelError(ValueError):
    def __init__(self, message: str, field: str = None):
        self.message = message
        self.field = field
        super().__init__(self.message)


@dataclass(frozen=True)
class ModelParams:
    n_spins: int
    Jx: float = 0.75
    Jy: float = 0.5
    Jz: float = 0.0
    B: float = 0.0
    gamma: float = 0.2

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ModelError(f"n_spins deve ser inteiro positivo, recebido {self.n_spins}", "n_spins")
        if self.n_spins % 2:
            raise ModelError(f"N deve ser par (pares de ligações Jx), recebido N={self.n_spins}", "n_spins")
        if self.gamma < 0:
            raise ModelError(f"gamma deve ser não negativo, recebido {self.gamma}", "gamma")
        ensure_finite([self.Jx, self.Jy, self.Jz, self.B, self.gamma], "parâmetros do modelo")

    @property
    def has_hamiltonian(self) -> bool:
        return any(c != 0 for c in (self.Jx, self.Jy, self.Jz, self.B))

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins


# =============================================================================
# PALAVRAS DE PAULI -> OPERADORES ESPARSOS
# =============================================================================
def _bits(n_sites: int) -> np.ndarray:
    """Matriz (n_sites, 2^n) com o bit de cada sítio; sítio 0 é o mais significativo."""
    states = np.arange(2 ** n_sites)
    shifts = np.arange(n_sites - 1, -1, -1)
    return (states[None, :] >> shifts[:, None]) & 1


def pauli_word_coo(coef: complex, word: PauliWord, n_sites: int):
    """Linhas, colunas e valores de coef·(palavra) na base computacional (|0⟩ = ↑)."""
    bits = _bits(n_sites)
    cols = np.arange(2 ** n_sites)
    flip = 0
    phase = np.full(cols.shape, complex(coef))
    for label, site in word:
        if not 0 <= site < n_sites:
            raise DimensionError(f"Sítio {site} fora da cadeia de {n_sites} sítios")
        if label in ('X', 'Y'):
            flip ^= 1 << (n_sites - 1 - site)
        if label in ('Z', 'Y'):
            phase = phase * (1 - 2 * bits[site])
        if label == 'Y':
            phase = phase * 1j
    return cols ^ flip, cols, phase


def operator_from_terms(terms: List[PauliTerm], n_sites: int, shift: complex = 0.0) -> SparseOperator:
    """Soma Σ c·(palavra) + shift·I como SparseOperator."""
    dim = 2 ** n_sites
    rows, cols, vals = [], [], []
    for coef, word in terms:
        if coef == 0:
            continue
        r, c, v = pauli_word_coo(coef, word, n_sites)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    if shift != 0:
        diag = np.arange(dim)
        rows.append(diag)
        cols.append(diag)
        vals.append(np.full(dim, complex(shift)))
    if not rows:
        return SparseOperator(sp.csr_matrix((dim, dim), dtype=np.complex128))
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(dim, dim)).tocsr()
    return SparseOperator(mat)


def sigma_z(site: int, n_sites: int) -> SparseOperator:
    return operator_from_terms([(1.0, (('Z', site),))], n_sites)


# =============================================================================
# HAMILTONIANO
# =============================================================================
def hamiltonian_terms(p: ModelParams) -> List[PauliTerm]:
    """Termos de Pauli do Hamiltoniano (sítios 0-based)."""
    n = p.n_spins
    terms: List[PauliTerm] = []
    for l in range(0, n, 2):
        terms.append((-p.Jx, (('X', l), ('X', l + 1))))
    for l in range(1, n - 1, 2):
        terms.append((-p.Jy, (('Y', l), ('Y', l + 1))))
    for l in range(n):
        terms.append((p.B * l, (('Z', l),)))
    for l in range(n - 1):
        terms.append((p.Jz, (('Z', l), ('Z', l + 1))))
    return [(c, w) for c, w in terms if c != 0]


@lru_cache(maxsize=32)
def build_hamiltonian(p: ModelParams) -> SparseOperator:
    """H como operador esparso hermitiano em 2^N dimensões."""
    return operator_from_terms(hamiltonian_terms(p), p.n_spins)


@lru_cache(maxsize=8)
def _dephasing_mask(n: int) -> np.ndarray:
    """mask[σ,τ] = Σ_l z_l(σ) z_l(τ) - N, com z = ±1; σᶻρσᶻ - ρ vira um produto elemento a elemento."""
    z = 1 - 2 * _bits(n)
    mask = (z.T @ z - n).astype(float)
    mask.flags.writeable = False
    return mask


def parity_operator(n: int) -> SparseOperator:
    """Q = Π_l σᶻ_l (diagonal ±1)."""
    if n < 1:
        raise ModelError(f"N deve ser ≥ 1, recebido {n}", "n_spins")
    diag = (-1.0) ** _bits(n).sum(axis=0)
    return SparseOperator(sp.diags(diag.astype(np.complex128), format='csr'))


def steady_states(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """ρ_± = (I ± Q)/2^N."""
    q = parity_operator(n).to_dense()
    eye = np.eye(2 ** n, dtype=np.complex128)
    return (eye + q) / 2 ** n, (eye - q) / 2 ** n


# =============================================================================
# LIOUVILLIANO
# =============================================================================
def apply_liouvillian(p: ModelParams, rho: np.ndarray) -> np.ndarray:
    """𝓛[ρ] = -i[H,ρ] + γ Σ_l (σᶻ_l ρ σᶻ_l - ρ)   (L†L = γI simplificado analiticamente)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (p.dim, p.dim):
        raise DimensionError(f"ρ deve ter forma {(p.dim, p.dim)}, recebido {rho.shape}",
                             expected=p.dim, got=rho.shape[0])
    out = p.gamma * (_dephasing_mask(p.n_spins) * rho)
    if p.has_hamiltonian:
        h = build_hamiltonian(p).matrix
        hr = h @ rho
        # ρH = (H†ρ†)† = (Hρ†)† com H hermitiano
        rh = (h @ rho.conj().T).conj().T
        out += -1j * (hr - rh)
    return out
