# =============================================================================
# VETORIZAÇÃO DE MATRIZES DENSIDADE E LIOUVILLIANO TRANSFORMADO
# =============================================================================
# Base "permutada": os índices de ket (σ_l) e bra (τ_l) são intercalados numa
# cadeia de 2N sítios, ket nas posições pares 0-based (2l) e bra nas ímpares
# (2l+1). O estado estacionário I/2^N fatoriza em pares adjacentes e o
# Liouvilliano só acopla sítios a distância ≤ 2.
# Base "ingênua": ket nos sítios 0..N-1 e bra nos sítios N..2N-1.

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from linalg_core import DimensionError, SparseOperator, StateVector
from model import ModelParams, PauliTerm, PauliWord, hamiltonian_terms, operator_from_terms

logger = logging.getLogger(__name__)


class VectorizationBasis(str, Enum):
    PERMUTED = "permuted"
    NAIVE = "naive"


def ket_site(l: int, n: int, basis: VectorizationBasis) -> int:
    return 2 * l if basis == VectorizationBasis.PERMUTED else l


def bra_site(l: int, n: int, basis: VectorizationBasis) -> int:
    return 2 * l + 1 if basis == VectorizationBasis.PERMUTED else l + n


def _n_spins(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2 ** n != dim:
        raise DimensionError(f"Dimensão {dim} não é potência de 2")
    return n


def _interleave_axes(n: int) -> List[int]:
    return [ax for l in range(n) for ax in (l, n + l)]


def vectorize(rho: np.ndarray, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> StateVector:
    """ρ (2^N × 2^N) -> |ρ̃⟩ (4^N), com ⟨ρ̃₁|ρ̃₂⟩ = tr(ρ₁†ρ₂)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"ρ deve ser quadrada, recebido {rho.shape}")
    n = _n_spins(rho.shape[0])
    if basis == VectorizationBasis.NAIVE or n == 0:
        return rho.reshape(-1).copy()
    tensor = rho.reshape((2,) * (2 * n))
    return tensor.transpose(_interleave_axes(n)).reshape(-1).copy()


def devectorize(vec: StateVector, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.complex128)
    n2 = _n_spins(vec.shape[0])
    if n2 % 2:
        raise DimensionError(f"Vetor de dimensão {vec.shape[0]} não corresponde a 2N sítios")
    n = n2 // 2
    if basis == VectorizationBasis.NAIVE or n == 0:
        return vec.reshape(2 ** n, 2 ** n).copy()
    tensor = vec.reshape((2,) * (2 * n))
    return tensor.transpose(np.argsort(_interleave_axes(n))).reshape(2 ** n, 2 ** n).copy()


def identity_vector(n: int, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> StateVector:
    return vectorize(np.eye(2 ** n), basis)


def steady_state_vector(n: int, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> StateVector:
    """|ρ̃_s⟩ para ρ_s = I/2^N"""
    return identity_vector(n, basis) / 2 ** n


def boundary_states(n: int, basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> Tuple[StateVector, StateVector]:
    """(ψ_L, ψ_R) = (σᶻ_{2N-1}|Ĩ⟩, σᶻ_{2N-1}|ρ̃_s⟩), isto é vec(σᶻ_N) e vec(σᶻ_N ρ_s)."""
    z = np.diag([1.0, -1.0])
    sz = np.kron(np.eye(2 ** (n - 1)), z)
    psi_left = vectorize(sz, basis)
    return psi_left, psi_left / 2 ** n


# =============================================================================
# LIOUVILLIANO TRANSFORMADO COMO LISTA DE TERMOS
# =============================================================================
@dataclass(frozen=True)
class LiouvillianTerms:
    """𝓛̃ = Σ c·(palavra de Pauli na cadeia de 2N sítios) + shift·I"""
    terms: Tuple[PauliTerm, ...]
    shift: complex
    n_sites: int
    basis: VectorizationBasis = VectorizationBasis.PERMUTED
    labels: Tuple[str, ...] = field(default=())

    def to_operator(self) -> SparseOperator:
        return operator_from_terms(list(self.terms), self.n_sites, self.shift)

    def adjoint(self) -> 'LiouvillianTerms':
        # Palavras de Pauli são hermitianas: basta conjugar os coeficientes
        return LiouvillianTerms(tuple((np.conj(c), w) for c, w in self.terms),
                                np.conj(self.shift), self.n_sites, self.basis, self.labels)

    def coefficient_norm(self) -> float:
        """Σ|c| + |shift|, cota superior da norma de operador."""
        return float(sum(abs(c) for c, _ in self.terms) + abs(self.shift))

    def dump(self) -> List[str]:
        lines = []
        for coef, word in self.terms:
            pauli = " ".join(f"{label}{site + 1}" for label, site in word)
            lines.append(f"{complex(coef).real:+.6g}{complex(coef).imag:+.6g}j  {pauli}")
        lines.append(f"{complex(self.shift).real:+.6g}{complex(self.shift).imag:+.6g}j  I")
        return lines


def _transpose_sign(word: PauliWord) -> int:
    # Xᵀ = X, Zᵀ = Z, Yᵀ = -Y
    return (-1) ** sum(1 for label, _ in word if label == 'Y')


def build_transformed_liouvillian(p: ModelParams,
                                  basis: VectorizationBasis = VectorizationBasis.PERMUTED) -> LiouvillianTerms:
    """
    Regra -iH⊗I + iI⊗Hᵀ + Σ_l (L_l⊗L_l* - ½(L†L⊗I + I⊗LᵀL*)) aplicada termo a termo.
    Com L_l = √γσᶻ_l o anticomutador vira a constante -γN.
    """
    n = p.n_spins
    terms: List[PauliTerm] = []
    labels: List[str] = []

    def on_ket(word):
        return tuple((label, ket_site(l, n, basis)) for label, l in word)

    def on_bra(word):
        return tuple((label, bra_site(l, n, basis)) for label, l in word)

    if p.has_hamiltonian:
        for coef, word in hamiltonian_terms(p):
            terms.append((-1j * coef, on_ket(word)))
            terms.append((1j * coef * _transpose_sign(word), on_bra(word)))
            labels.extend(["H-ket", "H-bra"])
    if p.gamma > 0:
        for l in range(n):
            terms.append((complex(p.gamma), (('Z', ket_site(l, n, basis)), ('Z', bra_site(l, n, basis)))))
            labels.append("dissipator")

    terms = [(c, tuple(sorted(w, key=lambda item: item[1]))) for c, w in terms]
    logger.debug(f"𝓛̃ ({basis.value}): {len(terms)} termos em {2 * n} sítios")
    return LiouvillianTerms(tuple(terms), complex(-p.gamma * n), 2 * n, basis, tuple(labels))


def max_coupling_range(terms: LiouvillianTerms) -> int:
    """Maior distância entre sítios dentro de um mesmo termo (0 para termos de um sítio)."""
    ranges = [max(s for _, s in w) - min(s for _, s in w) for _, w in terms.terms if w]
    return max(ranges, default=0)
