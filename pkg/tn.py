# =============================================================================
# MOTOR DE REDES TENSORIAIS: MPS E MPO
# =============================================================================
# Convenções de índices
#   MPS: tensores (χ_esq, físico=2, χ_dir); bordas com dimensão 1
#   MPO: tensores (w_esq, saída=2, entrada=2, w_dir)
# O sítio 0 corresponde ao bit mais significativo do vetor denso.
# Cada MPS guarda um prefator escalar explícito (`scale`), de modo que
# combinações lineares da recursão de Chebyshev ficam exatas na aritmética
# dos coeficientes; os tensores em si ficam normalizados após a compressão.

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Settings
from linalg_core import DimensionError, ResourceError, truncated_svd
from model import PAULI
from vectorize import LiouvillianTerms, max_coupling_range

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatrixProductState:
    tensors: Tuple[np.ndarray, ...]
    scale: complex = 1.0
    canonical_center: Optional[int] = None
    max_bond: Optional[int] = None
    cutoff: float = 0.0
    truncation_error: float = 0.0

    def __post_init__(self):
        if not self.tensors:
            raise DimensionError("MPS sem sítios")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionError("Ligações de borda do MPS devem ter dimensão 1")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise DimensionError(f"Ligação {i} inconsistente: "
                                     f"{self.tensors[i].shape} x {self.tensors[i + 1].shape}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> List[int]:
        """Perfil (1, χ_1, ..., χ_{L-1}, 1)."""
        return [1] + [t.shape[2] for t in self.tensors]

    def to_dense(self) -> np.ndarray:
        psi = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return self.scale * psi.reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(max(inner(self, self).real, 0.0)))

    def with_scale(self, factor: complex) -> 'MatrixProductState':
        return replace(self, scale=self.scale * factor,
                       truncation_error=self.truncation_error * abs(factor))


@dataclass(frozen=True)
class MatrixProductOperator:
    tensors: Tuple[np.ndarray, ...]
    # cota superior de ‖W‖₂; None quando desconhecida
    norm_bound: Optional[float] = None

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> List[int]:
        return [1] + [w.shape[3] for w in self.tensors]

    def to_dense(self) -> np.ndarray:
        first = self.tensors[0]
        op = first[0]  # (saída, entrada, w)
        for w in self.tensors[1:]:
            op = np.einsum('oiw,wpqv->opiqv', op, w)
            o, p, i, q, v = op.shape
            op = op.reshape(o * p, i * q, v)
        return op[:, :, 0]

    def dagger(self) -> 'MatrixProductOperator':
        return MatrixProductOperator(tuple(w.conj().transpose(0, 2, 1, 3) for w in self.tensors),
                                     norm_bound=self.norm_bound)


# =============================================================================
# CONSTRUÇÃO DE MPS
# =============================================================================
def product_state(local_states: Sequence[np.ndarray]) -> MatrixProductState:
    tensors = tuple(np.asarray(v, dtype=np.complex128).reshape(1, 2, 1) for v in local_states)
    return MatrixProductState(tensors)


def mps_from_terms_product(pair_states: Sequence[np.ndarray]) -> MatrixProductState:
    """
    MPS exato de um produto de estados de dois sítios (pares 2l, 2l+1).
    Cada par é decomposto por SVD; o perfil de ligações fica (1, r, 1, r, ..., 1)
    com r o posto de Schmidt do par (2 para um par de Bell, 1 para um produto).
    """
    tensors = []
    for pair in pair_states:
        amplitudes = np.asarray(pair, dtype=np.complex128).reshape(2, 2)
        u, s, v, _ = truncated_svd(amplitudes)
        tensors.append(u.reshape(1, 2, -1))
        tensors.append((s[:, None] * v.conj().T).reshape(-1, 2, 1))
    return MatrixProductState(tuple(tensors))


def steady_state_mps(n: int) -> MatrixProductState:
    """|ρ̃_s⟩ = Π_l (|↑↑⟩ + |↓↓⟩)/2 na base permutada."""
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / 2
    return mps_from_terms_product([bell] * n)


def apply_local(mps: MatrixProductState, op: np.ndarray, site: int) -> MatrixProductState:
    """Aplica um operador de um sítio exatamente (sem compressão)."""
    tensors = list(mps.tensors)
    tensors[site] = np.einsum('op,lpr->lor', op, tensors[site])
    return replace(mps, tensors=tuple(tensors), canonical_center=None)


def boundary_mps(n: int) -> Tuple[MatrixProductState, MatrixProductState]:
    """(ψ_L, ψ_R) = (σᶻ_{2N-1}|Ĩ⟩, σᶻ_{2N-1}|ρ̃_s⟩) como MPS."""
    right = apply_local(steady_state_mps(n), PAULI['Z'], 2 * (n - 1))
    return right.with_scale(2 ** n), right


def from_dense(vec: np.ndarray, n_sites: int, max_bond: Optional[int] = None,
               cutoff: float = 0.0) -> MatrixProductState:
    """Decomposição sequencial por SVD (para testes e estados pequenos)."""
    vec = np.asarray(vec, dtype=np.complex128)
    if vec.shape != (2 ** n_sites,):
        raise DimensionError(f"Vetor de dimensão {vec.shape} não corresponde a {n_sites} sítios")
    norm = np.linalg.norm(vec)
    if norm == 0:
        return zero_mps(n_sites)
    rest = (vec / norm).reshape(1, -1)
    tensors = []
    for _ in range(n_sites - 1):
        left = rest.shape[0]
        u, s, v, _ = truncated_svd(rest.reshape(left * 2, -1), max_bond, cutoff)
        tensors.append(u.reshape(left, 2, -1))
        rest = s[:, None] * v.conj().T
    tensors.append(rest.reshape(-1, 2, 1))
    return MatrixProductState(tuple(tensors), scale=norm, max_bond=max_bond, cutoff=cutoff)


def zero_mps(n_sites: int) -> MatrixProductState:
    up = np.array([1.0, 0.0])
    return replace(product_state([up] * n_sites), scale=0.0)


# =============================================================================
# PRODUTO INTERNO, CANONIZAÇÃO E COMPRESSÃO
# =============================================================================
def inner(a: MatrixProductState, b: MatrixProductState) -> complex:
    """⟨a|b⟩ por contração exata da esquerda para a direita."""
    if a.n_sites != b.n_sites:
        raise DimensionError(f"Número de sítios diferente: {a.n_sites} vs {b.n_sites}")
    env = np.ones((1, 1), dtype=np.complex128)
    for ta, tb in zip(a.tensors, b.tensors):
        tmp = np.tensordot(env, tb, axes=(1, 0))                 # (x, p, w)
        env = np.tensordot(ta.conj(), tmp, axes=((0, 1), (0, 1)))  # (z, w)
    return complex(np.conj(a.scale) * b.scale * env[0, 0])


def _left_sweep_qr(tensors: List[np.ndarray], stop: int) -> None:
    for i in range(stop):
        l, p, r = tensors[i].shape
        q, rr = np.linalg.qr(tensors[i].reshape(l * p, r))
        tensors[i] = q.reshape(l, p, -1)
        tensors[i + 1] = np.tensordot(rr, tensors[i + 1], axes=(1, 0))


def _right_sweep_qr(tensors: List[np.ndarray], stop: int) -> None:
    for i in range(len(tensors) - 1, stop, -1):
        l, p, r = tensors[i].shape
        q, rr = np.linalg.qr(tensors[i].reshape(l, p * r).T)
        tensors[i] = q.T.reshape(-1, p, r)
        tensors[i - 1] = np.tensordot(tensors[i - 1], rr.T, axes=(2, 0))


def canonicalize(mps: MatrixProductState, center: int = 0) -> MatrixProductState:
    """Forma mista: sítios < center isometrias à esquerda, > center à direita."""
    if not 0 <= center < mps.n_sites:
        raise DimensionError(f"Centro {center} fora de [0, {mps.n_sites})")
    tensors = [t.astype(np.complex128) for t in mps.tensors]
    _left_sweep_qr(tensors, center)
    _right_sweep_qr(tensors, center)
    return replace(mps, tensors=tuple(tensors), canonical_center=center)


def compress(mps: MatrixProductState, max_bond: Optional[int] = None,
             cutoff: float = 0.0) -> MatrixProductState:
    """
    Compressão por varredura de SVD: canoniza à esquerda (QR, sem perda) e
    trunca da direita para a esquerda. Em cada ligação o peso quadrático
    descartado relativo fica ≤ cutoff² e a dimensão ≤ max_bond.
    A estimativa de erro acumulada soma, pela desigualdade triangular, o erro
    em norma 2 de cada truncamento.
    """
    tensors = [t.astype(np.complex128) for t in mps.tensors]
    _left_sweep_qr(tensors, len(tensors) - 1)
    norm = float(np.linalg.norm(tensors[-1]))
    if norm == 0.0 or mps.scale == 0:
        return replace(zero_mps(mps.n_sites), max_bond=max_bond, cutoff=cutoff)
    tensors[-1] = tensors[-1] / norm

    step_error = 0.0
    for i in range(len(tensors) - 1, 0, -1):
        l, p, r = tensors[i].shape
        u, s, v, discarded = truncated_svd(tensors[i].reshape(l, p * r), max_bond, cutoff)
        tensors[i] = v.conj().T.reshape(-1, p, r)
        tensors[i - 1] = np.tensordot(tensors[i - 1], u * s, axes=(2, 0))
        # norma descartada: ‖s_descartado‖ = ‖s_mantido‖·√(d/(1-d))
        if discarded > 0:
            step_error += np.sqrt(discarded / max(1.0 - discarded, 1e-300)) * float(np.linalg.norm(s))

    kept = float(np.linalg.norm(tensors[0]))
    tensors[0] = tensors[0] / kept
    absolute = abs(mps.scale) * norm
    logger.debug(f"Compressão: ligações {[t.shape[2] for t in tensors[:-1]]}, erro {absolute * step_error:.2e}")
    return MatrixProductState(tuple(tensors), scale=mps.scale * norm * kept, canonical_center=0,
                              max_bond=max_bond, cutoff=cutoff,
                              truncation_error=mps.truncation_error + absolute * step_error)


def linear_combination(coefficients: Sequence[complex], states: Sequence[MatrixProductState],
                       max_bond: Optional[int] = None, cutoff: float = 0.0) -> MatrixProductState:
    """Σ c_k |ψ_k⟩ por soma direta dos tensores seguida de compressão."""
    pairs = [(c, s) for c, s in zip(coefficients, states) if c != 0 and s.scale != 0]
    if not pairs:
        return zero_mps(states[0].n_sites)
    n_sites = pairs[0][1].n_sites
    if any(s.n_sites != n_sites for _, s in pairs):
        raise DimensionError("Combinação linear de MPS com números de sítios diferentes")
    inherited = sum(abs(c) * s.truncation_error for c, s in pairs)

    if n_sites == 1:
        tensor = sum(c * s.scale * s.tensors[0] for c, s in pairs)
        return MatrixProductState((tensor,), truncation_error=inherited)

    tensors = []
    for site in range(n_sites):
        blocks = [s.tensors[site] for _, s in pairs]
        if site == 0:
            tensor = np.concatenate([c * s.scale * b for (c, s), b in zip(pairs, blocks)], axis=2)
        elif site == n_sites - 1:
            tensor = np.concatenate(blocks, axis=0)
        else:
            lefts = [b.shape[0] for b in blocks]
            rights = [b.shape[2] for b in blocks]
            tensor = np.zeros((sum(lefts), 2, sum(rights)), dtype=np.complex128)
            lo, ro = 0, 0
            for b in blocks:
                tensor[lo:lo + b.shape[0], :, ro:ro + b.shape[2]] = b
                lo += b.shape[0]
                ro += b.shape[2]
        tensors.append(tensor)
    summed = MatrixProductState(tuple(tensors), truncation_error=inherited)
    return compress(summed, max_bond, cutoff)


# =============================================================================
# MPO: AUTÔMATO FINITO PARA TERMOS DE ALCANCE ≤ 2
# =============================================================================
_START, _DONE = 'start', 'done'


class MpoRangeError(ValueError):
    def __init__(self, message: str, coupling_range: int = None):
        self.message = message
        self.coupling_range = coupling_range
        super().__init__(self.message)


def mpo_from_terms(terms: LiouvillianTerms, max_range: int = 2) -> MatrixProductOperator:
    """
    MPO exato de Σ c·(palavra de Pauli) + shift·I.

    Os estados do autômato vivem nas ligações: 'start' (só identidades à
    esquerda), 'done' (termo já completo) e, para termos em andamento, a tupla
    dos operadores já colocados. Termos com o mesmo prefixo compartilham o
    canal; o coeficiente entra no último operador do termo.
    """
    coupling = max_coupling_range(terms)
    if coupling > max_range:
        raise MpoRangeError(f"Alcance de acoplamento {coupling} > {max_range}; "
                            f"a base ingênua não é suportada no caminho MPS", coupling)
    n_sites = terms.n_sites

    # chaves por ligação b = -1 .. L-1 (índice b+1)
    bonds: List[Dict] = []
    for b in range(-1, n_sites):
        if b == -1:
            bonds.append({_START: 0})
        elif b == n_sites - 1:
            bonds.append({_DONE: 0})
        else:
            bonds.append({_START: 0, _DONE: 1})
    entries: List[Dict[Tuple, np.ndarray]] = [dict() for _ in range(n_sites)]

    def key_index(b, key):
        return bonds[b + 1].setdefault(key, len(bonds[b + 1]))

    def put(site, left_key, right_key, op, accumulate):
        edge = (key_index(site - 1, left_key), key_index(site, right_key))
        if accumulate:
            entries[site][edge] = entries[site].get(edge, 0) + op
        else:
            entries[site][edge] = op

    for site in range(n_sites):
        if site < n_sites - 1:
            put(site, _START, _START, PAULI['I'], False)
        if site > 0:
            put(site, _DONE, _DONE, PAULI['I'], False)

    all_terms = list(terms.terms)
    if terms.shift != 0:
        all_terms.append((terms.shift, (('I', 0),)))
    for coef, word in all_terms:
        if coef == 0:
            continue
        ops = dict((site, label) for label, site in word)
        first, last = min(ops), max(ops)
        prefix: Tuple = ()
        for site in range(first, last + 1):
            label = ops.get(site, 'I')
            left_key = _START if site == first else prefix
            if site == last:
                put(site, left_key, _DONE, coef * PAULI[label], True)
            else:
                prefix = prefix + ((label, site),)
                put(site, left_key, prefix, PAULI[label], False)

    tensors = []
    for site in range(n_sites):
        w = np.zeros((len(bonds[site]), 2, 2, len(bonds[site + 1])), dtype=np.complex128)
        for (a, b), op in entries[site].items():
            w[a, :, :, b] += op
        tensors.append(w)
    # palavras de Pauli têm norma 1: Σ|c| + |shift| limita ‖W‖₂
    mpo = MatrixProductOperator(tuple(tensors), norm_bound=terms.coefficient_norm())
    logger.debug(f"MPO com ligações {mpo.bond_dimensions()}")
    return mpo


def identity_mpo(n_sites: int) -> MatrixProductOperator:
    return MatrixProductOperator(tuple(PAULI['I'].reshape(1, 2, 2, 1).copy() for _ in range(n_sites)),
                                 norm_bound=1.0)


def apply_mpo(mpo: MatrixProductOperator, mps: MatrixProductState,
              max_bond: Optional[int] = None, cutoff: float = 0.0,
              bond_budget: Optional[int] = None) -> MatrixProductState:
    """
    Produto exato MPO·MPS seguido de compressão por SVD.
    O erro herdado ε do MPS de entrada é propagado como ‖W‖·ε, com ‖W‖
    tomado de `norm_bound` (ou da norma densa quando a cota não é conhecida).
    """
    if mpo.n_sites != mps.n_sites:
        raise DimensionError(f"MPO com {mpo.n_sites} sítios, MPS com {mps.n_sites}")
    if mps.scale == 0:
        return mps
    inherited = 0.0
    if mps.truncation_error > 0:
        inherited = mps.truncation_error * operator_norm_bound(mpo)
    bond_budget = bond_budget or Settings.MAX_INTERMEDIATE_BOND
    tensors = []
    for site, (w, a) in enumerate(zip(mpo.tensors, mps.tensors)):
        wl, _, _, wr = w.shape
        l, _, r = a.shape
        if wl * l > bond_budget or wr * r > bond_budget:
            raise ResourceError(f"Ligação intermediária {max(wl * l, wr * r)} excede o orçamento "
                                f"{bond_budget} no sítio {site}", site=site)
        t = np.einsum('aopb,lpr->alobr', w, a).reshape(wl * l, 2, wr * r)
        tensors.append(t)
    product = MatrixProductState(tuple(tensors), scale=mps.scale, truncation_error=inherited)
    return compress(product, max_bond, cutoff)


def operator_norm_bound(mpo: MatrixProductOperator) -> float:
    if mpo.norm_bound is not None:
        return float(mpo.norm_bound)
    if 2 ** mpo.n_sites > Settings.DENSE_LIMIT:
        raise ResourceError(f"MPO de {mpo.n_sites} sítios sem cota de norma e grande demais para a norma densa")
    return float(np.linalg.norm(mpo.to_dense(), 2))


def bond_profile_rows(step: int, mps: MatrixProductState) -> List[Tuple[int, int, int]]:
    """Linhas (passo, sítio, ligação) para o CSV de diagnóstico."""
    return [(step, site, t.shape[2]) for site, t in enumerate(mps.tensors[:-1])]
