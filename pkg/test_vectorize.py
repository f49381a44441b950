from math import comb

import numpy as np
import pytest

from linalg_core import DimensionError
from model import ModelParams, apply_liouvillian
from vectorize import (VectorizationBasis, boundary_states, build_transformed_liouvillian, devectorize,
                       max_coupling_range, steady_state_vector, vectorize)

BASES = [VectorizationBasis.PERMUTED, VectorizationBasis.NAIVE]


def _random_matrix(dim, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


@pytest.mark.parametrize("basis", BASES)
def test_vetorizacao_inversivel_e_isometrica(basis):
    a, b = _random_matrix(8, 1), _random_matrix(8, 2)
    assert np.allclose(devectorize(vectorize(a, basis), basis), a)
    assert np.isclose(vectorize(a, basis).conj() @ vectorize(b, basis), np.trace(a.conj().T @ b))


def test_base_permutada_intercala_ket_e_bra():
    # ρ = |σ⟩⟨τ| com σ = (0, 1), τ = (1, 0): ordem permutada (σ0 τ0 σ1 τ1) = 0 1 1 0
    rho = np.zeros((4, 4))
    rho[0b01, 0b10] = 1.0
    vec = vectorize(rho, VectorizationBasis.PERMUTED)
    assert vec[0b0110] == 1.0
    assert np.count_nonzero(vec) == 1


def test_dimensao_invalida():
    with pytest.raises(DimensionError):
        vectorize(np.eye(3))


@pytest.mark.parametrize("basis", BASES)
@pytest.mark.parametrize("n", [2, 4])
def test_liouvilliano_vetorizado_equivale_ao_matricial(basis, n):
    p = ModelParams(n, Jx=0.75, Jy=0.5, Jz=0.4, B=0.13, gamma=0.2)
    op = build_transformed_liouvillian(p, basis).to_operator()
    for seed in range(3):
        rho = _random_matrix(2 ** n, seed)
        lhs = op @ vectorize(rho, basis)
        rhs = vectorize(apply_liouvillian(p, rho), basis)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize("basis", BASES)
def test_estado_estacionario_anulado(basis):
    p = ModelParams(4, B=0.25, gamma=0.2)
    op = build_transformed_liouvillian(p, basis).to_operator()
    assert np.max(np.abs(op @ steady_state_vector(4, basis))) < 1e-12


def test_estado_estacionario_de_um_spin():
    assert np.allclose(steady_state_vector(1), [0.5, 0, 0, 0.5])


@pytest.mark.parametrize("basis", BASES)
def test_estados_de_borda_normalizados(basis):
    psi_left, psi_right = boundary_states(4, basis)
    assert np.isclose(psi_left.conj() @ psi_right, 1.0)


def test_alcance_dos_acoplamentos():
    p = ModelParams(4, Jz=0.6, B=0.1)
    assert max_coupling_range(build_transformed_liouvillian(p, VectorizationBasis.PERMUTED)) == 2
    assert max_coupling_range(build_transformed_liouvillian(p, VectorizationBasis.NAIVE)) > 2


def test_termos_e_deslocamento():
    p = ModelParams(2, Jx=0.75, gamma=0.2, Jy=0.0)
    terms = build_transformed_liouvillian(p)
    # ket e bra do XX mais dois dissipadores
    assert len(terms.terms) == 4
    assert terms.shift == pytest.approx(-0.4)
    assert terms.coefficient_norm() == pytest.approx(0.75 * 2 + 0.2 * 2 + 0.4)
    lines = terms.dump()
    assert len(lines) == 5
    assert lines[-1].endswith(" I")
    assert np.allclose(terms.adjoint().to_operator().to_dense(), terms.to_operator().to_dense().conj().T)


@pytest.mark.parametrize("n", [2, 4])
def test_espectro_so_defasagem(n):
    # H = 0: |σ⟩⟨τ| decai com -2γ por sítio em que ket e bra diferem
    p = ModelParams(n, Jx=0.0, Jy=0.0, Jz=0.0, B=0.0, gamma=0.3)
    mat = build_transformed_liouvillian(p).to_operator().to_dense()
    assert np.allclose(mat, np.diag(np.diag(mat)))
    expected = [-2 * p.gamma * k for k in range(n + 1) for _ in range(comb(n, k) * 2 ** n)]
    assert np.allclose(np.sort(np.diag(mat).real), np.sort(expected))
    assert np.allclose(np.diag(mat).imag, 0.0)


def test_bases_tem_o_mesmo_espectro():
    p = ModelParams(2, Jx=0.75, Jy=0.5, Jz=0.4, B=0.13, gamma=0.2)
    spectra = [np.linalg.eigvals(build_transformed_liouvillian(p, basis).to_operator().to_dense())
               for basis in BASES]
    # cada autovalor de uma base tem um par na outra
    distance = np.abs(spectra[0][:, None] - spectra[1][None, :])
    assert np.max(distance.min(axis=1)) < 1e-8
    assert np.max(distance.min(axis=0)) < 1e-8
    assert np.isclose(spectra[0].sum(), spectra[1].sum())
