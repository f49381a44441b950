import numpy as np
import pytest

from linalg_core import (DimensionError, ResourceError, SparseOperator, eig_nonsymmetric, matvec,
                         truncated_svd, truncation_rank)


def _random_matrix(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_operador_nao_quadrado_rejeitado():
    with pytest.raises(DimensionError):
        SparseOperator.from_dense(np.ones((2, 3)))


def test_matvec_dimensao_incompativel():
    op = SparseOperator.identity(4)
    with pytest.raises(DimensionError) as info:
        matvec(op, np.ones(3))
    assert info.value.expected == 4
    assert info.value.got == 3


def test_matvec_em_lote():
    mat = _random_matrix(5)
    op = SparseOperator.from_dense(mat)
    block = _random_matrix(5, seed=1)[:, :3]
    assert np.allclose(op @ block, mat @ block)


def test_adjunto():
    mat = _random_matrix(4)
    assert np.allclose(SparseOperator.from_dense(mat).adjoint().to_dense(), mat.conj().T)


def test_autodecomposicao_biortonormal():
    mat = _random_matrix(6)
    dec = eig_nonsymmetric(mat)
    assert dec.reconstruction_ok
    assert np.allclose(dec.left.conj().T @ dec.right, np.eye(6), atol=1e-8)
    assert np.allclose(dec.reconstruct(), mat, atol=1e-8)
    assert np.allclose(np.linalg.norm(dec.right, axis=0), 1.0)


def test_autovalores_degenerados_diagonalizaveis():
    rng = np.random.default_rng(3)
    basis = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    mat = basis @ np.diag([1.0, 1.0, -0.5, 2.0]) @ np.linalg.inv(basis)
    dec = eig_nonsymmetric(mat)
    assert dec.biorthogonality_error < 1e-8
    assert np.allclose(dec.reconstruct(), mat, atol=1e-8)


def test_pesos_de_polo_somam_sobreposicao():
    mat = _random_matrix(5, seed=7)
    dec = eig_nonsymmetric(SparseOperator.from_dense(mat))
    rng = np.random.default_rng(8)
    psi_l = rng.normal(size=5) + 0j
    psi_r = rng.normal(size=5) + 0j
    assert np.isclose(dec.pole_weights(psi_l, psi_r).sum(), psi_l.conj() @ psi_r)


def test_limite_denso():
    with pytest.raises(ResourceError):
        eig_nonsymmetric(np.eye(8), dense_limit=4)


def test_posto_de_truncamento():
    s = np.array([1.0, 0.1, 1e-3])
    assert truncation_rank(s, cutoff=0.05) == 2
    assert truncation_rank(s, max_rank=1, cutoff=0.0) == 1
    assert truncation_rank(np.zeros(3)) == 1


def test_svd_truncada_peso_descartado():
    mat = np.diag([3.0, 2.0, 1.0])
    u, s, v, discarded = truncated_svd(mat, max_rank=2)
    assert s.tolist() == [3.0, 2.0]
    assert discarded == pytest.approx(1.0 / 14.0)
    assert np.allclose(u @ np.diag(s) @ v.conj().T, np.diag([3.0, 2.0, 0.0]))


def test_limiar_de_truncamento_e_relativo():
    s = np.array([1.0, 0.1, 1e-3])
    # invariante sob reescala: o corte compara com a norma total
    for factor in (1e-6, 1.0, 1e6):
        assert truncation_rank(factor * s, cutoff=0.05) == 2
        assert truncation_rank(factor * s, cutoff=2e-3) == 2
        assert truncation_rank(factor * s, cutoff=5e-4) == 3


@pytest.mark.parametrize("k", [1, 2, 3])
def test_svd_truncada_e_a_melhor_aproximacao(k):
    rng = np.random.default_rng(7)
    mat = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
    u, s, v, discarded = truncated_svd(mat, max_rank=k)
    full = np.linalg.svd(mat, compute_uv=False)
    approx = u @ np.diag(s) @ v.conj().T
    # Eckart-Young: erro de Frobenius é a cauda dos valores singulares
    assert np.linalg.norm(mat - approx) == pytest.approx(np.sqrt(np.sum(full[k:] ** 2)), rel=1e-10)
    assert discarded == pytest.approx(np.sum(full[k:] ** 2) / np.sum(full ** 2), rel=1e-10)
    assert np.allclose(u.conj().T @ u, np.eye(k))
    assert np.allclose(v.conj().T @ v, np.eye(k))
