import numpy as np
import pytest

from model import (ModelError, ModelParams, apply_liouvillian, build_hamiltonian, hamiltonian_terms,
                   parity_operator, sigma_z, steady_states)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def _site_op(op, site, n):
    out = np.eye(1)
    for l in range(n):
        out = np.kron(out, op if l == site else np.eye(2))
    return out


def _dense_hamiltonian(p):
    n = p.n_spins
    h = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for l in range(0, n, 2):
        h -= p.Jx * _site_op(X, l, n) @ _site_op(X, l + 1, n)
    for l in range(1, n - 1, 2):
        h -= p.Jy * _site_op(Y, l, n) @ _site_op(Y, l + 1, n)
    for l in range(n):
        h += p.B * l * _site_op(Z, l, n)
    for l in range(n - 1):
        h += p.Jz * _site_op(Z, l, n) @ _site_op(Z, l + 1, n)
    return h


def _random_density(n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_sitio_zero_e_o_bit_mais_significativo():
    assert np.allclose(sigma_z(0, 2).to_dense().diagonal(), [1, 1, -1, -1])
    assert np.allclose(sigma_z(1, 2).to_dense().diagonal(), [1, -1, 1, -1])


def test_hamiltoniano_contra_produtos_de_kronecker():
    p = ModelParams(4, Jx=0.75, Jy=0.5, Jz=0.3, B=0.13, gamma=0.2)
    h = build_hamiltonian(p).to_dense()
    assert np.allclose(h, _dense_hamiltonian(p))
    assert np.allclose(h, h.conj().T)


def test_n_impar_rejeitado():
    with pytest.raises(ModelError) as info:
        ModelParams(3)
    assert info.value.field == "n_spins"
    with pytest.raises(ModelError):
        ModelParams(5, Jz=0.0, B=0.13)


def test_parametros_invalidos():
    with pytest.raises(ModelError):
        ModelParams(2, gamma=-0.1)
    with pytest.raises(ModelError):
        ModelParams(0)


def test_liouvilliano_contra_forma_de_lindblad():
    p = ModelParams(2, Jx=0.75, Jy=0.5, Jz=0.2, B=0.25, gamma=0.3)
    rho = _random_density(2)
    h = _dense_hamiltonian(p)
    expected = -1j * (h @ rho - rho @ h)
    for l in range(2):
        z = _site_op(Z, l, 2)
        expected += p.gamma * (z @ rho @ z - rho)
    assert np.allclose(apply_liouvillian(p, rho), expected)


def test_traco_e_hermiticidade_preservados():
    p = ModelParams(4, B=0.13, gamma=0.2)
    out = apply_liouvillian(p, _random_density(4, seed=5))
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T)


def test_estados_estacionarios():
    p = ModelParams(4, Jz=0.6, B=0.25)
    rho_plus, rho_minus = steady_states(4)
    assert np.isclose(np.trace(rho_plus + rho_minus), 1.0)
    assert np.max(np.abs(apply_liouvillian(p, rho_plus))) < 1e-14
    assert np.max(np.abs(apply_liouvillian(p, rho_minus))) < 1e-14
    q = parity_operator(4).to_dense()
    assert np.allclose(q @ q, np.eye(16))


@pytest.mark.parametrize("params", [ModelParams(4, B=0.13), ModelParams(4, Jz=0.6, B=0.25),
                                    ModelParams(6, Jx=1.0, Jy=0.3, B=0.1)])
def test_hamiltoniano_hermitiano_e_comuta_com_paridade(params):
    h = build_hamiltonian(params).to_dense()
    q = parity_operator(params.n_spins).to_dense()
    assert np.allclose(h, h.conj().T)
    assert np.max(np.abs(q @ h - h @ q)) < 1e-13
    # todo termo tem número par de σˣ/σʸ
    for _, word in hamiltonian_terms(params):
        assert sum(label in "XY" for label, _ in word) % 2 == 0


def test_liouvilliano_preserva_setor_de_paridade():
    p = ModelParams(4, Jz=0.4, B=0.13, gamma=0.2)
    q = parity_operator(4).to_dense()
    rho = _random_density(4, seed=3)
    # 𝓛 comuta com a superparidade ρ ↦ QρQ
    assert np.allclose(apply_liouvillian(p, q @ rho @ q), q @ apply_liouvillian(p, rho) @ q)
    # e preserva a hermiticidade: 𝓛[ρ†] = 𝓛[ρ]†
    a = np.random.default_rng(4).normal(size=(16, 16)) + 0j
    assert np.allclose(apply_liouvillian(p, a.conj().T), apply_liouvillian(p, a).conj().T)
