import numpy as np
import pytest

from model import ModelParams, build_hamiltonian
from oracles import (MajoranaQuadratic, OracleError, build_damping_matrix, damping_autocorrelator, damping_cross_check,
                     damping_relaxation_rate, damping_spectral_gap, ed_autocorrelator, ed_relaxation_rate, ed_spectrum,
                     majorana_hamiltonian, majorana_operators, rk4_autocorrelator)
from vectorize import VectorizationBasis

TIMES = np.linspace(0.0, 5.0, 26)


# =============================================================================
# DIAGONALIZAÇÃO EXATA
# =============================================================================
@pytest.mark.parametrize("basis", [VectorizationBasis.PERMUTED, VectorizationBasis.NAIVE])
def test_pesos_somam_um(basis):
    spectrum = ed_spectrum(ModelParams(2, B=0.13), basis)
    assert abs(spectrum.weights.sum() - 1.0) < 1e-8
    assert np.all(spectrum.eigenvalues.real <= 1e-10)


def test_bases_dao_o_mesmo_correlador():
    p = ModelParams(2, Jz=0.4, B=0.25)
    permuted = ed_autocorrelator(p, TIMES, ed_spectrum(p, VectorizationBasis.PERMUTED))
    naive = ed_autocorrelator(p, TIMES, ed_spectrum(p, VectorizationBasis.NAIVE))
    assert np.max(np.abs(permuted.values - naive.values)) < 1e-8


def test_taxa_ed_n2():
    p = ModelParams(2, Jx=0.75, gamma=0.2)
    rate = ed_relaxation_rate(p)
    assert rate.found
    assert rate.delta == pytest.approx(2 * p.gamma, abs=1e-8)


# =============================================================================
# RUNGE-KUTTA
# =============================================================================
def test_rk4_concorda_com_ed():
    p = ModelParams(2, B=0.13, gamma=0.2)
    series = rk4_autocorrelator(p, 0.01, 2.0)
    exact = ed_autocorrelator(p, series.times)
    assert np.max(np.abs(series.values - exact.values)) < 1e-6
    assert series.metadata["trace_drift"] < 1e-12
    assert series.metadata["hermiticity_drift"] < 1e-12


def test_rk4_amostragem():
    series = rk4_autocorrelator(ModelParams(2), 0.01, 1.0, sample_every=10)
    assert series.times.size == 11
    assert series.times[-1] == pytest.approx(1.0)


def test_rk4_ordem_de_convergencia():
    p = ModelParams(4, B=0.13, gamma=0.2)
    coarse = rk4_autocorrelator(p, 0.1, 2.0)
    fine = rk4_autocorrelator(p, 0.05, 2.0, sample_every=2)
    exact = ed_autocorrelator(p, coarse.times).values
    assert np.allclose(fine.times, coarse.times)
    ratio = np.max(np.abs(coarse.values - exact)) / np.max(np.abs(fine.values - exact))
    # erro global O(h⁴): meio passo divide o erro por ~16
    assert 10.0 < ratio < 22.0


def test_rk4_instavel():
    with pytest.raises(OracleError) as info:
        rk4_autocorrelator(ModelParams(2), 3.0, 60.0)
    assert info.value.suggested_step == pytest.approx(1.5)


# =============================================================================
# MATRIZ DE AMORTECIMENTO
# =============================================================================
def test_majoranas_anticomutam():
    gammas = majorana_operators(2)
    for j, a in enumerate(gammas):
        for k, b in enumerate(gammas):
            expected = 2 * np.eye(4) if j == k else np.zeros((4, 4))
            assert np.allclose(a @ b + b @ a, expected)


@pytest.mark.parametrize("n", [2, 4])
def test_jordan_wigner_reproduz_hamiltoniano(n):
    p = ModelParams(n, Jx=0.75, Jy=0.5, B=0.13, gamma=0.2)
    quadratic = MajoranaQuadratic(majorana_hamiltonian(p))
    assert np.allclose(quadratic.to_operator(), build_hamiltonian(p).to_dense())


def test_matriz_nao_antissimetrica():
    with pytest.raises(OracleError):
        MajoranaQuadratic(np.ones((4, 4)))


@pytest.mark.parametrize("params", [ModelParams(2, B=0.13), ModelParams(4, B=0.25, gamma=0.3)])
def test_amortecimento_concorda_com_ed(params):
    series, _ = damping_autocorrelator(params, TIMES)
    exact = ed_autocorrelator(params, TIMES)
    assert series.values[0] == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(series.values - exact.values)) < 1e-7


def test_amortecimento_estavel():
    damping = build_damping_matrix(ModelParams(6, B=0.13))
    assert damping.x.shape == (144, 144)
    assert np.max(damping.diagonalize().eigenvalues.real) <= 1e-10


def test_amortecimento_exige_jz_nulo():
    with pytest.raises(OracleError) as info:
        build_damping_matrix(ModelParams(4, Jz=0.5))
    assert info.value.exit_code == 2


def test_taxa_da_matriz_de_amortecimento():
    p = ModelParams(2, Jx=0.75, gamma=0.2)
    rate = damping_relaxation_rate(p)
    assert rate.found
    assert rate.delta == pytest.approx(ed_relaxation_rate(p).delta, abs=1e-8)


def test_residuos_da_matriz_de_amortecimento():
    damping = build_damping_matrix(ModelParams(4, B=0.13))
    assert damping.norm_residual < 1e-12
    assert damping.completeness_residual < 1e-6


def test_verificacao_cruzada_contra_ed():
    n_small, deviation = damping_cross_check(ModelParams(6, B=0.13))
    assert n_small == 4
    assert deviation < 1e-7


@pytest.mark.parametrize("B", [0.0, 0.13])
def test_gap_espectral_limita_taxa_ponderada(B):
    p = ModelParams(4, B=B)
    gap = damping_spectral_gap(p)
    assert gap <= damping_relaxation_rate(p).delta + 1e-8


@pytest.mark.slow
def test_cadeia_longa_sem_campo():
    p = ModelParams(20, B=0.0)
    damping = build_damping_matrix(p)
    assert damping_spectral_gap(p, damping) == pytest.approx(0.65, abs=0.02)
    # Δ ponderado por σᶻ_N fica acima do gap: os modos mais lentos não aparecem em C(t)
    assert damping_relaxation_rate(p).delta == pytest.approx(0.7125, abs=5e-3)


@pytest.mark.slow
def test_cadeia_longa_com_campo_fraco():
    assert damping_relaxation_rate(ModelParams(20, B=0.02)).delta == pytest.approx(0.47, abs=0.02)


# =============================================================================
# EFEITO ZENO
# =============================================================================
def test_taxa_sobe_e_depois_cai_com_gamma():
    deltas = [ed_relaxation_rate(ModelParams(4, B=0.0, gamma=g)).delta for g in (0.05, 0.2, 10.0)]
    assert deltas[1] == pytest.approx(0.5215, abs=5e-3)
    assert deltas[0] < deltas[1]
    assert deltas[2] < deltas[1]


@pytest.mark.slow
def test_ponto_critico_de_zeno():
    gammas = np.round(np.arange(0.3, 1.21, 0.05), 2)
    deltas = np.array([ed_relaxation_rate(ModelParams(4, B=0.0, gamma=g)).delta for g in gammas])
    assert gammas[np.argmax(deltas)] == pytest.approx(0.6, abs=0.1)
