import numpy as np
import pytest

from model import ModelParams
from nhkpm import DenseBackend, FrequencyGrid, KpmParams, SpectralMap, dbar_map, smoothed_inverse, spectral_map
from observables import (ProjectedCorrelator, TimeSeries, autocorrelator, decay_rate, extract_relaxation_rate,
                         project_map, projected_correlator, region_weight, time_axis)
from oracles import ed_autocorrelator, ed_relaxation_rate, ed_spectrum
from vectorize import boundary_states, build_transformed_liouvillian


def _gaussian(x, center, width, weight):
    return weight * np.exp(-0.5 * ((x - center) / width) ** 2) / (np.sqrt(2 * np.pi) * width)


def test_eixo_de_tempo():
    assert time_axis(0.0, 50).tolist() == [0.0]
    axis = time_axis(2.0, 5)
    assert axis.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        time_axis(-1.0, 5)


def test_serie_exige_tempos_crescentes():
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 2.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 1.0]), np.zeros(3))


def test_taxa_de_decaimento():
    t = np.linspace(0, 10, 101)
    series = TimeSeries(t, 2.0 * np.exp(-0.3 * t) * (1 + 0j))
    assert decay_rate(series) == pytest.approx(0.3)


def test_residuo_imaginario():
    series = TimeSeries(np.array([0.0, 1.0]), np.array([1.0 + 0.01j, 0.5]))
    assert series.imag_residue() == pytest.approx(0.01 / abs(1.0 + 0.01j))


# =============================================================================
# DETECÇÃO DE Δ
# =============================================================================
def test_pico_do_estado_estacionario_descartado():
    x = np.linspace(-1.0, 0.1, 111)
    values = _gaussian(x, 0.0, 0.03, 1e-5) + _gaussian(x, -0.4, 0.05, 0.8)
    rate = extract_relaxation_rate(ProjectedCorrelator(x, values))
    assert rate.found
    assert rate.delta == pytest.approx(0.4, abs=0.01)


def test_pico_em_zero_com_peso_mantido():
    x = np.linspace(-1.0, 0.1, 111)
    values = _gaussian(x, 0.0, 0.03, 0.5) + _gaussian(x, -0.4, 0.05, 0.5)
    rate = extract_relaxation_rate(ProjectedCorrelator(x, values))
    assert rate.found
    assert rate.delta < 0.02


def test_sem_picos():
    x = np.linspace(-1.0, 0.1, 50)
    rate = extract_relaxation_rate(ProjectedCorrelator(x, np.zeros(50)))
    assert not rate.found
    assert rate.summary()["delta"] is None


def test_projecao_soma_colunas():
    grid = FrequencyGrid(-1.0, 0.0, -1.0, 1.0, 5, 9)
    values = np.zeros(grid.shape, dtype=complex)
    values[1:-1, 1:-1] = 1.0
    smap = SpectralMap(grid, values, np.zeros(grid.shape, dtype=complex), grid.interior_mask(),
                       KpmParams(64, scale=2.0), "dense")
    cp = project_map(smap)
    assert cp.gammas.tolist() == grid.re_axis[1:-1].tolist()
    assert np.allclose(cp.values, 7 * grid.d_im)
    assert cp.imag_residue == 0.0
    assert region_weight(smap, complex(-0.5, 0.0), 10.0) == pytest.approx(3 * 7 * grid.area_element)


# =============================================================================
# MAPAS SINTÉTICOS DE POLOS ISOLADOS
# =============================================================================
def _pole_map(grid, poles, scale, n_moments):
    """G(ω) = Σ w·(1/d)_J com d = ω - λ, o mesmo inverso suavizado da expansão de Chebyshev."""
    omegas = grid.omegas()
    greens = np.zeros(grid.shape, dtype=complex)
    for center, weight in poles:
        d = omegas - center
        r = np.abs(d)
        phase = np.divide(np.conj(d), r, out=np.zeros_like(d), where=r > 0)
        greens += weight * phase * smoothed_inverse(r / scale, n_moments) / scale
    values, valid = dbar_map(grid, greens)
    return SpectralMap(grid, values, greens, valid, KpmParams(n_moments, scale=scale), "sintetico",
                       expected_weight=sum(w for _, w in poles))


def test_polo_unico_reconstroi_exponencial():
    center, weight = complex(-0.3, 0.5), 0.4 - 0.1j
    grid = FrequencyGrid(-0.8, 0.2, 0.0, 1.0, 251, 251)
    smap = _pole_map(grid, [(center, weight)], scale=4.0, n_moments=2048)
    times = np.linspace(0.0, 4.0, 21)
    series = autocorrelator(smap, times)
    assert series.metadata["coverage_ok"]
    assert np.max(np.abs(series.values - weight * np.exp(center * times))) < 5e-3


def test_polo_unico_um_pico_apesar_do_anel_negativo():
    center, weight = complex(-0.5, 0.2), 1.0 + 0.0j
    grid = FrequencyGrid(-1.0, 0.1, -0.4, 0.8, 111, 121)
    smap = _pole_map(grid, [(center, weight)], scale=8.0, n_moments=1024)
    rate = extract_relaxation_rate(smap)
    assert rate.found and rate.method == "spectral-map"
    assert len(rate.peak_positions) == 1
    assert abs(rate.peak_positions[0] - center) < 0.5 * grid.d_re
    assert rate.delta == pytest.approx(0.5, abs=0.005)
    assert rate.peak_weights[0].real > 0.5


def test_polo_real_entre_par_complexo_mais_forte():
    # na projeção o polo real vira um ombro do par; no plano eles ficam separados em Im
    real_pole = (complex(-0.533, 0.0), 0.12 + 0.0j)
    pair = [(complex(-0.6355, 1.04), 0.3 + 0.15j), (complex(-0.6355, -1.04), 0.3 - 0.15j)]
    grid = FrequencyGrid(-0.9, 0.1, -1.3, 1.3, 101, 261)
    smap = _pole_map(grid, [real_pole] + pair, scale=8.0, n_moments=1024)
    rate = extract_relaxation_rate(smap)
    assert rate.found
    assert rate.delta == pytest.approx(0.533, abs=0.005)
    assert len(rate.peak_positions) == 3
    assert abs(rate.peak_positions[0].imag) < grid.d_im
    assert np.allclose(np.sort(rate.peak_positions[1:].imag), [-1.04, 1.04], atol=grid.d_im)
    assert np.allclose(rate.peak_positions[1:].real, -0.6355, atol=grid.d_re)


def test_polo_em_zero_com_peso_pequeno_descartado_no_mapa():
    poles = [(0j, 5e-4 + 0j), (complex(-0.4, 0.0), 0.02 + 0j), (complex(-0.7, 0.5), 1.0 + 0j)]
    grid = FrequencyGrid(-1.0, 0.2, -0.3, 0.8, 121, 111)
    rate = extract_relaxation_rate(_pole_map(grid, poles, scale=8.0, n_moments=1024))
    assert rate.found
    assert rate.delta == pytest.approx(0.4, abs=0.005)
    assert np.all(np.abs(rate.peak_positions) > 0.1)


# =============================================================================
# CONTRA DIAGONALIZAÇÃO EXATA
# =============================================================================
@pytest.fixture(scope="module")
def setup_n2():
    p = ModelParams(2, Jx=0.75, gamma=0.2)
    terms = build_transformed_liouvillian(p)
    psi_left, psi_right = boundary_states(2)
    return p, DenseBackend(terms), psi_left, psi_right


@pytest.mark.slow
def test_autocorrelador_contra_ed(setup_n2):
    p, backend, psi_left, psi_right = setup_n2
    grid = FrequencyGrid(-1.5, 0.5, -3.0, 3.0, 81, 121)
    smap = spectral_map(grid, backend, psi_left, psi_right, KpmParams(1024))
    times = np.linspace(0.0, 2.0, 21)
    series = autocorrelator(smap, times)
    exact = ed_autocorrelator(p, times)
    assert series.metadata["coverage_ok"]
    assert series.values[0] == pytest.approx(1.0, abs=2e-2)
    assert np.max(np.abs(series.values - exact.values)) < 5e-2
    assert series.metadata["imag_residue"] < 1e-3


@pytest.mark.slow
def test_correlador_projetado_encontra_delta(setup_n2):
    p, backend, psi_left, psi_right = setup_n2
    gammas = np.linspace(-1.2, 0.1, 66)
    cp = projected_correlator(backend, psi_left, psi_right, gammas, KpmParams(1024), (-3.0, 3.0), 241)
    assert cp.gammas.size == gammas.size
    assert np.allclose(cp.gammas, gammas)
    rate = extract_relaxation_rate(cp)
    assert rate.found
    # N=2 com Jx apenas: polos relevantes em Re ω = -2γ
    assert rate.delta == pytest.approx(2 * p.gamma, abs=0.05)


# =============================================================================
# PIPELINE N=4 CONTRA ED
# =============================================================================
N4_GRID = FrequencyGrid(-2.0, 0.1, -4.0, 4.0, 54, 201)


@pytest.fixture(scope="module")
def n4_maps():
    cache = {}

    def _map(B):
        if B not in cache:
            p = ModelParams(4, Jx=0.75, Jy=0.5, B=B, gamma=0.2)
            psi_left, psi_right = boundary_states(4)
            backend = DenseBackend(build_transformed_liouvillian(p))
            cache[B] = p, spectral_map(N4_GRID, backend, psi_left, psi_right, KpmParams(1024))
        return cache[B]

    return _map


@pytest.mark.slow
@pytest.mark.parametrize("B, published", [(0.0, 0.52), (0.13, 0.53), (0.25, 0.34)])
def test_delta_do_mapa_contra_ed(n4_maps, B, published):
    p, smap = n4_maps(B)
    rate = extract_relaxation_rate(smap)
    exact = ed_relaxation_rate(p)
    assert rate.found and exact.found
    assert rate.delta == pytest.approx(exact.delta, abs=0.02)
    assert rate.delta == pytest.approx(published, abs=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("B", [0.0, 0.13, 0.25])
def test_autocorrelador_n4_contra_ed(n4_maps, B):
    p, smap = n4_maps(B)
    times = np.linspace(0.0, 20.0, 201)
    series = autocorrelator(smap, times)
    exact = ed_autocorrelator(p, times)
    assert series.metadata["coverage_ok"]
    assert series.values[0] == pytest.approx(1.0, abs=0.02)
    assert np.max(np.abs(series.values - exact.values)) <= 0.02


@pytest.mark.slow
def test_peso_de_disco_contra_pesos_de_ed(setup_n2):
    p, backend, psi_left, psi_right = setup_n2
    grid = FrequencyGrid(-1.5, 0.5, -3.0, 3.0, 81, 121)
    smap = spectral_map(grid, backend, psi_left, psi_right, KpmParams(1024))
    spectrum = ed_spectrum(p)
    poles = spectrum.eigenvalues[np.abs(spectrum.weights) > 1e-3]
    for pole in poles:
        others = np.abs(spectrum.eigenvalues - pole)
        gap = others[others > 1e-3].min(initial=1.0)
        radius = min(0.3, 0.5 * gap)
        expected = spectrum.weights[others <= radius].sum()
        measured = region_weight(smap, pole, radius)
        assert abs(measured - expected) <= 0.02 + 0.05 * abs(expected)
