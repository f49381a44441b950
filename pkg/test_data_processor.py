import json

import numpy as np
import pandas as pd
import pytest

from data_processor import SPECTRUM_COLUMNS, DataProcessor, RunReport
from nhkpm import FrequencyGrid, KpmParams, SpectralMap
from observables import TimeSeries


def _synthetic_map():
    grid = FrequencyGrid(-1.0, 0.0, -0.5, 0.5, 4, 3)
    omegas = grid.omegas()
    greens = 1.0 / (omegas - complex(-0.5, 0.0) + 0.3)
    values = np.zeros(grid.shape, dtype=complex)
    values[1:-1, 1:-1] = omegas[1:-1, 1:-1] ** 2
    return SpectralMap(grid, values, greens, grid.interior_mask(), KpmParams(64, scale=2.0), "dense")


def test_csv_do_mapa_com_im_lento_e_re_rapido(tmp_path):
    smap = _synthetic_map()
    path = DataProcessor.write_spectral_map(tmp_path / "spectrum.csv", smap)
    frame = pd.read_csv(path)
    assert list(frame.columns) == SPECTRUM_COLUMNS
    assert len(frame) == 12
    assert frame["im_omega"].iloc[0] == frame["im_omega"].iloc[3]
    assert frame["re_omega"].iloc[0] < frame["re_omega"].iloc[1]


def test_leitura_do_mapa(tmp_path):
    smap = _synthetic_map()
    path = DataProcessor.write_spectral_map(tmp_path / "spectrum.csv", smap)
    again = DataProcessor.read_spectral_map(path, KpmParams(64))
    assert again.grid.shape == smap.grid.shape
    assert np.allclose(again.values, smap.values)
    assert np.allclose(again.greens, smap.greens)
    assert again.total_weight() == pytest.approx(smap.total_weight())


def test_leitura_rejeita_colunas_ausentes(tmp_path):
    path = tmp_path / "broken.csv"
    pd.DataFrame({"re_omega": [0.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        DataProcessor.read_spectral_map(path, KpmParams(64))


def test_serie_com_sobreposicoes(tmp_path):
    t = np.linspace(0, 1, 5)
    series = TimeSeries(t, np.exp(-t))
    oracle = TimeSeries(t, np.exp(-t) + 1e-3)
    path = DataProcessor.write_time_series(tmp_path / "ct.csv", series, {"ed": oracle})
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "re_C", "im_C", "re_C_ed", "im_C_ed"]
    assert np.allclose(DataProcessor.read_time_series(path).values, series.values)


def test_relatorio_com_manifesto(tmp_path):
    smap = _synthetic_map()
    report = RunReport("spectrum", backend="dense")
    report.files.append(DataProcessor.write_spectral_map(tmp_path / "spectrum.csv", smap))
    report.add_check("realness", 1e-6, 1e-3, True)
    report.add_check("weight-coverage", 0.1, 0.03, False, gating=False)
    report.add_check("map-symmetry", 1e-2, 1e-6, False)
    report.diagnostics["scale"] = np.float64(2.0)
    report.diagnostics["weight"] = complex(1.0, 0.0)
    DataProcessor.write_report(tmp_path / "report.json", report)

    payload = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert payload["failed_checks"] == ["map-symmetry"]
    assert payload["files"][0]["file"] == "spectrum.csv"
    assert payload["files"][0]["sha256"] == DataProcessor.sha256(tmp_path / "spectrum.csv")
    assert payload["diagnostics"]["weight"] == {"re": 1.0, "im": 0.0}
    assert payload["diagnostics"]["scale"] == 2.0
