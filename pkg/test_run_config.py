import pytest

from config import Settings
from run_config import ConfigError, apply_overrides, load_run_config, parse_run_config
from vectorize import VectorizationBasis


def test_padroes_com_arquivo_minimo():
    config = parse_run_config({"schema_version": 1})
    assert config.model.n_spins == 4
    assert config.kpm.n_moments == 1024
    assert config.vectorization.kind == VectorizationBasis.PERMUTED
    assert config.grid.to_grid().shape == (106, 301)
    assert config.gamma_scan is None


def test_versao_de_schema_obrigatoria():
    with pytest.raises(ConfigError):
        parse_run_config({})
    with pytest.raises(ConfigError):
        parse_run_config({"schema_version": 2})


def test_chave_desconhecida():
    with pytest.raises(ConfigError) as info:
        parse_run_config({"schema_version": 1, "model": {"n_spin": 4}})
    assert "n_spin" in info.value.message


def test_n_impar_rejeitado_com_local():
    with pytest.raises(ConfigError) as info:
        parse_run_config({"schema_version": 1, "model": {"n_spins": 3}})
    assert info.value.location == "model.n_spins"


def test_grade_pequena_demais():
    with pytest.raises(ConfigError) as info:
        parse_run_config({"schema_version": 1, "grid": {"n_re": 2}})
    assert info.value.location == "grid.n_re"


def test_mps_exige_base_permutada():
    with pytest.raises(ConfigError):
        parse_run_config({"schema_version": 1, "backend": {"kind": "mps"},
                          "vectorization": {"basis": "naive"}})


def test_toml_invalido(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("schema_version = \n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_arquivo_ausente(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.toml")


def test_sobrescritas_da_linha_de_comando(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("schema_version = 1\n[model]\nn_spins = 2\nB = 0.13\n", encoding="utf-8")
    config = apply_overrides(load_run_config(path), backend="mps", workers=3, svg=True)
    assert config.backend.kind == "mps"
    assert config.backend.workers == 3
    assert config.output.svg
    assert config.model.to_params().B == 0.13
    assert config.model.to_params(gamma=0.7).gamma == 0.7


def test_diretorio_de_saida_do_ambiente(monkeypatch, tmp_path):
    config = parse_run_config({"schema_version": 1, "output": {"dir": "resultados"}})
    monkeypatch.delenv("NHKPM_OUTPUT_DIR", raising=False)
    monkeypatch.setattr(Settings, "OUTPUT_DIR", None)
    assert config.output_dir().name == "resultados"
    monkeypatch.setenv("NHKPM_OUTPUT_DIR", str(tmp_path))
    assert config.output_dir() == tmp_path
