# =============================================================================
# CONFIGURAÇÃO DE EXECUÇÃO (ARQUIVO TOML VALIDADO COM PYDANTIC)
# =============================================================================
# Um arquivo descreve um experimento completo. Chaves desconhecidas são
# rejeitadas e todo erro vira ConfigError (código de saída 2) com o caminho
# do campo ou a linha/coluna do TOML.

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import Settings
from model import ModelParams
from nhkpm import FrequencyGrid, KpmParams
from vectorize import VectorizationBasis

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    exit_code = 2

    def __init__(self, message: str, location: str = None):
        self.message = message
        self.location = location
        super().__init__(self.message)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    n_spins: int = Field(4, ge=1)
    Jx: float = 0.75
    Jy: float = 0.5
    Jz: float = 0.0
    B: float = 0.0
    gamma: float = Field(0.2, ge=0)

    @field_validator("n_spins")
    @classmethod
    def even_spins(cls, v):
        if v % 2:
            raise ValueError("n_spins deve ser par (pares de ligações Jx)")
        return v

    def to_params(self, **overrides) -> ModelParams:
        values = self.model_dump()
        values.update(overrides)
        return ModelParams(**values)


class VectorizationSection(_Section):
    basis: Literal["permuted", "naive"] = "permuted"

    @property
    def kind(self) -> VectorizationBasis:
        return VectorizationBasis(self.basis)


class KpmSection(_Section):
    n_moments: int = Field(1024, ge=Settings.MIN_MOMENTS)
    scale: Optional[float] = Field(None, gt=0)

    def to_params(self) -> KpmParams:
        return KpmParams(self.n_moments, self.scale)


class GridSection(_Section):
    re_min: float = -2.0
    re_max: float = 0.1
    im_min: float = -3.0
    im_max: float = 3.0
    n_re: int = Field(106, ge=3)
    n_im: int = Field(301, ge=3)

    @model_validator(mode="after")
    def ordered(self):
        if self.re_max <= self.re_min:
            raise ValueError("re_max deve exceder re_min")
        if self.im_max <= self.im_min:
            raise ValueError("im_max deve exceder im_min")
        return self

    def to_grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.re_min, self.re_max, self.im_min, self.im_max, self.n_re, self.n_im)


class BackendSection(_Section):
    kind: Literal["dense", "mps"] = "dense"
    workers: int = Field(Settings.DEFAULT_WORKERS, ge=1)


class MpsSection(_Section):
    max_bond: int = Field(Settings.DEFAULT_MAX_BOND, ge=1)
    cutoff: float = Field(Settings.DEFAULT_CUTOFF, ge=0)
    dump_bonds: bool = False


class TimesSection(_Section):
    t_max: float = Field(Settings.DEFAULT_T_MAX, ge=0)
    n_samples: int = Field(Settings.DEFAULT_N_SAMPLES, ge=1)


class GammaScanSection(_Section):
    gamma_min: float = Field(ge=0)
    gamma_max: float = Field(ge=0)
    n_points: int = Field(ge=1)

    @model_validator(mode="after")
    def ordered(self):
        if self.gamma_max < self.gamma_min:
            raise ValueError("gamma_max deve ser ≥ gamma_min")
        return self


class OutputSection(_Section):
    dir: str = "out"
    svg: bool = False


class OracleSection(_Section):
    rk4_step: float = Field(0.01, gt=0)
    overlay: List[Literal["ed", "rk4", "damping"]] = Field(default_factory=list)


class RunConfig(_Section):
    schema_version: Literal[1]
    model: ModelSection = Field(default_factory=ModelSection)
    vectorization: VectorizationSection = Field(default_factory=VectorizationSection)
    kpm: KpmSection = Field(default_factory=KpmSection)
    grid: GridSection = Field(default_factory=GridSection)
    backend: BackendSection = Field(default_factory=BackendSection)
    mps: MpsSection = Field(default_factory=MpsSection)
    times: TimesSection = Field(default_factory=TimesSection)
    gamma_scan: Optional[GammaScanSection] = None
    output: OutputSection = Field(default_factory=OutputSection)
    oracle: OracleSection = Field(default_factory=OracleSection)

    @model_validator(mode="after")
    def mps_needs_permuted(self):
        if self.backend.kind == "mps" and self.vectorization.basis != "permuted":
            raise ValueError("backend mps exige vectorization.basis = 'permuted' (alcance ≤ 2)")
        return self

    def output_dir(self) -> Path:
        return Path(Settings.output_dir(self.output.dir))


def _format_validation(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<raiz>"
        lines.append(f"{location}: {item['msg']}")
    return "; ".join(lines)


def parse_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]["loc"] if e.errors() else ()
        raise ConfigError(f"Configuração inválida: {_format_validation(e)}",
                          ".".join(str(p) for p in first)) from e


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Não foi possível ler {path}: {e}") from e
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        # a mensagem do tomllib já inclui linha e coluna
        raise ConfigError(f"{path}: TOML inválido: {e}") from e
    config = parse_run_config(data)
    logger.info(f"Configuração carregada de {path} (schema {config.schema_version})")
    return config


def apply_overrides(config: RunConfig, backend: Optional[str] = None, workers: Optional[int] = None,
                    svg: Optional[bool] = None) -> RunConfig:
    """Flags da linha de comando têm precedência sobre o arquivo."""
    data = config.model_dump()
    if backend is not None:
        data["backend"]["kind"] = backend
    if workers is not None:
        data["backend"]["workers"] = workers
    if svg:
        data["output"]["svg"] = True
    return parse_run_config(data)
