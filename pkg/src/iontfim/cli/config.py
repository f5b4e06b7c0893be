"""Run configuration: one experiment per YAML file, validated by pydantic.

Physical parameters of the spin protocols are dimensionless, in units of the
mean nearest-neighbour coupling ``J0`` (times are ``J0 t``). Trap and laser
parameters of ``modes`` and ``couplings`` runs are in MHz (cyclic), as on a
lab notebook, and converted to rad/s internally.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from scipy import constants

from ..errors import ConfigError
from ..ionchain import YB171_MASS

KINDS = ("modes", "couplings", "mbl", "pretherm", "dtc", "dtc-scan", "spectroscopy")
U64 = Annotated[int, Field(ge=0, le=2**64 - 1)]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TrapParams(StrictModel):
    axial_mhz: float = Field(0.5, gt=0)
    transverse_mhz: float = Field(4.5, gt=0)
    mass_amu: float = Field(YB171_MASS / constants.atomic_mass, gt=0)


class PropagatorParams(StrictModel):
    method: Literal["auto", "exact", "krylov"] = "auto"
    krylov_dim: int = Field(30, ge=2)
    tol: float = Field(1e-10, gt=0)
    steps_per_unit: float = Field(50.0, gt=0)


class CouplingSource(StrictModel):
    """Where ``J_ij`` comes from.

    ``trap``: mode-sum couplings with the beatnote bisected to the fitted
    ``alpha``; ``power_law``: ``1/|i-j|^alpha``; ``matrix``: given explicitly.
    All three are rescaled to unit mean nearest-neighbour coupling.
    """

    source: Literal["trap", "power_law", "matrix"] = "trap"
    trap: TrapParams = TrapParams()
    matrix: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _matrix_given(self):
        if (self.source == "matrix") != (self.matrix is not None):
            raise ValueError("matrix must be given exactly when source is 'matrix'")
        return self


class _Base(StrictModel):
    seed: U64 = 0


class _Chain(_Base):
    n: int = Field(ge=2, le=14)
    alpha: float = 1.0
    couplings: CouplingSource = CouplingSource()
    propagator: PropagatorParams = PropagatorParams()

    @model_validator(mode="after")
    def _matrix_size(self):
        m = self.couplings.matrix
        if m is not None and (len(m) != self.n or any(len(r) != self.n for r in m)):
            raise ValueError(f"couplings.matrix must be {self.n}x{self.n}")
        return self


class ModesConfig(_Base):
    kind: Literal["modes"] = "modes"
    n: int = Field(ge=1, le=200)
    trap: TrapParams = TrapParams()


class LightShift(StrictModel):
    g0_mhz: float
    delta_mhz: float
    delta2_mhz: float
    qubit_mhz: float = 12642.812118466


class CouplingsConfig(_Base):
    kind: Literal["couplings"] = "couplings"
    n: int = Field(ge=2, le=200)
    trap: TrapParams = TrapParams()
    rabi_mhz: float = Field(0.1, gt=0)
    beatnote_mhz: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = None
    light_shift: Optional[LightShift] = None

    @model_validator(mode="after")
    def _one_target(self):
        if (self.beatnote_mhz is None) == (self.alpha is None):
            raise ValueError("give exactly one of beatnote_mhz or alpha")
        return self


class MblConfig(_Chain):
    kind: Literal["mbl"] = "mbl"
    n: int = Field(10, ge=2, le=14)
    b_field: float = 4.0
    width: float = Field(ge=0)
    n_realizations: int = Field(30, ge=1)
    t_max: float = Field(10.0, gt=0)
    n_times: int = Field(101, ge=2)
    steady_from: float = 5.0
    shots: Optional[int] = Field(None, ge=1)


InitialState = Union[Literal["psi_L", "psi_R", "two_excitation"], List[int]]


class PrethermConfig(_Chain):
    kind: Literal["pretherm"] = "pretherm"
    n: int = Field(7, ge=2, le=14)
    b_field: float = 20.0
    initial: List[InitialState] = ["psi_L", "psi_R", "two_excitation"]
    t_max: float = Field(25.0, gt=0)
    n_times: int = Field(2501, ge=2)
    shots: Optional[int] = Field(None, ge=1)


class _Floquet(_Chain):
    n: int = Field(10, ge=2, le=14)
    alpha: float = 1.5
    g: float = Field(1.0, gt=0)
    width: float = Field(math.pi, ge=0)
    n_realizations: int = Field(10, ge=1)
    n_periods: int = Field(100, ge=2)

    @field_validator("n_periods")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("n_periods must be even")
        return v


class DtcConfig(_Floquet):
    kind: Literal["dtc"] = "dtc"
    epsilon: float
    t2: float = Field(ge=0)
    t1: Optional[float] = Field(None, ge=0)
    t3: Optional[float] = Field(None, ge=0)


class DtcScanConfig(_Floquet):
    kind: Literal["dtc-scan"] = "dtc-scan"
    epsilons: List[float] = Field(min_length=1)
    t2_values: List[float] = Field(min_length=1)


class ProbeGrid(StrictModel):
    start: float = Field(ge=0)
    stop: float
    step: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.stop > self.start + 2 * self.step:
            raise ValueError("probe grid needs stop > start + 2*step")
        return self

    def values(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)


class SpectroscopyConfig(_Chain):
    kind: Literal["spectroscopy"] = "spectroscopy"
    n: int = Field(4, ge=2, le=8)
    probe: ProbeGrid
    b0: float = 0.0
    bp: float = Field(0.05, gt=0)
    duration: Optional[float] = Field(None, gt=0)
    flipped: List[int] = []
    conditional: bool = False


MODELS = {
    "modes": ModesConfig,
    "couplings": CouplingsConfig,
    "mbl": MblConfig,
    "pretherm": PrethermConfig,
    "dtc": DtcConfig,
    "dtc-scan": DtcScanConfig,
    "spectroscopy": SpectroscopyConfig,
}

RunConfig = Union[ModesConfig, CouplingsConfig, MblConfig, PrethermConfig, DtcConfig, DtcScanConfig, SpectroscopyConfig]


def _describe(err: ValidationError) -> str:
    msgs = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        if e["type"] == "extra_forbidden":
            msgs.append(f"unknown key: {loc}")
        elif e["type"] == "missing":
            msgs.append(f"missing required: {loc}")
        else:
            msgs.append(f"invalid value for {loc or 'config'}: {e['msg']}")
    return "; ".join(msgs)


def parse_config(data: dict, kind: str | None = None) -> RunConfig:
    """Validate a mapping; ``kind`` (e.g. from the subcommand) must agree with the file if both are given."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    data = dict(data)
    file_kind = data.get("kind")
    if kind is not None and file_kind is not None and file_kind != kind:
        raise ConfigError(f"config kind {file_kind!r} does not match subcommand {kind!r}")
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("missing required: kind")
    if kind not in MODELS:
        raise ConfigError(f"invalid value for kind: {kind!r} (expected one of {', '.join(KINDS)})")
    data["kind"] = kind
    try:
        return MODELS[kind].model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from None


def load_config(path: str | Path, kind: str | None = None) -> RunConfig:
    """Read and validate a YAML config.

    Raises
    ------
    ConfigError
        With ``path:line:column`` for parse errors and the offending key for
        schema violations.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"{where}: YAML parse error: {problem}") from None
    return parse_config({} if data is None else data, kind)


def with_seed(config: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return config
    data = config.model_dump()
    data["seed"] = seed
    return parse_config(data)


def config_dict(config: RunConfig) -> dict:
    """Fully resolved config (defaults included) as plain data."""
    return config.model_dump(mode="json")


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config_dict(config), sort_keys=False)


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
