"""
Experiment Configuration
------------------------

Experiment configs are JSON files. Each one is validated against the pydantic
models below; unknown keys are errors and every problem is reported at once,
each message prefixed with the dotted key it refers to.
"""

import json
import logging
import os
from typing import Any, Dict, List, Literal, Mapping, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from kernels import Kernel, make_kernel
from numerics.CauchySolver import bump_field
from numerics.Errors import NlkppError
from numerics.NumericUtils import cosine_profile, is_power_of_two, log_grid
from numerics.Spectral import Field as GridField
from numerics.Spectral import Grid

OUTPUT_ENV = "NLKPP_OUT"
KERNEL_PARAMETERS = {
    "gaussian": ("s",),
    "top_hat": ("a",),
    "phi_beta": ("beta",),
    "dirac_pair": ("shift",),
    "tabulated": ("period",),
}


class ConfigValidationError(NlkppError, ValueError):
    """Every validation problem of one config, not just the first"""

    def __init__(self, messages: List[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(messages))
        self.messages = list(messages)


def _power_of_two(n: int) -> int:
    if n < 8 or not is_power_of_two(n):
        raise ValueError(f"must be a power of two >= 8, got {n}")
    return n


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KernelSpec(StrictModel):
    family: Literal["gaussian", "top_hat", "phi_beta", "dirac_pair", "tabulated"]
    s: Optional[PositiveFloat] = None
    a: Optional[PositiveFloat] = None
    beta: Optional[float] = None
    shift: Optional[PositiveFloat] = None
    period: Optional[PositiveFloat] = None
    values: Optional[List[float]] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def check_parameters(self):
        required = KERNEL_PARAMETERS[self.family]
        given = {name for name in ("s", "a", "beta", "shift", "period", "values", "file") if getattr(self, name) is not None}
        allowed = set(required) | ({"values", "file"} if self.family == "tabulated" else set())
        problems = [f"missing parameter '{name}' for {self.family}" for name in required if name not in given]
        problems += [f"parameter '{name}' does not apply to {self.family}" for name in sorted(given - allowed)]
        if self.family == "tabulated" and len(given & {"values", "file"}) != 1:
            problems.append("tabulated kernel needs exactly one of 'values' or 'file'")
        if self.family == "phi_beta" and self.beta is not None and not self.beta > 1.0:
            problems.append(f"'beta' must exceed 1, got {self.beta}")
        if self.file is not None and not os.path.exists(self.file):
            problems.append(f"'file' does not exist: {self.file}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def to_kernel(self) -> Kernel:
        spec: Dict[str, Any] = {"family": self.family}
        for name in KERNEL_PARAMETERS[self.family]:
            spec[name] = getattr(self, name)
        if self.family == "tabulated":
            spec["values"] = self.values if self.values is not None else np.loadtxt(self.file, delimiter=",", ndmin=1)
        return make_kernel(spec)


class GridSpec(StrictModel):
    period: PositiveFloat
    n: int

    @field_validator("n")
    @classmethod
    def check_n(cls, n: int) -> int:
        return _power_of_two(n)

    def to_grid(self) -> Grid:
        return Grid(self.period, self.n)


class MuRange(StrictModel):
    start: PositiveFloat
    stop: PositiveFloat
    points: PositiveInt = 5
    spacing: Literal["linear", "log"] = "linear"

    def values(self) -> List[float]:
        if self.points == 1:
            return [float(self.start)]
        if self.spacing == "log":
            return [float(mu) for mu in log_grid(self.start, self.stop, self.points)]
        return [float(mu) for mu in np.linspace(self.start, self.stop, self.points)]


class InitialSpec(StrictModel):
    kind: Literal["constant", "bump", "cosine", "file"]
    value: Optional[float] = Field(default=None, ge=0.0)
    center: float = 0.0
    width: PositiveFloat = 2.0
    height: PositiveFloat = 1.0
    mean: float = 1.0
    amplitude: float = 0.05
    mode: PositiveInt = 1
    path: Optional[str] = None

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == "constant" and self.value is None:
            raise ValueError("constant initial condition needs 'value'")
        if self.kind == "cosine" and not self.mean - abs(self.amplitude) >= 0.0:
            raise ValueError("cosine initial condition must be nonnegative (mean >= |amplitude|)")
        if self.kind == "file":
            if self.path is None:
                raise ValueError("file initial condition needs 'path'")
            if not os.path.exists(self.path):
                raise ValueError(f"'path' does not exist: {self.path}")
        return self

    def to_field(self, grid: Grid) -> GridField:
        if self.kind == "constant":
            return GridField.constant(grid, self.value)
        if self.kind == "bump":
            return bump_field(grid, self.center, self.width, self.height)
        if self.kind == "cosine":
            return GridField(grid, cosine_profile(grid.nodes, grid.period, self.mean, self.amplitude, self.mode))
        return load_field(self.path, grid)


class IntegrationSpec(StrictModel):
    T: PositiveFloat = 10.0
    dt: Optional[PositiveFloat] = None
    record_every: PositiveInt = 1
    scheme: Literal["imex1", "strang", "etdrk4"] = "imex1"


class StabilityBlock(StrictModel):
    L: PositiveFloat
    k_max: PositiveInt = 64
    numeric_n: Optional[int] = None

    @field_validator("numeric_n")
    @classmethod
    def check_numeric_n(cls, n: Optional[int]) -> Optional[int]:
        return None if n is None else _power_of_two(n)


class SteadyBlock(StrictModel):
    L: PositiveFloat
    n: int = 128
    k0: Optional[PositiveInt] = None
    k_max: PositiveInt = 64
    mu_factor: PositiveFloat = 1.5
    seed_amplitude: PositiveFloat = 0.05
    deflate: Optional[bool] = None
    continuation_to: Optional[PositiveFloat] = None
    continuation_steps: int = Field(default=5, ge=2)
    stationarity_T: Optional[PositiveFloat] = None
    stationarity_dt: Optional[PositiveFloat] = None

    @field_validator("n")
    @classmethod
    def check_n(cls, n: int) -> int:
        return _power_of_two(n)


class SpreadBlock(StrictModel):
    T: PositiveFloat = 60.0
    levels: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.01])
    max_spacing: PositiveFloat = 0.125
    bump_width: PositiveFloat = 2.0
    bump_height: PositiveFloat = 1.0
    record_interval: PositiveFloat = 0.25
    t_min: Optional[PositiveFloat] = None
    dt: Optional[PositiveFloat] = None
    scheme: Literal["imex1", "strang", "etdrk4"] = "imex1"

    @field_validator("levels")
    @classmethod
    def check_levels(cls, levels: List[float]) -> List[float]:
        if not levels or any(not level > 0.0 for level in levels):
            raise ValueError("levels must be a non-empty list of positive numbers")
        return levels


class CounterexampleBlock(StrictModel):
    rho: float = Field(default=0.1, gt=0.0, lt=1.0)
    T: PositiveFloat = 20.0
    n: int = 64
    dt: PositiveFloat = 1e-3

    @field_validator("n")
    @classmethod
    def check_n(cls, n: int) -> int:
        return _power_of_two(n)


class SweepBlock(StrictModel):
    base: Literal["stability", "steady", "evolve", "spread", "counterexample"]
    jobs: PositiveInt = 1


class ExperimentConfig(StrictModel):
    kind: Literal["kernel-report", "stability", "steady", "evolve", "spread", "counterexample", "sweep"]
    name: str = "experiment"
    kernel: KernelSpec
    grid: Optional[GridSpec] = None
    mu: Optional[PositiveFloat] = None
    mu_range: Optional[MuRange] = None
    initial: Optional[InitialSpec] = None
    integration: IntegrationSpec = Field(default_factory=IntegrationSpec)
    stability: Optional[StabilityBlock] = None
    steady: Optional[SteadyBlock] = None
    spread: SpreadBlock = Field(default_factory=SpreadBlock)
    counterexample: CounterexampleBlock = Field(default_factory=CounterexampleBlock)
    sweep: Optional[SweepBlock] = None
    output_dir: str = "out"

    @model_validator(mode="after")
    def check_kind_requirements(self):
        kind = self.base_kind
        problems = []
        if self.kind == "sweep":
            if self.sweep is None:
                problems.append("sweep: required for kind 'sweep'")
            if self.mu_range is None:
                problems.append("mu_range: required for kind 'sweep'")
        if kind == "evolve":
            for key in ("grid", "initial"):
                if getattr(self, key) is None:
                    problems.append(f"{key}: required for kind 'evolve'")
        if kind in ("evolve", "spread", "counterexample") and self.mu is None and self.kind != "sweep":
            problems.append(f"mu: required for kind '{kind}'")
        if kind == "stability" and self.stability is None:
            problems.append("stability: required for kind 'stability'")
        if kind == "steady" and self.steady is None:
            problems.append("steady: required for kind 'steady'")
        if kind == "counterexample" and self.kernel.family != "dirac_pair":
            problems.append(f"kernel.family: counterexample requires 'dirac_pair', got '{self.kernel.family}'")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def base_kind(self) -> str:
        return self.sweep.base if self.kind == "sweep" and self.sweep is not None else self.kind

    def mu_values(self) -> List[float]:
        if self.mu_range is not None:
            return self.mu_range.values()
        return [float(self.mu)] if self.mu is not None else []


def load_field(path: str, grid: Optional[Grid] = None) -> GridField:
    """Read a binary Field snapshot or a CSV with columns x,u (header line allowed)."""
    if path.endswith(".csv"):
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if grid is None:
            raise ValueError(f"a grid is needed to read the CSV field {path}")
        field = GridField(grid, table[:, 1])
    else:
        with open(path, "rb") as f:
            field = GridField.from_bytes(f.read())
    if grid is not None and field.grid != grid:
        raise ValueError(f"field in {path} lives on {field.grid}, config grid is {grid}")
    return field


def _set_dotted(raw: Dict[str, Any], key: str, value: Any):
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def _resolve_paths(raw: Dict[str, Any], base_dir: str):
    for block, key in (("kernel", "file"), ("initial", "path")):
        section = raw.get(block)
        if isinstance(section, dict) and isinstance(section.get(key), str):
            section[key] = os.path.normpath(os.path.join(base_dir, section[key]))


def _format_errors(error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        message = item["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, ") :]
        messages.append(f"{location}: {message}")
    return messages


def validate_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e)) from e


def parse_config(path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Load, override and validate one experiment config. Without a path the
    overrides alone make up the config.

    Precedence for the output directory: config < NLKPP_OUT < an explicit
    "output_dir" override.
    """
    raw: Any = {}
    if path is not None:
        logging.debug(f"Loading experiment config from {path}")
        try:
            with open(path) as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigValidationError([f"{path}: {e}"]) from e
        if not isinstance(raw, dict):
            raise ConfigValidationError([f"{path}: top level must be an object"])
        _resolve_paths(raw, os.path.dirname(os.path.abspath(path)))

    if os.environ.get(OUTPUT_ENV):
        raw["output_dir"] = os.environ[OUTPUT_ENV]
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(raw, key, value)
    config = validate_config(raw)
    logging.debug(f"Config '{config.name}' validated (kind {config.kind})")
    return config


class ConfigManager:
    """Loads experiment configs for the app and keeps the last one around"""

    def __init__(self, app=None):
        self.app = app
        self.config: Optional[ExperimentConfig] = None
        self.config_path: Optional[str] = None

    def load_config(self, path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        """
        Load the configuration file.
        """
        self.config_path = path
        self.config = parse_config(path, overrides)
        logging.debug("Config loaded successfully")
        return self.config

    def save_config(self, config: ExperimentConfig, path: str):
        """
        Save a validated configuration (for example after CLI overrides) as JSON.
        """
        with open(path, "w") as f:
            json.dump(config.model_dump(mode="json", exclude_none=True), f, indent=4, sort_keys=True)
            f.write("\n")
        logging.debug(f"Config saved to {path}")
