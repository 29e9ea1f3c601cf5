"""Run configuration: a flat ``key = value`` file with sections.

Example::

    [fluid]
    rho = 900
    mu = 0.05

    [pressure]
    kind = linear        # constant | linear | samples
    value = 0
    slope = -1.0
    # file = pressure.csv  (columns s,q; for kind = samples)

    [solver]
    method = bdf2        # rk4 | adams_moulton_2 | bdf2
    step = 1e-3
    newton_tol = 1e-10
    newton_max_iter = 25
    max_steps = 10000000

    [model]
    convention = pseudoinverse
    component = 0
    eps = 1e-6

    [initial]
    s_start = 0
    u0 = 1
    udot0 = 0

    [batch]
    strategy = shared_pool:4

    [io]
    input = lines.csv
    output = solution.csv

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .batch import ExecutionStrategy
from .errors import ConfigError, StreamflowError
from .io import read_pressure_samples
from .ode import CONVENTIONS, FluidProperties, InitialConditions, PressureModel, SolverConfig

PRESSURE_KINDS = ("constant", "linear", "samples")


@dataclass(frozen=True)
class RunConfig:
    rho: float = 1.0
    mu: float = 1.0
    pressure_kind: str = "constant"
    pressure_value: float = 0.0
    pressure_slope: float = 0.0
    pressure_file: str | None = None
    method: str = "bdf2"
    step: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    max_steps: int = 10_000_000
    convention: str = "pseudoinverse"
    component: int = 0
    eps: float = 1e-6
    s_start: float = 0.0
    u0: float = 1.0
    udot0: float = 0.0
    strategy: str = "serial"
    input: str | None = None
    output: str | None = None
    base_dir: str = field(default=".", compare=False)

    def validate(self):
        """Raise :class:`ConfigError` on any inconsistent value."""
        if self.pressure_kind not in PRESSURE_KINDS:
            raise ConfigError(f"pressure kind must be one of {PRESSURE_KINDS}, got {self.pressure_kind!r}")
        if self.pressure_kind == "samples" and not self.pressure_file:
            raise ConfigError("pressure kind 'samples' needs a file")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.component < 0:
            raise ConfigError("component must be non-negative")
        try:
            self.fluid()
            self.solver()
            self.execution()
        except StreamflowError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def fluid(self):
        return FluidProperties(self.rho, self.mu)

    def pressure(self):
        if self.pressure_kind == "constant":
            return PressureModel.constant(self.pressure_value)
        if self.pressure_kind == "linear":
            return PressureModel.linear(self.pressure_value, self.pressure_slope)
        path = Path(self.pressure_file)
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        return PressureModel.from_samples(*read_pressure_samples(path))

    def solver(self):
        return SolverConfig(self.method, self.step, self.newton_tol, self.newton_max_iter, self.max_steps)

    def initial(self):
        return InitialConditions(self.s_start, self.u0, self.udot0)

    def execution(self):
        return ExecutionStrategy.parse(self.strategy)

    def override(self, **values):
        return replace(self, **{k: v for k, v in values.items() if v is not None}).validate()


# (section, key) -> RunConfig field
_KEYS = {
    ("fluid", "rho"): "rho",
    ("fluid", "mu"): "mu",
    ("pressure", "kind"): "pressure_kind",
    ("pressure", "value"): "pressure_value",
    ("pressure", "slope"): "pressure_slope",
    ("pressure", "file"): "pressure_file",
    ("solver", "method"): "method",
    ("solver", "step"): "step",
    ("solver", "newton_tol"): "newton_tol",
    ("solver", "newton_max_iter"): "newton_max_iter",
    ("solver", "max_steps"): "max_steps",
    ("model", "convention"): "convention",
    ("model", "component"): "component",
    ("model", "eps"): "eps",
    ("initial", "s_start"): "s_start",
    ("initial", "u0"): "u0",
    ("initial", "udot0"): "udot0",
    ("batch", "strategy"): "strategy",
    ("io", "input"): "input",
    ("io", "output"): "output",
}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(name, raw):
    kind = _TYPES[name]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(text, base_dir="."):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = _KEYS.get((section, key))
            if name is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            values[name] = _convert(name, raw.strip())
    return RunConfig(base_dir=str(base_dir), **values).validate()


def load_config(path=None):
    if path is None:
        return RunConfig().validate()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)
