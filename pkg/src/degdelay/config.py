"""Experiment configuration (TOML).

Blocks: ``[problem]``, ``[grid]``, ``[carleman]``, ``[control]``, ``[boundary]``
and a top-level ``seed``.  Unknown keys are rejected with the dotted key name.

Coefficient fields ``b`` and ``c`` are inline tables from a closed whitelist::

    {kind = "constant", value = 1.0}
    {kind = "polynomial", terms = [[i, j, coef], ...]}      # sum coef t^i x^j
    {kind = "flat", power = 5.0, amplitude = 1.0}           # amplitude exp(-(T - t)^-power)
    {kind = "indicator", lo = 0.3, hi = 0.8, inner = {...}} # inner on (lo, hi)
    {kind = "product", factors = [{...}, {...}]}
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import (BCKind, Constant, DelayProblem, FlatDecay, Grid, Indicator, Polynomial, PowerLaw, Product,
                    Tabulated, classify_degeneracy)


@dataclass(frozen=True)
class ProblemConfig:
    family: str = "power"
    alpha: float = 0.5
    table: str | None = None
    b: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.0})
    c: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.0})
    h: float = 0.25
    T: float = 0.5
    omega: tuple = (0.3, 0.8)
    bc: str = "auto"
    y0: str = "sine"
    history: str = "zero"


@dataclass(frozen=True)
class GridConfig:
    N: int = 100
    M: int = 100


@dataclass(frozen=True)
class CarlemanConfig:
    rho: float = 1.0
    lam: float | None = None
    d: float | None = None
    n_samples: int = 10
    hardy_alphas: tuple = (0.25, 0.5, 0.75)
    hardy_nodes: int = 401
    hardy_samples: int = 100
    n_probe: int = 8


@dataclass(frozen=True)
class ControlConfig:
    epsilon: float = 1e-6
    epsilons: tuple = (1e-2, 1e-4, 1e-6)
    cg_tol: float = 1e-9
    max_iter: int = 1000
    certificate_samples: int = 16
    power_iters: int = 60


@dataclass(frozen=True)
class BoundaryConfig:
    omega_ext: tuple = (1.2, 1.8)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig = ProblemConfig()
    grid: GridConfig = GridConfig()
    carleman: CarlemanConfig = CarlemanConfig()
    control: ControlConfig = ControlConfig()
    boundary: BoundaryConfig = BoundaryConfig()
    seed: int = 0
    source: str | None = None

    # -- builders ---------------------------------------------------------
    def coefficient(self):
        p = self.problem
        if p.family == "power":
            return classify_degeneracy(PowerLaw(float(p.alpha)))
        if p.family == "tabulated":
            if not p.table:
                raise ConfigError("problem.table is required for the tabulated family")
            path = Path(p.table)
            if not path.is_absolute() and self.source:
                path = Path(self.source).parent / path
            return classify_degeneracy(Tabulated.from_csv(path))
        raise ConfigError(f"problem.family must be 'power' or 'tabulated', got {p.family!r}")

    def build_problem(self) -> DelayProblem:
        p = self.problem
        bc = None if p.bc == "auto" else BCKind(p.bc)
        return DelayProblem(self.coefficient(), parse_field(p.b, p.T, "problem.b"),
                            parse_field(p.c, p.T, "problem.c"), float(p.h), float(p.T),
                            tuple(p.omega), bc)

    def build_grid(self, problem: DelayProblem | None = None) -> Grid:
        problem = problem or self.build_problem()
        return Grid.for_problem(problem, int(self.grid.N), int(self.grid.M))

    def initial_data(self, grid: Grid):
        p = self.problem
        x = grid.x
        rng = np.random.default_rng([self.seed, 1])
        y0 = _profile(p.y0, x, rng, "problem.y0")
        theta = np.zeros((grid.m_delay, grid.N + 1))
        if p.history != "zero":
            theta = np.tile(_profile(p.history, x, rng, "problem.history"), (grid.m_delay, 1))
        return y0, theta


def _profile(name, x, rng, key):
    if name == "sine":
        return np.sin(np.pi * x)
    if name == "zero":
        return np.zeros_like(x)
    if name == "random":
        v = rng.standard_normal(x.size)
        v[0] = v[-1] = 0.0
        return v
    raise ConfigError(f"{key} must be 'sine', 'zero' or 'random', got {name!r}")


_FIELD_KEYS = {
    "constant": {"value"},
    "polynomial": {"terms"},
    "flat": {"power", "amplitude"},
    "indicator": {"lo", "hi", "inner", "closed"},
    "product": {"factors"},
}


def parse_field(spec, T: float, key: str = "field"):
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{key} must be a number or an inline table with 'kind'")
    kind = spec["kind"]
    if kind not in _FIELD_KEYS:
        raise ConfigError(f"{key}.kind: unknown field kind {kind!r}")
    extra = set(spec) - _FIELD_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unknown key '{key}.{sorted(extra)[0]}'")
    if kind == "constant":
        return Constant(float(spec.get("value", 0.0)))
    if kind == "polynomial":
        try:
            terms = tuple((int(i), int(j), float(cf)) for i, j, cf in spec.get("terms", []))
        except (TypeError, ValueError):
            raise ConfigError(f"{key}.terms must be a list of [i, j, coef]") from None
        return Polynomial(terms)
    if kind == "flat":
        return FlatDecay(T, float(spec.get("power", 5.0)), float(spec.get("amplitude", 1.0)))
    if kind == "indicator":
        inner = parse_field(spec.get("inner", 1.0), T, f"{key}.inner")
        return Indicator(inner, float(spec["lo"]), float(spec["hi"]), bool(spec.get("closed", False)))
    factors = tuple(parse_field(f, T, f"{key}.factors[{n}]") for n, f in enumerate(spec.get("factors", [])))
    return Product(factors)


def _block(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    names = {f.name for f in fields(cls)}
    for k in data:
        if k not in names:
            raise ConfigError(f"unknown key '{name}.{k}'")
    kw = {k: (tuple(v) if isinstance(v, list) and k != "terms" else v) for k, v in data.items()}
    return cls(**kw)


_BLOCKS = {"problem": ProblemConfig, "grid": GridConfig, "carleman": CarlemanConfig,
           "control": ControlConfig, "boundary": BoundaryConfig}


def from_dict(data: dict, source: str | None = None) -> ExperimentConfig:
    kw = {}
    for k, v in data.items():
        if k == "seed":
            if not isinstance(v, int) or v < 0:
                raise ConfigError("seed must be a nonnegative integer")
            kw["seed"] = v
        elif k in _BLOCKS:
            kw[k] = _block(_BLOCKS[k], v, k)
        else:
            raise ConfigError(f"unknown key '{k}'")
    cfg = ExperimentConfig(**kw, source=source)
    # coefficient fields are checked eagerly so nested typos fail at load time
    for name in ("b", "c"):
        parse_field(getattr(cfg.problem, name), float(cfg.problem.T), f"problem.{name}")
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return from_dict(data, str(path))


DEFAULT_CONFIG = Path(__file__).with_name("default.toml")
