"""TOML experiment configuration with dotted command-line overrides."""

from __future__ import annotations

import copy
import math
import sys
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .limit import KarlinParams
from .model import ModelParams, SimulationPlan
from .samplers import DEFAULT_SEED, Gaussian, Rademacher, SymmetrizedPareto
from .special_functions import DomainError

EXPERIMENTS = ("clt", "ppp", "conditional", "supmeasure", "series_vs_theory",
               "gaussian_corr", "lemma1", "theory_eval")

_MISSING = object()


class ConfigError(ValueError):
    """Missing or invalid configuration field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` with ``value`` read as a TOML literal, or as a bare string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(text, "empty key in override")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.split("."), value


def apply_overrides(data: dict, overrides) -> dict:
    out = copy.deepcopy(data)
    for item in overrides:
        path, value = parse_override(item)
        node = out
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(".".join(path), f"{part} is not a table")
            node = nxt
        node[path[-1]] = value
    return out


class Config:
    """Raw configuration tree with typed accessors that report dotted field names."""

    def __init__(self, data: Mapping[str, Any], source: str = "<config>"):
        self.data = dict(data)
        self.source = source

    @classmethod
    def load(cls, path, overrides=()) -> "Config":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
        return cls(apply_overrides(data, overrides), str(path))

    @classmethod
    def from_string(cls, text: str, overrides=()) -> "Config":
        return cls(apply_overrides(tomllib.loads(text), overrides))

    def get(self, field: str, default: Any = _MISSING) -> Any:
        node: Any = self.data
        for part in field.split("."):
            if not isinstance(node, Mapping) or part not in node:
                if default is _MISSING:
                    raise ConfigError(field, "missing required field")
                return default
            node = node[part]
        return node

    def number(self, field: str, default: Any = _MISSING) -> float:
        value = self.get(field, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(field, f"expected a finite number, got {value!r}")
        return float(value)

    def integer(self, field: str, default: Any = _MISSING) -> int:
        value = self.get(field, default)
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(field, f"expected an integer, got {value!r}")
        return value

    def numbers(self, field: str, default: Any = _MISSING) -> list[float]:
        value = self.get(field, default)
        if not isinstance(value, list) or not value:
            raise ConfigError(field, "expected a nonempty array of numbers")
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(field, f"non-numeric entry {v!r}")
        return [float(v) for v in value]

    @property
    def experiment(self) -> str:
        name = self.get("experiment")
        if name not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        return name

    @property
    def seed(self) -> int:
        return self.integer("plan.seed", DEFAULT_SEED)


def _innovation(cfg: Config, alpha: float, c_x: float):
    kind = cfg.get("model.innovation", "pareto" if alpha != 2.0 else "gaussian")
    if kind == "pareto":
        tail = cfg.number("model.tail_index", alpha)
        return SymmetrizedPareto(tail, c_x)
    if kind == "rademacher":
        return Rademacher()
    if kind == "gaussian":
        return Gaussian(c_x)
    raise ConfigError("model.innovation", f"unknown innovation {kind!r}")


def model_params(cfg: Config) -> ModelParams:
    """``ModelParams`` from ``[model]``; ``preset = "enriquez"`` needs only ``model.hurst``."""
    preset = cfg.get("model.preset", None)
    try:
        if preset is not None:
            if preset != "enriquez":
                raise ConfigError("model.preset", f"unknown preset {preset!r}")
            return ModelParams.enriquez(cfg.number("model.hurst"))
        alpha = cfg.number("model.alpha")
        c_x = cfg.number("model.c_x", 1.0)
        return ModelParams(
            alpha=alpha,
            alpha_prime=cfg.number("model.alpha_prime"),
            rho=cfg.number("model.rho"),
            c_x=c_x,
            innovation=_innovation(cfg, alpha, c_x),
        )
    except DomainError as exc:
        raise ConfigError("model", str(exc)) from None


def karlin_params(cfg: Config) -> KarlinParams:
    try:
        return KarlinParams(cfg.number("model.alpha"), cfg.number("model.beta"))
    except DomainError as exc:
        raise ConfigError("model", str(exc)) from None


def simulation_plan(cfg: Config, params: Optional[ModelParams] = None) -> SimulationPlan:
    """``SimulationPlan`` from ``[plan]``; ``m_n`` or ``kappa`` (with optional ``scale``)."""
    n = cfg.integer("plan.n")
    if cfg.get("plan.m_n", None) is not None:
        m_n = cfg.integer("plan.m_n")
    else:
        m_n = int(math.ceil(cfg.number("plan.scale", 1.0) * n ** cfg.number("plan.kappa")))
    try:
        plan = SimulationPlan(
            n=n,
            m_n=m_n,
            R=cfg.integer("plan.R", 1000),
            times=tuple(cfg.numbers("plan.times", [1.0])),
            seed=cfg.seed,
            epsilon=cfg.number("plan.epsilon", 1.0),
        )
    except DomainError as exc:
        raise ConfigError("plan", str(exc)) from None
    if params is not None:
        plan.validate(params)
    return plan
