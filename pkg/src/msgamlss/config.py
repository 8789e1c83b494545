"""Run configuration: term grammar, YAML files, and spec assembly.

Term strings follow a small grammar: ``linear(name)`` (or a bare column
name) for linear effects and ``smooth(name, k=M, degree=D, order=O)``
for penalized smooths. Transition predictors are either one shared term
list or a mapping with 1-based pair keys like ``"1->2"``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import yaml

from .exceptions import ConfigError
from .model import LinearTerm, ModelSpec, Predictor, as_initial
from .smoothing import OptimizerConfig
from .splines import SmoothSpec

_SMOOTH_RE = re.compile(r"^smooth\(\s*([A-Za-z_]\w*)\s*((?:,[^)]*)?)\)$")
_LINEAR_RE = re.compile(r"^linear\(\s*([A-Za-z_]\w*)\s*\)$")
_NAME_RE = re.compile(r"^[A-Za-z_]\w*$")
_LAG_RE = re.compile(r"^lag\(\s*([A-Za-z_]\w*)\s*,\s*(\d+)\s*\)$")

_SMOOTH_KEYS = {"k": "num_basis", "degree": "degree", "order": "penalty_order"}


def parse_term(text) -> LinearTerm | SmoothSpec:
    """Parse one term string; term objects pass through unchanged."""
    if isinstance(text, (LinearTerm, SmoothSpec)):
        return text
    text = str(text).strip()
    match = _SMOOTH_RE.match(text)
    if match:
        name, argstr = match.group(1), match.group(2)
        kwargs = {}
        for item in filter(None, (s.strip() for s in argstr.split(","))):
            if "=" not in item:
                raise ConfigError(f"bad smooth argument '{item}' in '{text}'")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in _SMOOTH_KEYS:
                raise ConfigError(f"unknown smooth option '{key}' in '{text}'")
            kwargs[_SMOOTH_KEYS[key]] = int(value)
        if kwargs.get("num_basis", 10) < 4:
            raise ConfigError(f"'{text}': basis dimension k must be at least 4")
        return SmoothSpec(covariate=name, **kwargs)
    match = _LINEAR_RE.match(text)
    if match:
        return LinearTerm(covariate=match.group(1))
    if _NAME_RE.match(text):
        return LinearTerm(covariate=text)
    raise ConfigError(f"cannot parse term '{text}'")


def _rejoin_split_terms(items) -> list:
    """Merge list items that YAML split on commas inside parentheses.

    An unquoted flow sequence like ``[smooth(x, k=8)]`` arrives as two
    strings; fragments are glued back together until parentheses balance.
    """
    out, buffer = [], ""
    for item in items:
        if isinstance(item, str) and (buffer or item.count("(") != item.count(")")):
            buffer = f"{buffer},{item}" if buffer else item
            if buffer.count("(") == buffer.count(")"):
                out.append(buffer)
                buffer = ""
        else:
            out.append(item)
    if buffer:
        raise ConfigError(f"unbalanced parentheses in term list near '{buffer}'")
    return out


def parse_predictor(terms) -> Predictor:
    if terms is None:
        return Predictor()
    if isinstance(terms, (str, LinearTerm, SmoothSpec)):
        terms = [terms]
    return Predictor(terms=tuple(parse_term(t) for t in _rejoin_split_terms(terms)))


def parse_transition(value) -> Predictor | dict[tuple[int, int], Predictor]:
    if value is None:
        return Predictor()
    if isinstance(value, Mapping):
        out = {}
        for key, terms in value.items():
            match = re.match(r"^\s*(\d+)\s*->\s*(\d+)\s*$", str(key))
            if not match:
                raise ConfigError(
                    f"transition pair key '{key}' must look like '1->2' (1-based)"
                )
            pair = (int(match.group(1)) - 1, int(match.group(2)) - 1)
            out[pair] = parse_predictor(terms)
        return out
    return parse_predictor(value)


def parse_lag(text) -> tuple[str, int]:
    match = _LAG_RE.match(str(text).strip())
    if not match:
        raise ConfigError(f"cannot parse lag directive '{text}'; expected lag(name, L)")
    return match.group(1), int(match.group(2))


def parse_lags(values) -> dict[str, int]:
    lags: dict[str, int] = {}
    if values is None:
        return lags
    if isinstance(values, Mapping):
        return {str(k): int(v) for k, v in values.items()}
    for item in _rejoin_split_terms(list(values)):
        name, lag = parse_lag(item)
        if name in lags:
            raise ConfigError(f"duplicate lag directive for column '{name}'")
        lags[name] = lag
    return lags


@dataclass
class RunConfig:
    """Parsed contents of a fit configuration file."""

    data: str
    response: str
    family: str = "normal"
    n_states: int = 2
    predictors: dict[str, Sequence] = field(default_factory=dict)
    transition: object = None
    lags: dict[str, int] = field(default_factory=dict)
    initial: object = "uniform"
    seed: int = 0
    out: str = "."
    label_column: str | None = None
    optimizer: dict = field(default_factory=dict)

    def build_spec(self) -> ModelSpec:
        predictors = {
            name: parse_predictor(terms) for name, terms in self.predictors.items()
        }
        return ModelSpec(
            n_states=int(self.n_states),
            family=self.family,
            predictors=predictors,
            transition=parse_transition(self.transition),
            initial=as_initial(self.initial),
        )

    def build_optimizer(self) -> OptimizerConfig:
        known = {
            "gradient_tol",
            "max_inner",
            "outer_tol",
            "max_outer",
            "initial_lambda",
            "lambda_bounds",
            "multi_start",
            "multi_start_draws",
            "multi_start_scale",
            "multi_start_seed",
        }
        unknown = set(self.optimizer) - known
        if unknown:
            raise ConfigError(f"unknown optimizer options: {sorted(unknown)}")
        options = dict(self.optimizer)
        if "lambda_bounds" in options:
            lo, hi = options["lambda_bounds"]
            options["lambda_bounds"] = (float(lo), float(hi))
        return OptimizerConfig(**options)


_PARAMETER_KEYS = ("mu", "sigma", "nu", "tau")


def load_config(path) -> RunConfig:
    """Read a YAML configuration file into a :class:`RunConfig`."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    for key in ("data", "response"):
        if key not in raw:
            raise ConfigError(f"config file is missing required key '{key}'")
    predictors = {key: raw[key] for key in _PARAMETER_KEYS if key in raw}
    known = {
        "data",
        "response",
        "family",
        "states",
        "transition",
        "lags",
        "initial",
        "seed",
        "out",
        "label_column",
        "optimizer",
        *_PARAMETER_KEYS,
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(
        data=str(raw["data"]),
        response=str(raw["response"]),
        family=raw.get("family", "normal"),
        n_states=int(raw.get("states", 2)),
        predictors=predictors,
        transition=raw.get("transition"),
        lags=parse_lags(raw.get("lags")),
        initial=raw.get("initial", "uniform"),
        seed=int(raw.get("seed", 0)),
        out=str(raw.get("out", ".")),
        label_column=raw.get("label_column"),
        optimizer=raw.get("optimizer") or {},
    )
