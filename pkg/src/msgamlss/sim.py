"""Simulation of covariate-driven Markov-switching distributional data.

A :class:`DGPSpec` is a fully explicit generative description: covariate
generators, per-state parameter functions, and transition predictor
functions. :func:`benchmark_dgp` returns the built-in two-state normal
benchmark with quadratic transition effects that the recovery tests use.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import families
from .data import TimeSeriesFrame
from .exceptions import ConfigError, ParameterError
from .markov import tpm_from_eta


def uniform_generator(low: float = -1.0, high: float = 1.0):
    """Covariate generator drawing iid Uniform(low, high)."""

    def generate(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(low, high, size=n)

    return generate


@dataclass
class DGPSpec:
    """Generative model: everything needed to simulate one time series."""

    n_states: int
    family: str = "normal"
    initial: tuple[float, ...] = (1.0,)
    covariates: Mapping[str, Callable[[np.random.Generator, int], np.ndarray]] = field(
        default_factory=dict
    )
    state_parameters: tuple[Mapping[str, Callable], ...] = ()
    transition_etas: Mapping[tuple[int, int], Callable] = field(default_factory=dict)
    n_obs: int = 1000

    def __post_init__(self):
        if self.n_states < 1:
            raise ConfigError("n_states must be >= 1")
        probs = np.asarray(self.initial, dtype=float)
        if len(probs) != self.n_states or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-8:
            raise ConfigError("initial must be a probability vector over the states")
        if len(self.state_parameters) != self.n_states:
            raise ConfigError("state_parameters must have one entry per state")
        fam = families.get_family(self.family)
        for i, param_fns in enumerate(self.state_parameters):
            missing = set(fam.parameter_names) - set(param_fns)
            if missing:
                raise ConfigError(
                    f"state {i + 1} is missing parameter functions: {sorted(missing)}"
                )
        expected = {
            (i, j)
            for i in range(self.n_states)
            for j in range(self.n_states)
            if i != j
        }
        if self.n_states > 1 and set(self.transition_etas) != expected:
            raise ConfigError(
                "transition_etas must cover every ordered off-diagonal pair"
            )


def _evaluate(fn: Callable, cov: dict, n: int, what: str) -> np.ndarray:
    values = np.broadcast_to(np.asarray(fn(cov), dtype=float), (n,)).copy()
    if not np.all(np.isfinite(values)):
        t = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ParameterError(f"{what} is non-finite at t={t + 1}")
    return values


def simulate(dgp: DGPSpec, seed=None) -> tuple[TimeSeriesFrame, np.ndarray]:
    """Simulate one series; returns the frame and the true state path.

    The transition from ``t-1`` to ``t`` uses the transition covariates
    observed at ``t-1``, matching the likelihood's timing convention.
    Deterministic given the seed (or generator) passed in.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fam = families.get_family(dgp.family)
    n, n_states = dgp.n_obs, dgp.n_states
    if n < 1:
        raise ConfigError("n_obs must be >= 1")

    cov = {name: np.asarray(gen(rng, n), dtype=float) for name, gen in dgp.covariates.items()}
    for name, values in cov.items():
        if values.shape != (n,) or not np.all(np.isfinite(values)):
            raise ConfigError(f"covariate generator '{name}' produced invalid output")

    if n_states > 1:
        eta = np.zeros((n, n_states, n_states))
        for (i, j), fn in dgp.transition_etas.items():
            eta[:, i, j] = _evaluate(fn, cov, n, f"eta[{i + 1}->{j + 1}]")
        gammas = tpm_from_eta(eta)
        cum = np.cumsum(gammas, axis=2)
    else:
        cum = None

    states = np.zeros(n, dtype=int)
    u = rng.random(n)
    states[0] = int(np.searchsorted(np.cumsum(dgp.initial), u[0], side="right"))
    states[0] = min(states[0], n_states - 1)
    if n_states > 1:
        for t in range(1, n):
            row = cum[t - 1, states[t - 1]]
            states[t] = min(int(np.searchsorted(row, u[t], side="right")), n_states - 1)

    params_by_state = []
    for i, fns in enumerate(dgp.state_parameters):
        values = tuple(
            _evaluate(fns[name], cov, n, f"state {i + 1} parameter '{name}'")
            for name in fam.parameter_names
        )
        sigma = values[1]
        if np.any(sigma <= 0):
            t = int(np.flatnonzero(sigma <= 0)[0])
            raise ParameterError(f"state {i + 1} sigma is non-positive at t={t + 1}")
        params_by_state.append(values)

    y = np.empty(n)
    for i in range(n_states):
        draws = families.sample(fam, params_by_state[i], rng)
        mask = states == i
        y[mask] = draws[mask]

    frame = TimeSeriesFrame(response=y, covariates=cov)
    return frame, states


def benchmark_dgp(n_obs: int = 4000) -> DGPSpec:
    """Two-state normal benchmark with quadratic transition effects.

    Means and log-standard deviations are smooth functions of a uniform
    covariate ``x``; the off-diagonal transition predictors are quadratic
    polynomials in a second uniform covariate ``z``.
    """
    return DGPSpec(
        n_states=2,
        family="normal",
        initial=(0.5, 0.5),
        covariates={"x": uniform_generator(), "z": uniform_generator()},
        state_parameters=(
            {
                "mu": lambda c: c["x"] + c["x"] ** 2,
                "sigma": lambda c: np.exp(-0.5 + c["x"] ** 2),
            },
            {
                "mu": lambda c: -1.0 + c["x"] + 0.5 * np.sin(np.pi * c["x"]),
                "sigma": lambda c: 1.0 + 0.5 * c["x"],
            },
        ),
        transition_etas={
            (0, 1): lambda c: -1.8 + 1.5 * c["z"] - 2.0 * c["z"] ** 2,
            (1, 0): lambda c: -2.1 - 2.0 * c["z"] - 1.0 * c["z"] ** 2,
        },
        n_obs=n_obs,
    )


def with_separation(dgp: DGPSpec, offset: float) -> DGPSpec:
    """Copy of a DGP with the first state's location shifted by ``offset``.

    Useful for decoding studies that need well-separated states."""
    first = dict(dgp.state_parameters[0])
    base_mu = first["mu"]
    first["mu"] = lambda c, _f=base_mu: _f(c) + offset
    return replace(dgp, state_parameters=(first,) + tuple(dgp.state_parameters[1:]))
