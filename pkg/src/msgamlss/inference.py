"""Likelihood evaluation, decoding, residuals, and curve prediction.

The exact log-likelihood uses the scaled forward recursion: standardized
forward variables are renormalized at every step and the log-likelihood
accumulates the step normalizers, so series of any length are safe from
under- and overflow. State-dependent log-densities are additionally
max-subtracted per time step before exponentiation.

Two implementations coexist deliberately. A plain numpy forward pass
backs the public evaluation surface (likelihood values, forward weights,
decoding, residuals) and is easy to audit; a JAX twin of the same
recursion provides the gradient and Hessian of the penalized objective
for the optimizer. Tests pin the two against each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import special

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp
from jax import lax

from . import families
from .data import TimeSeriesFrame
from .exceptions import ConfigError, LikelihoodError
from .markov import ETA_CLIP, TransitionModel, stationary, tpm_from_eta
from .model import ModelSpec, ModelStructure

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

_CDF_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# compiled penalized objective, cached per model structure
# ---------------------------------------------------------------------------


def _structure_signature(structure: ModelStructure) -> tuple:
    """Hashable description of everything the traced objective depends on."""
    return (
        structure.n_states,
        structure.family.name,
        tuple(
            structure.dist_layouts[p].n_columns
            for p in structure.family.parameter_names
        ),
        tuple(structure.trans_layouts[p].n_columns for p in structure.pairs),
        tuple((p.start, p.stop) for p in structure.penalties),
        structure.spec.initial.mode,
    )


@lru_cache(maxsize=None)
def _compiled(signature: tuple):
    n_states, family_name, dist_widths, pair_widths, pen_slices, init_mode = signature
    family = families.get_family(family_name)
    n_params = len(dist_widths)
    pairs = [
        (i, j) for i in range(n_states) for j in range(n_states) if i != j
    ]

    dist_offsets = []
    off = 0
    for width in dist_widths:
        state_offsets = []
        for _ in range(n_states):
            state_offsets.append(off)
            off += width
        dist_offsets.append(tuple(state_offsets))
    pair_offsets = []
    for width in pair_widths:
        pair_offsets.append(off)
        off += width

    def objective(theta, lam, y, xs, xz, penalties, delta_arg):
        t_len = y.shape[0]
        etas = []
        for k in range(n_params):
            width = dist_widths[k]
            cols = [
                xs[k] @ theta[o : o + width] for o in dist_offsets[k]
            ]
            etas.append(jnp.stack(cols, axis=1))

        mu = etas[0]
        log_sigma = etas[1]
        z = (y[:, None] - mu) * jnp.exp(-log_sigma)
        logp = -_HALF_LOG_2PI - log_sigma - 0.5 * z * z
        if family.name == "skew-normal":
            nu = etas[2]
            logp = logp + jnp.log(2.0) + jax.scipy.special.log_ndtr(nu * z)

        if n_states > 1:
            eta_mat = jnp.zeros((t_len - 1, n_states, n_states))
            for idx, (i, j) in enumerate(pairs):
                width = pair_widths[idx]
                o = pair_offsets[idx]
                eta_mat = eta_mat.at[:, i, j].set(xz[idx] @ theta[o : o + width])
            eta_mat = jnp.clip(eta_mat, -ETA_CLIP, ETA_CLIP)
            gammas = jax.nn.softmax(eta_mat, axis=-1)
        else:
            gammas = jnp.ones((t_len - 1, 1, 1))

        if init_mode == "stationary":
            a = jnp.eye(n_states) - gammas[0] + 1.0
            delta = jnp.linalg.solve(a.T, jnp.ones(n_states))
        else:
            delta = delta_arg

        c0 = jnp.max(logp[0])
        v0 = delta * jnp.exp(logp[0] - c0)
        s0 = jnp.sum(v0)
        carry0 = (v0 / s0, jnp.log(s0) + c0)

        def step(carry, inputs):
            phi, ll = carry
            lp, gamma = inputs
            c = jnp.max(lp)
            v = (phi @ gamma) * jnp.exp(lp - c)
            s = jnp.sum(v)
            return (v / s, ll + jnp.log(s) + c), None

        (_, loglik), _ = lax.scan(step, carry0, (logp[1:], gammas))

        pen = 0.0
        for p, (start, stop) in enumerate(pen_slices):
            b = theta[start:stop]
            pen = pen + 0.5 * lam[p] * (b @ (penalties[p] @ b))
        return -loglik + pen

    value_and_grad = jax.jit(jax.value_and_grad(objective))
    hessian = jax.jit(jax.jacfwd(jax.grad(objective)))
    return value_and_grad, hessian


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


class Likelihood:
    """Binds a fitted :class:`ModelStructure` to one data frame.

    Precomputes all design matrices once; exposes the numpy likelihood
    surface and the compiled value/gradient/Hessian of the penalized
    negative log-likelihood.
    """

    def __init__(self, structure: ModelStructure, frame: TimeSeriesFrame):
        missing = [
            name
            for name in structure.required_covariates()
            if name not in frame.covariates
        ]
        if missing:
            raise ConfigError(
                "data is missing covariate columns required by the model: "
                + ", ".join(sorted(missing))
            )
        if structure.spec.initial.mode == "stationary" and len(frame) < 2:
            raise ConfigError("stationary initial distribution needs T >= 2")
        self.structure = structure
        self.frame = frame
        self.family = structure.family
        self.n_states = structure.n_states
        t_len = len(frame)
        self.y = frame.response
        cov = frame.covariates
        self.xs = tuple(
            structure.dist_layouts[p].evaluate(cov, n_rows=t_len)
            for p in self.family.parameter_names
        )
        by_layout: dict[int, np.ndarray] = {}
        xz = []
        for pair in structure.pairs:
            layout = structure.trans_layouts[pair]
            if id(layout) not in by_layout:
                by_layout[id(layout)] = layout.evaluate(cov, n_rows=t_len)[: t_len - 1]
            xz.append(by_layout[id(layout)])
        self.xz = tuple(xz)
        self.penalty_mats = tuple(p.penalty for p in structure.penalties)
        delta = structure.spec.initial.vector(self.n_states)
        self._delta_arg = (
            np.full(self.n_states, 1.0 / self.n_states) if delta is None else delta
        )
        self._vg, self._hess = _compiled(_structure_signature(structure))

    # -- numpy surface ----------------------------------------------------

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.structure.n_coef,):
            raise ConfigError(
                f"theta has shape {theta.shape}, expected ({self.structure.n_coef},)"
            )
        return theta

    def _check_lambda(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != (self.structure.n_penalties,):
            raise ConfigError(
                f"lambda has shape {lam.shape}, expected "
                f"({self.structure.n_penalties},)"
            )
        if np.any(lam < 0):
            raise ConfigError("smoothing parameters must be non-negative")
        return lam

    def parameter_values(self, theta) -> dict[str, np.ndarray]:
        """Distribution parameters per time point and state, shape (T, N)."""
        theta = self._check_theta(theta)
        out = {}
        for k, parameter in enumerate(self.family.parameter_names):
            cols = [
                self.xs[k] @ theta[self.structure.dist_slices[(parameter, i)]]
                for i in range(self.n_states)
            ]
            out[parameter] = self.family.links[k].inverse(np.stack(cols, axis=1))
        return out

    def log_density_matrix(self, theta) -> np.ndarray:
        values = self.parameter_values(theta)
        logp = np.empty((len(self.y), self.n_states))
        for i in range(self.n_states):
            params = tuple(values[p][:, i] for p in self.family.parameter_names)
            logp[:, i] = families.log_density(self.family, self.y, params)
        return logp

    def transition_matrices(self, theta) -> np.ndarray:
        """Gamma^(t) for t = 2..T built from covariate rows 1..T-1.

        Row ``s`` of the result multiplies the forward vector at time
        ``s + 1`` (0-based): the transition from ``t-1`` to ``t`` is
        driven by the covariates observed at ``t-1``.
        """
        theta = self._check_theta(theta)
        t_len = len(self.y)
        if self.n_states == 1:
            return np.ones((t_len - 1, 1, 1))
        eta = np.zeros((t_len - 1, self.n_states, self.n_states))
        for idx, pair in enumerate(self.structure.pairs):
            eta[:, pair[0], pair[1]] = (
                self.xz[idx] @ theta[self.structure.trans_slices[pair]]
            )
        return tpm_from_eta(eta)

    def initial_distribution(self, theta, gammas=None) -> np.ndarray:
        if self.structure.spec.initial.mode == "stationary":
            if gammas is None:
                gammas = self.transition_matrices(theta)
            return stationary(gammas[0])
        return self._delta_arg.copy()

    def log_likelihood(self, theta) -> float:
        logp = self.log_density_matrix(theta)
        gammas = self.transition_matrices(theta)
        delta = self.initial_distribution(theta, gammas)
        loglik, _, _ = _forward_numpy(logp, gammas, delta)
        return loglik

    def forward_pass(self, theta) -> tuple[float, np.ndarray, np.ndarray]:
        """Log-likelihood plus predictive weights and standardized forward
        variables, both of shape (T, N)."""
        logp = self.log_density_matrix(theta)
        gammas = self.transition_matrices(theta)
        delta = self.initial_distribution(theta, gammas)
        return _forward_numpy(logp, gammas, delta, keep=True)

    def forward_weights(self, theta) -> np.ndarray:
        """One-step-ahead state weights: delta at t=1, phi_{t-1} Gamma^(t) after."""
        return self.forward_pass(theta)[1]

    def penalty_value(self, theta, lam) -> float:
        theta = self._check_theta(theta)
        lam = self._check_lambda(lam)
        value = 0.0
        for p, block in enumerate(self.structure.penalties):
            b = theta[block.sl]
            value += 0.5 * lam[p] * float(b @ block.penalty @ b)
        return value

    def penalized_nll(self, theta, lam) -> float:
        return -self.log_likelihood(theta) + self.penalty_value(theta, lam)

    # -- compiled surface ---------------------------------------------------

    def _args(self, theta, lam):
        return (
            jnp.asarray(theta),
            jnp.asarray(lam),
            self.y,
            self.xs,
            self.xz,
            self.penalty_mats,
            self._delta_arg,
        )

    def value_and_grad(self, theta, lam) -> tuple[float, np.ndarray]:
        theta = self._check_theta(theta)
        lam = self._check_lambda(lam)
        value, grad = self._vg(*self._args(theta, lam))
        return float(value), np.asarray(grad)

    def gradient(self, theta, lam) -> np.ndarray:
        return self.value_and_grad(theta, lam)[1]

    def hessian(self, theta, lam) -> np.ndarray:
        theta = self._check_theta(theta)
        lam = self._check_lambda(lam)
        h = np.asarray(self._hess(*self._args(theta, lam)))
        return 0.5 * (h + h.T)

    def diagnose_likelihood_failure(self, theta) -> None:
        """Raise a :class:`LikelihoodError` naming the first degenerate step."""
        logp = self.log_density_matrix(theta)
        gammas = self.transition_matrices(theta)
        delta = self.initial_distribution(theta, gammas)
        _forward_numpy(logp, gammas, delta)


def _forward_numpy(logp, gammas, delta, keep=False):
    """Scaled forward recursion; returns (loglik, weights, phis)."""
    t_len, n_states = logp.shape
    weights = np.empty((t_len, n_states)) if keep else None
    phis = np.empty((t_len, n_states)) if keep else None
    w = np.asarray(delta, dtype=float)
    loglik = 0.0
    for t in range(t_len):
        if t > 0:
            w = phi @ gammas[t - 1]
        if keep:
            weights[t] = w
        c = logp[t].max()
        if not np.isfinite(c):
            raise LikelihoodError(
                f"zero response density in every state at time {t + 1}"
            )
        v = w * np.exp(logp[t] - c)
        s = v.sum()
        if not s > 0 or not np.isfinite(s):
            raise LikelihoodError(
                f"total observation density is zero at time {t + 1}"
            )
        loglik += np.log(s) + c
        phi = v / s
        if keep:
            phis[t] = phi
    return float(loglik), weights, phis


# ---------------------------------------------------------------------------
# spec-level convenience operations
# ---------------------------------------------------------------------------


def build_engine(spec: ModelSpec, data: TimeSeriesFrame) -> Likelihood:
    structure = ModelStructure(
        spec, data.covariates, response_name=data.response_name
    )
    return Likelihood(structure, data)


def log_likelihood(spec: ModelSpec, theta, data: TimeSeriesFrame) -> float:
    return build_engine(spec, data).log_likelihood(theta)


def penalized_nll(spec: ModelSpec, theta, lam, data: TimeSeriesFrame) -> float:
    return build_engine(spec, data).penalized_nll(theta, lam)


def gradient(spec: ModelSpec, theta, lam, data: TimeSeriesFrame) -> np.ndarray:
    return build_engine(spec, data).gradient(theta, lam)


# ---------------------------------------------------------------------------
# fitted models
# ---------------------------------------------------------------------------


@dataclass
class FitDiagnostics:
    converged: bool = True
    n_outer: int = 0
    n_inner_total: int = 0
    grad_norm: float = np.nan
    penalized_nll: float = np.nan
    lambda_trajectory: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    state_order: list | None = None

    def to_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "n_outer": int(self.n_outer),
            "n_inner_total": int(self.n_inner_total),
            "grad_norm": float(self.grad_norm),
            "penalized_nll": float(self.penalized_nll),
            "lambda_trajectory": [list(map(float, row)) for row in self.lambda_trajectory],
            "warnings": list(self.warnings),
            "state_order": None if self.state_order is None else list(self.state_order),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitDiagnostics":
        return cls(**d)


@dataclass
class FittedModel:
    """Everything needed to evaluate, decode, and predict after fitting."""

    structure: ModelStructure
    theta: np.ndarray
    lam: np.ndarray
    hessian: np.ndarray
    log_lik: float
    diagnostics: FitDiagnostics

    @property
    def spec(self) -> ModelSpec:
        return self.structure.spec

    @property
    def n_parameters(self) -> int:
        return len(self.theta)

    def engine(self, data: TimeSeriesFrame) -> Likelihood:
        return Likelihood(self.structure, data)

    def log_likelihood(self, data: TimeSeriesFrame) -> float:
        return self.engine(data).log_likelihood(self.theta)

    def coefficient_table(self) -> list[tuple[str, float]]:
        names = self.structure.coefficient_names()
        return list(zip(names, map(float, self.theta)))

    def smoothing_table(self) -> list[tuple[str, float]]:
        return [
            (block.name, float(self.lam[k]))
            for k, block in enumerate(self.structure.penalties)
        ]

    def transition_model(self) -> TransitionModel:
        design_fns = {}
        coefs = {}
        for pair in self.structure.pairs:
            layout = self.structure.trans_layouts[pair]

            def make_fn(layout=layout):
                def fn(data: Mapping[str, np.ndarray]) -> np.ndarray:
                    n_rows = len(next(iter(data.values()))) if data else 1
                    return layout.evaluate(data, n_rows=n_rows)

                return fn

            design_fns[pair] = make_fn()
            coefs[pair] = self.theta[self.structure.trans_slices[pair]]
        return TransitionModel(
            n_states=self.structure.n_states,
            pairs=self.structure.pairs,
            design_fns=design_fns,
            coefs=coefs,
            covariates=self.structure.transition_covariates(),
        )

    def save(self, path) -> None:
        from .serialize import fitted_to_dict

        with open(path, "w") as fh:
            json.dump(fitted_to_dict(self), fh, indent=1)

    @classmethod
    def load(cls, path) -> "FittedModel":
        from .serialize import fitted_from_dict

        with open(path) as fh:
            return fitted_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# decoding, residuals, prediction
# ---------------------------------------------------------------------------


def viterbi(fitted: FittedModel, data: TimeSeriesFrame) -> np.ndarray:
    """Most probable state sequence (0-based) under the fitted model."""
    engine = fitted.engine(data)
    logp = engine.log_density_matrix(fitted.theta)
    gammas = engine.transition_matrices(fitted.theta)
    delta = engine.initial_distribution(fitted.theta, gammas)
    return _viterbi_path(logp, gammas, delta)


def _viterbi_path(logp, gammas, delta) -> np.ndarray:
    t_len, n_states = logp.shape
    with np.errstate(divide="ignore"):
        log_gammas = np.log(gammas)
        score = np.log(delta) + logp[0]
    back = np.zeros((t_len - 1, n_states), dtype=int)
    for t in range(1, t_len):
        cand = score[:, None] + log_gammas[t - 1]
        back[t - 1] = np.argmax(cand, axis=0)
        score = cand.max(axis=0) + logp[t]
    path = np.zeros(t_len, dtype=int)
    path[-1] = int(np.argmax(score))
    for t in range(t_len - 2, -1, -1):
        path[t] = back[t, path[t + 1]]
    return path


@dataclass
class PseudoResiduals:
    """One-step-ahead PIT residuals; standard normal under a correct model."""

    values: np.ndarray
    n_clamped: int

    def ks_statistic(self) -> tuple[float, float]:
        from scipy import stats

        result = stats.kstest(self.values, "norm")
        return float(result.statistic), float(result.pvalue)


def pseudo_residuals(fitted: FittedModel, data: TimeSeriesFrame) -> PseudoResiduals:
    """Probability-integral-transform residuals of one-step forecasts.

    The conditional CDF of ``y_t`` given the past is the mixture of
    state-wise CDFs weighted by the normalized forward predictive
    distribution; its normal quantile should be iid standard normal for
    a correctly specified model.
    """
    engine = fitted.engine(data)
    weights = engine.forward_weights(fitted.theta)
    values = engine.parameter_values(fitted.theta)
    mix = np.zeros(len(data))
    for i in range(engine.n_states):
        params = tuple(values[p][:, i] for p in engine.family.parameter_names)
        mix += weights[:, i] * families.cdf(engine.family, engine.y, params)
    clamped = int(np.sum((mix < _CDF_CLAMP) | (mix > 1.0 - _CDF_CLAMP)))
    mix = np.clip(mix, _CDF_CLAMP, 1.0 - _CDF_CLAMP)
    return PseudoResiduals(values=special.ndtri(mix), n_clamped=clamped)


@dataclass
class ParameterCurves:
    """Per-state parameter curves on a covariate grid."""

    parameters: dict[str, np.ndarray]  # each (G, N), inverse-link scale
    quantiles: dict[float, np.ndarray] | None = None  # each (G, N), response scale


def predict_parameters(
    fitted: FittedModel,
    grid: Mapping[str, np.ndarray],
    quantiles: Sequence[float] | None = None,
) -> ParameterCurves:
    """Evaluate fitted parameter curves (and optional conditional response
    quantiles) on a covariate grid; refuses points outside the training
    range of any smooth term."""
    structure = fitted.structure
    lengths = {len(np.atleast_1d(v)) for v in grid.values()}
    if len(lengths) != 1:
        raise ConfigError("grid covariate arrays must share one length")
    n_rows = lengths.pop()
    data = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in grid.items()}
    curves: dict[str, np.ndarray] = {}
    for k, parameter in enumerate(structure.family.parameter_names):
        design = structure.dist_layouts[parameter].evaluate(data, n_rows=n_rows)
        cols = [
            design @ fitted.theta[structure.dist_slices[(parameter, i)]]
            for i in range(structure.n_states)
        ]
        curves[parameter] = structure.family.links[k].inverse(np.stack(cols, axis=1))
    quantile_curves = None
    if quantiles is not None:
        quantile_curves = {}
        for p in quantiles:
            out = np.empty((n_rows, structure.n_states))
            for i in range(structure.n_states):
                params = tuple(
                    curves[name][:, i] for name in structure.family.parameter_names
                )
                out[:, i] = families.quantile(structure.family, p, params)
            quantile_curves[float(p)] = out
    return ParameterCurves(parameters=curves, quantiles=quantile_curves)
