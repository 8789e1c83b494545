"""Penalized-likelihood optimization and automatic smoothness selection.

The inner problem (fixed smoothing parameters) is solved by L-BFGS-B on
the compiled penalized objective, followed by Newton polishing steps with
the exact penalized Hessian until the gradient tolerance is met. The
outer loop alternates inner fits with multiplicative updates of each
smoothing parameter,

    lambda_p <- lambda_p * (rank(S_p)/lambda_p - tr(H^-1 S~_p)) / (b_p' S_p b_p),

whose fixed point is the stationarity condition of the Laplace-
approximate restricted likelihood in lambda_p. Smoothing parameters are
initialized large, so the first fit is heavily regularized and stable,
and every subsequent fit is warm-started from the previous estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .data import TimeSeriesFrame
from .exceptions import ConfigError, FitError
from .inference import FitDiagnostics, FittedModel, Likelihood
from .model import ModelStructure

_BIG = 1e15
_UPDATE_EPS = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    """Tolerances and limits for the two-level optimization."""

    gradient_tol: float = 1e-6
    max_inner: int = 500
    outer_tol: float = 1e-3
    max_outer: int = 50
    initial_lambda: float = 1e4
    lambda_bounds: tuple[float, float] = (1e-8, 1e8)
    multi_start: bool = False
    multi_start_draws: int = 5
    multi_start_scale: float = 0.25
    multi_start_seed: int = 0

    def __post_init__(self):
        if self.gradient_tol <= 0 or self.outer_tol <= 0:
            raise ConfigError("tolerances must be positive")
        lo, hi = self.lambda_bounds
        if not 0 < lo < hi:
            raise ConfigError("lambda bounds must satisfy 0 < lower < upper")
        if not lo <= self.initial_lambda <= hi:
            raise ConfigError("initial lambda must lie within the bounds")


@dataclass
class InnerFit:
    theta: np.ndarray
    value: float
    grad_norm: float
    n_iterations: int
    converged: bool


def nearest_positive_definite(h: np.ndarray) -> tuple[np.ndarray, float | None]:
    """Symmetrize and, if the spectrum is not safely positive, floor it.

    The floor (1e-12 of the largest eigenvalue) only activates for
    indefinite or numerically singular matrices; well-conditioned
    Hessians pass through untouched."""
    h = 0.5 * (h + h.T)
    eigvals, eigvecs = np.linalg.eigh(h)
    floor = max(1e-12 * float(eigvals.max()), 1e-300)
    if eigvals.min() >= floor:
        return h, None
    clipped = np.clip(eigvals, floor, None)
    return (eigvecs * clipped) @ eigvecs.T, floor


def initial_theta(structure: ModelStructure, y: np.ndarray) -> np.ndarray:
    """Deterministic starting point.

    State intercepts come from quantile bands of the response (state i
    takes the mean/sd of the i-th band, pushed through the links), spline
    coefficients start at zero, and transition intercepts put 0.9 on the
    t.p.m. diagonal.
    """
    theta = np.zeros(structure.n_coef)
    n_states = structure.n_states
    bands = np.array_split(np.sort(np.asarray(y, dtype=float)), n_states)
    overall_sd = float(np.std(y))
    for i, band in enumerate(bands):
        center = float(np.mean(band)) if band.size else 0.0
        spread = float(np.std(band)) if band.size else overall_sd
        spread = max(spread, 1e-3 * max(overall_sd, 1.0))
        for k, parameter in enumerate(structure.family.parameter_names):
            sl = structure.dist_slices[(parameter, i)]
            if k == 0:
                theta[sl.start] = structure.family.links[0].forward(center)
            elif k == 1:
                theta[sl.start] = structure.family.links[1].forward(spread)
            else:
                theta[sl.start] = 0.0
    if n_states > 1:
        eta0 = float(np.log((0.1 / (n_states - 1)) / 0.9))
        for pair in structure.pairs:
            theta[structure.trans_slices[pair].start] = eta0
    return theta


def _name_offending_block(engine: Likelihood, theta: np.ndarray) -> str:
    structure = engine.structure
    for key, sl in structure.dist_slices.items():
        eta = engine.xs[structure.family.parameter_names.index(key[0])] @ theta[sl]
        if not np.all(np.isfinite(eta)):
            return f"{key[0]}[{key[1] + 1}]"
    for idx, pair in enumerate(structure.pairs):
        eta = engine.xz[idx] @ theta[structure.trans_slices[pair]]
        if not np.all(np.isfinite(eta)):
            return f"transition[{pair[0] + 1}->{pair[1] + 1}]"
    return "likelihood"


def _fit_inner(engine: Likelihood, lam, theta0, config: OptimizerConfig) -> InnerFit:
    """Minimize the penalized objective at fixed lambda (never raises on
    non-convergence; the caller decides)."""
    theta0 = np.asarray(theta0, dtype=float)
    value0, grad0 = engine.value_and_grad(theta0, lam)
    if not np.isfinite(value0):
        raise FitError(
            "penalized objective is not finite at the starting point "
            f"(block {_name_offending_block(engine, theta0)})",
            theta=theta0,
            grad_norm=np.inf,
        )

    def fun(theta):
        value, grad = engine.value_and_grad(theta, lam)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return _BIG, np.zeros_like(theta)
        return value, grad

    # a short L-BFGS-B leg reaches the basin cheaply before Newton takes over
    result = optimize.minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": min(150, config.max_inner),
            "maxcor": 30,
            "ftol": 1e-14,
            "gtol": 1e-2,
        },
    )
    theta = np.asarray(result.x, dtype=float)
    value, grad = engine.value_and_grad(theta, lam)
    if value0 < value:  # optimizer wandered; keep the better point
        theta, value, grad = theta0, value0, grad0
    n_iter = int(result.nit)
    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0

    # damped Newton with the exact penalized Hessian owns the remaining
    # digits; the quasi-Newton line search alone crawls on these scales
    newton = 0
    newton_budget = max(config.max_inner - n_iter, 10)
    while grad_norm > config.gradient_tol and newton < newton_budget:
        h_pd, _ = nearest_positive_definite(engine.hessian(theta, lam))
        step = -np.linalg.solve(h_pd, grad)
        alpha, accepted = 1.0, False
        while alpha >= 1e-10:
            cand = theta + alpha * step
            cand_value, cand_grad = engine.value_and_grad(cand, lam)
            cand_norm = (
                float(np.max(np.abs(cand_grad))) if np.all(np.isfinite(cand_grad)) else np.inf
            )
            if np.isfinite(cand_value) and (
                cand_value <= value + 1e-12 * (1 + abs(value)) or cand_norm < grad_norm
            ):
                theta, value, grad, grad_norm = cand, cand_value, cand_grad, cand_norm
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        newton += 1
        n_iter += 1

    return InnerFit(
        theta=theta,
        value=float(value),
        grad_norm=grad_norm,
        n_iterations=n_iter,
        converged=grad_norm <= config.gradient_tol,
    )


def fit_penalized(spec_or_engine, data: TimeSeriesFrame | None = None, *,
                  lam=None, theta_init=None,
                  config: OptimizerConfig | None = None) -> InnerFit:
    """Penalized maximum-likelihood fit at fixed smoothing parameters.

    Raises
    ------
    FitError
        If the gradient tolerance is not reached within the iteration
        budget; the error carries the best point and its gradient norm.
    """
    config = config or OptimizerConfig()
    engine = _as_engine(spec_or_engine, data)
    if lam is None:
        lam = np.full(engine.structure.n_penalties, config.initial_lambda)
    lo, hi = config.lambda_bounds
    lam = np.clip(engine._check_lambda(lam), lo, hi)
    if theta_init is None:
        theta_init = initial_theta(engine.structure, engine.y)
    fit = _fit_inner(engine, lam, theta_init, config)
    if not fit.converged:
        raise FitError(
            f"no convergence after {fit.n_iterations} iterations "
            f"(gradient norm {fit.grad_norm:.3e} > {config.gradient_tol:g})",
            theta=fit.theta,
            grad_norm=fit.grad_norm,
        )
    return fit


def _as_engine(spec_or_engine, data) -> Likelihood:
    if isinstance(spec_or_engine, Likelihood):
        return spec_or_engine
    if data is None:
        raise ConfigError("data is required when passing a ModelSpec")
    structure = ModelStructure(
        spec_or_engine, data.covariates, response_name=data.response_name
    )
    return Likelihood(structure, data)


def penalized_hessian(spec_or_engine, theta, lam,
                      data: TimeSeriesFrame | None = None) -> np.ndarray:
    """Hessian of the penalized objective, floored to positive definite
    (with a diagnostics warning) when indefinite."""
    engine = _as_engine(spec_or_engine, data)
    h = engine.hessian(theta, lam)
    h_pd, floor = nearest_positive_definite(h)
    if floor is not None:
        import warnings

        warnings.warn(
            f"penalized Hessian is not positive definite; eigenvalues floored at {floor:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return h_pd


def _update_lambda(structure: ModelStructure, theta, lam, h_pd, bounds):
    """One multiplicative smoothing-parameter update (unclipped factors)."""
    h_inv = np.linalg.inv(h_pd)
    lo, hi = bounds
    new = np.empty_like(lam)
    for p, block in enumerate(structure.penalties):
        b = theta[block.sl]
        s_p = block.penalty
        trace = float(np.trace(h_inv[block.sl, block.sl] @ s_p))
        numerator = max(_UPDATE_EPS, block.rank / lam[p] - trace)
        denominator = max(_UPDATE_EPS, float(b @ s_p @ b))
        new[p] = np.clip(lam[p] * numerator / denominator, lo, hi)
    return new


def _extend_steps(lam, lam_new, log_factor, prev_direction, extension, bounds):
    """Accelerate monotone lambda moves by extending repeated steps.

    The base multiplicative update can crawl when a smoothing parameter
    has to travel orders of magnitude (e.g. toward an effectively linear
    fit). Repeating steps in the same direction double the applied
    exponent (capped), which leaves the update's fixed points untouched
    but reaches them in far fewer outer iterations.
    """
    lo, hi = bounds
    direction = np.sign(log_factor)
    same = (direction == prev_direction) & (np.abs(log_factor) > 1e-4)
    extension = np.where(same, np.minimum(extension * 2.0, 8.0), 1.0)
    extended = np.clip(lam * np.exp(log_factor * extension), lo, hi)
    return extended, direction, extension


def _multi_start_thetas(theta0: np.ndarray, config: OptimizerConfig) -> list[np.ndarray]:
    starts = [theta0]
    if config.multi_start:
        rng = np.random.default_rng(config.multi_start_seed)
        for _ in range(config.multi_start_draws):
            jitter = config.multi_start_scale * rng.standard_normal(theta0.shape)
            starts.append(theta0 + jitter * (1.0 + np.abs(theta0)))
    return starts


def select_smoothness(spec_or_engine, data: TimeSeriesFrame | None = None, *,
                      config: OptimizerConfig | None = None,
                      theta_init=None, lambda_init=None) -> FittedModel:
    """Joint estimation of coefficients and smoothing parameters.

    Alternates warm-started penalized fits with multiplicative smoothing
    updates until the relative lambda change drops below the outer
    tolerance. With no smooth terms this reduces to a single penalized
    fit. States are relabeled afterwards so that scale intercepts are
    ascending (skipped for asymmetric specifications).
    """
    config = config or OptimizerConfig()
    engine = _as_engine(spec_or_engine, data)
    structure = engine.structure
    lo, hi = config.lambda_bounds

    theta = (
        np.asarray(theta_init, dtype=float)
        if theta_init is not None
        else initial_theta(structure, engine.y)
    )
    n_pen = structure.n_penalties
    lam = (
        np.clip(np.asarray(lambda_init, dtype=float), lo, hi)
        if lambda_init is not None
        else np.full(n_pen, np.clip(config.initial_lambda, lo, hi))
    )
    engine._check_lambda(lam)

    diagnostics = FitDiagnostics()
    warnings_list = diagnostics.warnings
    trajectory = diagnostics.lambda_trajectory
    trajectory.append(list(map(float, lam)))

    best: InnerFit | None = None
    for start_idx, start in enumerate(_multi_start_thetas(theta, config)):
        try:
            candidate = _fit_inner(engine, lam, start, config)
        except FitError:
            if start_idx == 0:
                raise
            continue
        if best is None or candidate.value < best.value:
            best = candidate
    fit = best
    if not fit.converged:
        warnings_list.append(
            f"initial fit not converged (gradient norm {fit.grad_norm:.3e})"
        )
    n_inner = fit.n_iterations
    theta = fit.theta

    outer = 0
    h_pd = None
    h_current = False  # True when h_pd matches the current (theta, lam)
    if n_pen > 0:
        converged_outer = False
        prev_direction = np.zeros(n_pen)
        extension = np.ones(n_pen)
        for outer in range(1, config.max_outer + 1):
            if outer > 1:
                fit = _fit_inner(engine, lam, theta, config)
                n_inner += fit.n_iterations
                theta = fit.theta
                if not fit.converged:
                    warnings_list.append(
                        f"inner fit at outer iteration {outer} not converged "
                        f"(gradient norm {fit.grad_norm:.3e})"
                    )
            h_raw = engine.hessian(theta, lam)
            h_pd, floor = nearest_positive_definite(h_raw)
            if floor is not None:
                warnings_list.append(
                    f"outer iteration {outer}: Hessian floored at {floor:.3e}"
                )
            lam_new = _update_lambda(structure, theta, lam, h_pd, (lo, hi))
            at_bound = (lam_new <= lo * (1 + 1e-12)) | (lam_new >= hi * (1 - 1e-12))
            if at_bound.any():
                clamped = [
                    structure.penalties[p].name for p in range(n_pen) if at_bound[p]
                ]
                message = "smoothing parameter at bound: " + ", ".join(clamped)
                if message not in warnings_list:
                    warnings_list.append(message)
            # convergence is judged on the update's own fixed point
            rel_change = float(np.max(np.abs(lam_new - lam) / np.maximum(lam, lo)))
            if rel_change < config.outer_tol:
                converged_outer = True
                h_current = True
                break
            log_factor = np.log(np.maximum(lam_new, lo)) - np.log(np.maximum(lam, lo))
            lam, prev_direction, extension = _extend_steps(
                lam, lam_new, log_factor, prev_direction, extension, (lo, hi)
            )
            trajectory.append(list(map(float, lam)))
        if not converged_outer:
            warnings_list.append(
                f"smoothness selection stopped at max_outer={config.max_outer}"
            )
            fit = _fit_inner(engine, lam, theta, config)
            n_inner += fit.n_iterations
            theta = fit.theta

    if not h_current:
        h_raw = engine.hessian(theta, lam)
        h_pd, floor = nearest_positive_definite(h_raw)
        if floor is not None:
            warnings_list.append(f"final Hessian floored at {floor:.3e}")

    # deterministic state labels: scale intercepts ascending
    if structure.n_states > 1 and structure.can_relabel():
        scale_name = structure.family.parameter_names[1]
        intercepts = [
            theta[structure.dist_slices[(scale_name, i)].start]
            for i in range(structure.n_states)
        ]
        perm = list(np.argsort(intercepts, kind="stable"))
        if perm != list(range(structure.n_states)):
            theta_idx, lam_idx = structure.relabel_index(perm)
            theta = theta[theta_idx]
            lam = lam[lam_idx]
            h_pd = h_pd[np.ix_(theta_idx, theta_idx)]
            diagnostics.state_order = [int(p) for p in perm]

    value, grad = engine.value_and_grad(theta, lam)
    diagnostics.converged = fit.converged
    diagnostics.n_outer = outer
    diagnostics.n_inner_total = n_inner
    diagnostics.grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    diagnostics.penalized_nll = float(value)

    return FittedModel(
        structure=structure,
        theta=theta,
        lam=lam,
        hessian=h_pd,
        log_lik=engine.log_likelihood(theta),
        diagnostics=diagnostics,
    )
