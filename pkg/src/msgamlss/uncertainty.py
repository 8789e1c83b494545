"""Fisher-information-based posterior sampling and pointwise bands.

Parameter uncertainty is summarized by Gaussian draws centered at the
penalized estimate with covariance equal to the inverse penalized
Hessian (smoothing parameters held fixed). Curves of interest (effects,
transition probabilities, stationary distributions) are evaluated per
draw and summarized by empirical pointwise quantiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import linalg

from .exceptions import ConfigError, NumericError
from .inference import FittedModel
from .markov import stationary_many, tpm_from_eta

logger = logging.getLogger(__name__)


@dataclass
class PosteriorSampleSet:
    """Gaussian parameter draws around the penalized estimate."""

    draws: np.ndarray  # (R, dim)
    seed: int

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


@dataclass
class CurveBand:
    """Pointwise estimate and quantile band along a covariate grid."""

    grid: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_dropped: np.ndarray | None = None


def sample_posterior(fitted: FittedModel, n_draws: int = 1000,
                     seed: int = 0) -> PosteriorSampleSet:
    """Draw from N(theta_hat, H^-1); deterministic per seed."""
    if n_draws < 1:
        raise ConfigError("n_draws must be >= 1")
    h = fitted.hessian
    try:
        chol = np.linalg.cholesky(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "penalized Hessian is not positive definite; cannot sample"
        ) from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_draws, len(fitted.theta)))
    # cov(L^-T z) = (L L^T)^-1 = H^-1
    draws = fitted.theta + linalg.solve_triangular(chol.T, z.T, lower=False).T
    return PosteriorSampleSet(draws=draws, seed=seed)


def _band_quantiles(curves: np.ndarray, level: float, axis: int = 1):
    if not 0 < level <= 1:
        raise ConfigError("level must lie in (0, 1]")
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(curves, alpha, axis=axis)
    upper = np.quantile(curves, 1.0 - alpha, axis=axis)
    return lower, upper


def effect_band(fitted: FittedModel, samples: PosteriorSampleSet, parameter: str,
                state: int, grid: Mapping[str, np.ndarray],
                level: float = 0.95) -> CurveBand:
    """Band for one state's parameter curve on the inverse-link scale.

    ``state`` is 0-based; ``grid`` maps covariate names to equal-length
    arrays covering every covariate of the parameter's predictor.
    """
    structure = fitted.structure
    if parameter not in structure.family.parameter_names:
        raise ConfigError(
            f"unknown parameter '{parameter}' for family '{structure.family.name}'"
        )
    if not 0 <= state < structure.n_states:
        raise ConfigError(f"state index {state} out of range")
    k = structure.family.parameter_names.index(parameter)
    layout = structure.dist_layouts[parameter]
    data = {key: np.atleast_1d(np.asarray(v, dtype=float)) for key, v in grid.items()}
    n_rows = len(next(iter(data.values()))) if data else 1
    design = layout.evaluate(data, n_rows=n_rows)
    sl = structure.dist_slices[(parameter, state)]
    link = structure.family.links[k]
    # quantiles commute with the monotone inverse link, and the linear
    # predictor scale cannot overflow the way e.g. exp() can
    curves = design @ samples.draws[:, sl].T  # (G, R)
    estimate = link.inverse(design @ fitted.theta[sl])
    lower, upper = _band_quantiles(curves, level)
    first = next(iter(data.values())) if data else np.zeros(n_rows)
    with np.errstate(over="ignore"):  # an infinite band edge is meaningful
        return CurveBand(
            grid=first,
            estimate=estimate,
            lower=link.inverse(lower),
            upper=link.inverse(upper),
        )


def _eta_draws(fitted: FittedModel, draws: np.ndarray,
               data: Mapping[str, np.ndarray], n_rows: int) -> np.ndarray:
    """Transition predictors per draw and grid point, shape (R, G, N, N)."""
    structure = fitted.structure
    n = structure.n_states
    eta = np.zeros((draws.shape[0], n_rows, n, n))
    for pair in structure.pairs:
        design = structure.trans_layouts[pair].evaluate(data, n_rows=n_rows)
        sl = structure.trans_slices[pair]
        eta[:, :, pair[0], pair[1]] = (design @ draws[:, sl].T).T
    return eta


def transition_band(fitted: FittedModel, samples: PosteriorSampleSet, target,
                    z: Mapping[str, np.ndarray], level: float = 0.95) -> CurveBand:
    """Band for a transition probability or the stationary distribution.

    ``target`` is either a 0-based ordered pair ``(i, j)`` (band for
    ``gamma_ij(z)``) or ``("stationary", i)`` (band for the stationary
    probability of state ``i``). Draws whose chain is not ergodic at a
    grid point are dropped there, with counts reported.
    """
    structure = fitted.structure
    data = {key: np.atleast_1d(np.asarray(v, dtype=float)) for key, v in z.items()}
    lengths = {len(v) for v in data.values()}
    if len(lengths) != 1:
        raise ConfigError("transition covariate arrays must share one length")
    n_rows = lengths.pop()
    first = next(iter(data.values()))

    eta = _eta_draws(fitted, samples.draws, data, n_rows)
    gammas = tpm_from_eta(eta)  # (R, G, N, N)
    tm = fitted.transition_model()

    if isinstance(target, tuple) and target and target[0] == "stationary":
        state = int(target[1])
        if not 0 <= state < structure.n_states:
            raise ConfigError(f"state index {state} out of range")
        deltas, valid = stationary_many(gammas)  # (R, G, N), (R, G)
        estimate = tm.stationary_curve(data)[:, state]
        n_dropped = (~valid).sum(axis=0)
        if n_dropped.any():
            logger.warning(
                "stationary band: dropped %d non-ergodic draws across %d grid points",
                int(n_dropped.sum()),
                int((n_dropped > 0).sum()),
            )
        lower = np.empty(n_rows)
        upper = np.empty(n_rows)
        alpha = (1.0 - level) / 2.0
        if not 0 < level <= 1:
            raise ConfigError("level must lie in (0, 1]")
        for g in range(n_rows):
            ok = valid[:, g]
            if not ok.any():
                raise NumericError(
                    f"no ergodic posterior draws at grid point {g}; cannot form band"
                )
            column = deltas[ok, g, state]
            lower[g] = np.quantile(column, alpha)
            upper[g] = np.quantile(column, 1.0 - alpha)
        return CurveBand(
            grid=first, estimate=estimate, lower=lower, upper=upper, n_dropped=n_dropped
        )

    i, j = (int(target[0]), int(target[1]))
    if not (0 <= i < structure.n_states and 0 <= j < structure.n_states):
        raise ConfigError(f"invalid transition pair {target}")
    curves = gammas[:, :, i, j].T  # (G, R)
    estimate = tm.tpm_grid(data)[:, i, j]
    lower, upper = _band_quantiles(curves, level)
    return CurveBand(grid=first, estimate=estimate, lower=lower, upper=upper)
