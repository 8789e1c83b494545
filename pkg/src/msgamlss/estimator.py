"""Scikit-learn style estimator wrapping the full fitting pipeline."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from .config import parse_predictor, parse_transition
from .data import TimeSeriesFrame
from .exceptions import ConfigError
from .inference import (
    ParameterCurves,
    PseudoResiduals,
    predict_parameters,
    pseudo_residuals,
    viterbi,
)
from .model import ModelSpec, as_initial
from .smoothing import OptimizerConfig, select_smoothness
from .uncertainty import CurveBand, effect_band, sample_posterior, transition_band


def _as_frame(data, response=None) -> TimeSeriesFrame:
    if isinstance(data, TimeSeriesFrame):
        return data
    if isinstance(data, pd.DataFrame):
        if response is None:
            raise ConfigError("pass response= when fitting from a DataFrame")
        return TimeSeriesFrame.from_pandas(data, response)
    raise ConfigError(
        f"expected a TimeSeriesFrame or pandas DataFrame, got {type(data).__name__}"
    )


class MarkovSwitchingGAMLSS(BaseEstimator):
    """Markov-switching distributional regression with covariate-driven
    transition probabilities.

    Each distribution parameter of the response family gets an additive
    predictor (intercept plus optional linear and smooth terms) with
    state-specific coefficients, and every off-diagonal transition
    probability gets its own multinomial-logit predictor. Smoothness is
    selected automatically during :meth:`fit`.

    Parameters
    ----------
    n_states : int
        Number of hidden states.
    family : str
        Response family, ``"normal"`` or ``"skew-normal"``.
    mu, sigma, nu : term list or None
        Predictor terms per distribution parameter, e.g.
        ``["smooth(x)"]`` or ``["x", "smooth(z, k=12)"]``. ``None`` means
        intercept only.
    transition : term list, mapping, or None
        Terms shared by all off-diagonal transition predictors, or a
        mapping with 1-based keys like ``{"1->2": [...]}``.
    initial : str or sequence
        Initial state distribution: ``"uniform"``, ``"stationary"`` (at
        the first transition covariate row), or explicit probabilities.
    random_state : int
        Seed for the optional multi-start perturbations.

    Attributes
    ----------
    fitted_model_ : FittedModel
        Full fitted-model object (parameters, smoothing, Hessian).
    theta_, lambda_, log_likelihood_, hessian_, diagnostics_
        Convenience views of the fit results.

    Examples
    --------
    >>> from msgamlss import MarkovSwitchingGAMLSS
    >>> from msgamlss.sim import benchmark_dgp, simulate
    >>> frame, states = simulate(benchmark_dgp(n_obs=500), seed=1)
    >>> model = MarkovSwitchingGAMLSS(
    ...     n_states=2, mu=["smooth(x)"], sigma=["smooth(x)"],
    ...     transition=["smooth(z)"],
    ... ).fit(frame)
    >>> decoded = model.decode(frame)
    """

    def __init__(
        self,
        n_states: int = 2,
        family: str = "normal",
        mu=None,
        sigma=None,
        nu=None,
        transition=None,
        initial="uniform",
        gradient_tol: float = 1e-6,
        max_inner: int = 500,
        outer_tol: float = 1e-3,
        max_outer: int = 50,
        initial_lambda: float = 1e4,
        lambda_bounds: tuple[float, float] = (1e-8, 1e8),
        multi_start: bool = False,
        random_state: int = 0,
    ):
        self.n_states = n_states
        self.family = family
        self.mu = mu
        self.sigma = sigma
        self.nu = nu
        self.transition = transition
        self.initial = initial
        self.gradient_tol = gradient_tol
        self.max_inner = max_inner
        self.outer_tol = outer_tol
        self.max_outer = max_outer
        self.initial_lambda = initial_lambda
        self.lambda_bounds = lambda_bounds
        self.multi_start = multi_start
        self.random_state = random_state

    def build_spec(self) -> ModelSpec:
        predictors = {}
        for name, terms in (("mu", self.mu), ("sigma", self.sigma), ("nu", self.nu)):
            if terms is not None:
                predictors[name] = parse_predictor(terms)
        return ModelSpec(
            n_states=self.n_states,
            family=self.family,
            predictors=predictors,
            transition=parse_transition(self.transition),
            initial=as_initial(self.initial),
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            gradient_tol=self.gradient_tol,
            max_inner=self.max_inner,
            outer_tol=self.outer_tol,
            max_outer=self.max_outer,
            initial_lambda=self.initial_lambda,
            lambda_bounds=tuple(self.lambda_bounds),
            multi_start=self.multi_start,
            multi_start_seed=self.random_state,
        )

    def fit(self, data, response=None):
        """Estimate coefficients and smoothing parameters from a frame."""
        frame = _as_frame(data, response)
        spec = self.build_spec()
        self.fitted_model_ = select_smoothness(
            spec, frame, config=self.optimizer_config()
        )
        self.theta_ = self.fitted_model_.theta
        self.lambda_ = self.fitted_model_.lam
        self.hessian_ = self.fitted_model_.hessian
        self.log_likelihood_ = self.fitted_model_.log_lik
        self.diagnostics_ = self.fitted_model_.diagnostics
        self.n_parameters_ = self.fitted_model_.n_parameters
        return self

    def _check_fitted(self):
        if not hasattr(self, "fitted_model_"):
            raise ConfigError("this estimator is not fitted yet; call fit() first")
        return self.fitted_model_

    def decode(self, data, response=None) -> np.ndarray:
        """Most probable (Viterbi) state sequence, 0-based."""
        return viterbi(self._check_fitted(), _as_frame(data, response))

    def pseudo_residuals(self, data, response=None) -> PseudoResiduals:
        return pseudo_residuals(self._check_fitted(), _as_frame(data, response))

    def predict_parameters(
        self, grid: Mapping[str, np.ndarray], quantiles: Sequence[float] | None = None
    ) -> ParameterCurves:
        return predict_parameters(self._check_fitted(), grid, quantiles=quantiles)

    def log_likelihood(self, data, response=None) -> float:
        return self._check_fitted().log_likelihood(_as_frame(data, response))

    def score(self, data, response=None) -> float:
        """Log-likelihood of the data (sklearn scoring convention)."""
        return self.log_likelihood(data, response)

    def transition_curve(self, z) -> np.ndarray:
        """Transition matrices over a grid of transition covariates."""
        return self._check_fitted().transition_model().tpm_grid(z)

    def stationary_curve(self, z) -> np.ndarray:
        return self._check_fitted().transition_model().stationary_curve(z)

    def sample_posterior(self, n_draws: int = 1000, seed: int = 0):
        return sample_posterior(self._check_fitted(), n_draws=n_draws, seed=seed)

    def effect_band(self, parameter: str, state: int, grid, *, samples=None,
                    level: float = 0.95, n_draws: int = 1000, seed: int = 0) -> CurveBand:
        fitted = self._check_fitted()
        if samples is None:
            samples = sample_posterior(fitted, n_draws=n_draws, seed=seed)
        return effect_band(fitted, samples, parameter, state, grid, level=level)

    def transition_band(self, target, z, *, samples=None, level: float = 0.95,
                        n_draws: int = 1000, seed: int = 0) -> CurveBand:
        fitted = self._check_fitted()
        if samples is None:
            samples = sample_posterior(fitted, n_draws=n_draws, seed=seed)
        return transition_band(fitted, samples, target, z, level=level)

    def save(self, path) -> None:
        self._check_fitted().save(path)

    @classmethod
    def from_fitted(cls, fitted) -> "MarkovSwitchingGAMLSS":
        """Wrap an existing :class:`FittedModel` (e.g. loaded from disk)."""
        spec = fitted.spec
        estimator = cls(n_states=spec.n_states, family=spec.family)
        estimator.fitted_model_ = fitted
        estimator.theta_ = fitted.theta
        estimator.lambda_ = fitted.lam
        estimator.hessian_ = fitted.hessian
        estimator.log_likelihood_ = fitted.log_lik
        estimator.diagnostics_ = fitted.diagnostics
        estimator.n_parameters_ = fitted.n_parameters
        return estimator
