import numpy as np
import pytest

from conftest import random_frame, random_theta, small_spec
from msgamlss.data import TimeSeriesFrame
from msgamlss.exceptions import ConfigError, NumericError
from msgamlss.inference import FitDiagnostics, FittedModel, build_engine
from msgamlss.model import ModelSpec, ModelStructure, Predictor
from msgamlss.smoothing import select_smoothness
from msgamlss.splines import SmoothSpec
from msgamlss.uncertainty import (
    PosteriorSampleSet,
    effect_band,
    sample_posterior,
    transition_band,
)


def make_fitted(rng, hessian=None, n_obs=60, theta_scale=0.3):
    spec = small_spec()
    frame = random_frame(rng, n_obs)
    engine = build_engine(spec, frame)
    theta = random_theta(rng, engine.structure.n_coef, scale=theta_scale)
    if hessian is None:
        hessian = np.eye(engine.structure.n_coef)
    return FittedModel(
        structure=engine.structure,
        theta=theta,
        lam=np.ones(engine.structure.n_penalties),
        hessian=hessian,
        log_lik=0.0,
        diagnostics=FitDiagnostics(),
    )


class TestSamplePosterior:
    def test_deterministic_per_seed(self, rng):
        fitted = make_fitted(rng)
        a = sample_posterior(fitted, n_draws=1, seed=123)
        b = sample_posterior(fitted, n_draws=1, seed=123)
        np.testing.assert_array_equal(a.draws, b.draws)
        c = sample_posterior(fitted, n_draws=1, seed=124)
        assert not np.array_equal(a.draws, c.draws)

    def test_identity_hessian_gives_identity_covariance(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=100_000, seed=0)
        cov = np.cov(samples.draws.T)
        np.testing.assert_allclose(cov, np.eye(len(fitted.theta)), atol=0.02)
        np.testing.assert_allclose(
            samples.draws.mean(axis=0), fitted.theta, atol=0.02
        )

    def test_linear_functional_variance(self, rng):
        dim_rng = np.random.default_rng(99)
        fitted = make_fitted(rng)
        dim = len(fitted.theta)
        a = dim_rng.standard_normal((dim, dim))
        hessian = a @ a.T + dim * np.eye(dim)
        fitted.hessian = hessian
        samples = sample_posterior(fitted, n_draws=100_000, seed=1)
        c = dim_rng.standard_normal(dim)
        target = c @ np.linalg.solve(hessian, c)
        empirical = np.var(samples.draws @ c)
        assert empirical == pytest.approx(target, rel=0.05)

    def test_mean_within_standard_errors(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=1000, seed=3)
        se = 1.0 / np.sqrt(1000)
        assert np.max(np.abs(samples.draws.mean(axis=0) - fitted.theta)) < 4 * se

    def test_non_pd_hessian_rejected(self, rng):
        fitted = make_fitted(rng)
        fitted.hessian = np.diag(np.r_[np.ones(len(fitted.theta) - 1), -1.0])
        with pytest.raises(NumericError):
            sample_posterior(fitted)

    def test_draw_count_validated(self, rng):
        with pytest.raises(ConfigError):
            sample_posterior(make_fitted(rng), n_draws=0)


class TestEffectBand:
    def test_band_contains_estimate(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=1500, seed=0)
        grid = fitted.structure.grid_frame("x", np.linspace(-0.8, 0.8, 40))
        band = effect_band(fitted, samples, "mu", 0, grid)
        inside = (band.lower <= band.estimate) & (band.estimate <= band.upper)
        assert inside.mean() >= 0.99

    def test_level_one_spans_min_max(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=50, seed=0)
        grid = fitted.structure.grid_frame("x", np.array([0.0]))
        band = effect_band(fitted, samples, "mu", 1, grid, level=1.0)
        sl = fitted.structure.dist_slices[("mu", 1)]
        design = fitted.structure.dist_layouts["mu"].evaluate(grid, n_rows=1)
        curves = design @ samples.draws[:, sl].T
        assert band.lower[0] == pytest.approx(curves.min())
        assert band.upper[0] == pytest.approx(curves.max())

    def test_zero_variance_block_zero_width(self, rng):
        fitted = make_fitted(rng)
        draws = np.tile(fitted.theta, (200, 1))
        draws += rng.standard_normal(draws.shape) * 0.5
        sl = fitted.structure.dist_slices[("mu", 0)]
        draws[:, sl] = fitted.theta[sl]  # freeze the mu[1] block
        samples = PosteriorSampleSet(draws=draws, seed=0)
        grid = fitted.structure.grid_frame("x", np.linspace(-0.5, 0.5, 11))
        band = effect_band(fitted, samples, "mu", 0, grid)
        np.testing.assert_allclose(band.upper - band.lower, 0.0, atol=1e-12)

    def test_monotone_nesting(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=800, seed=0)
        grid = fitted.structure.grid_frame("x", np.linspace(-0.8, 0.8, 15))
        narrow = effect_band(fitted, samples, "sigma", 0, grid, level=0.90)
        wide = effect_band(fitted, samples, "sigma", 0, grid, level=0.95)
        assert np.all(wide.lower <= narrow.lower + 1e-12)
        assert np.all(narrow.upper <= wide.upper + 1e-12)

    def test_unknown_parameter_and_state(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=10, seed=0)
        grid = fitted.structure.grid_frame("x", np.array([0.0]))
        with pytest.raises(ConfigError):
            effect_band(fitted, samples, "tau", 0, grid)
        with pytest.raises(ConfigError):
            effect_band(fitted, samples, "mu", 5, grid)


class TestTransitionBand:
    def test_constant_model_constant_bands(self, rng):
        spec = ModelSpec(n_states=2)  # intercept-only transitions
        frame = random_frame(rng, 50)
        engine = build_engine(spec, frame)
        fitted = FittedModel(
            structure=engine.structure,
            theta=random_theta(rng, engine.structure.n_coef),
            lam=np.zeros(0),
            hessian=np.eye(engine.structure.n_coef),
            log_lik=0.0,
            diagnostics=FitDiagnostics(),
        )
        samples = sample_posterior(fitted, n_draws=300, seed=0)
        z = {"x": np.linspace(-1, 1, 9)}  # any grid; predictors ignore it
        band = transition_band(fitted, samples, (0, 1), z)
        assert np.ptp(band.estimate) <= 1e-14
        assert np.ptp(band.lower) <= 1e-14 and np.ptp(band.upper) <= 1e-14

    def test_stationary_band_brackets_estimate(self, rng):
        fitted = make_fitted(rng, theta_scale=0.2)
        samples = sample_posterior(fitted, n_draws=1000, seed=0)
        grid = {"z": np.linspace(-0.8, 0.8, 25)}
        band = transition_band(fitted, samples, ("stationary", 0), grid)
        inside = (band.lower <= band.estimate) & (band.estimate <= band.upper)
        assert inside.mean() >= 0.99
        assert band.n_dropped is not None and band.n_dropped.sum() == 0

    def test_probabilities_within_unit_interval(self, rng):
        fitted = make_fitted(rng, theta_scale=0.5)
        samples = sample_posterior(fitted, n_draws=400, seed=2)
        grid = {"z": np.linspace(-0.9, 0.9, 15)}
        for target in [(0, 0), (0, 1), (1, 0), (1, 1), ("stationary", 1)]:
            band = transition_band(fitted, samples, target, grid)
            for arr in (band.estimate, band.lower, band.upper):
                assert arr.min() >= -1e-12 and arr.max() <= 1 + 1e-12

    def test_diagonal_entry_band(self, rng):
        fitted = make_fitted(rng)
        samples = sample_posterior(fitted, n_draws=200, seed=1)
        grid = {"z": np.array([0.0, 0.4])}
        band_diag = transition_band(fitted, samples, (0, 0), grid)
        band_off = transition_band(fitted, samples, (0, 1), grid)
        np.testing.assert_allclose(band_diag.estimate + band_off.estimate, 1.0, atol=1e-12)


@pytest.mark.slow
def test_band_width_shrinks_with_sample_size(rng):
    spec = ModelSpec(
        n_states=1, predictors={"mu": Predictor((SmoothSpec("x"),))}
    )
    widths = []
    for n_obs in (1000, 2000, 4000):
        sample_rng = np.random.default_rng(1234)
        x = sample_rng.uniform(-1, 1, n_obs)
        y = np.sin(2 * x) + 0.5 * sample_rng.standard_normal(n_obs)
        frame = TimeSeriesFrame(response=y, covariates={"x": x})
        fitted = select_smoothness(spec, frame)
        samples = sample_posterior(fitted, n_draws=500, seed=0)
        grid = {"x": np.linspace(-0.9, 0.9, 30)}
        band = effect_band(fitted, samples, "mu", 0, grid)
        widths.append(float(np.mean(band.upper - band.lower)))
    assert widths[0] > widths[1] > widths[2]
