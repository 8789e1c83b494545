import numpy as np
import pytest
from scipy import integrate

from msgamlss.exceptions import ConfigError, DomainError, ParameterError
from msgamlss.families import (
    LOG_LINK,
    LOGIT_LINK,
    NORMAL,
    SKEW_NORMAL,
    cdf,
    get_family,
    get_link,
    log_density,
    mean,
    quantile,
    sample,
)


def test_standard_normal_logdensity_at_zero():
    # -0.5 * log(2 pi)
    assert log_density(NORMAL, 0.0, (0.0, 1.0)) == pytest.approx(-0.9189385332046727)


def test_normal_logdensity_at_mode(rng):
    for _ in range(5):
        mu, sigma = rng.normal(), np.exp(rng.normal())
        assert log_density(NORMAL, mu, (mu, sigma)) == pytest.approx(
            -np.log(sigma) - 0.5 * np.log(2 * np.pi)
        )


def test_skew_normal_reduces_to_normal(rng):
    y = rng.normal(size=10) * 3
    got = log_density(SKEW_NORMAL, y, (0.5, 2.0, 0.0))
    want = log_density(NORMAL, y, (0.5, 2.0))
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_normal_median_is_mean():
    assert quantile(NORMAL, 0.5, (3.0, 2.0)) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("family", [NORMAL, SKEW_NORMAL])
def test_cdf_quantile_roundtrip(family, rng):
    for _ in range(100):
        mu = rng.normal() * 2
        sigma = np.exp(rng.normal() * 0.5)
        params = (mu, sigma) if family is NORMAL else (mu, sigma, rng.normal() * 2)
        y = mu + sigma * rng.normal()
        back = quantile(family, cdf(family, y, params), params)
        assert abs(back - y) <= 1e-8 * sigma


def test_skew_normal_cdf_matches_quadrature(rng):
    params = (0.3, 1.4, 2.5)
    grid = np.linspace(-4, 6, 50)

    def density(t):
        return np.exp(log_density(SKEW_NORMAL, t, params))

    for y in grid:
        reference, _ = integrate.quad(density, -np.inf, y)
        assert abs(cdf(SKEW_NORMAL, y, params) - reference) <= 1e-7


@pytest.mark.parametrize("family", [NORMAL, SKEW_NORMAL])
def test_density_integrates_to_one(family, rng):
    for _ in range(20):
        mu = rng.normal() * 3
        sigma = np.exp(rng.normal() * 0.7)
        params = (mu, sigma) if family is NORMAL else (mu, sigma, rng.normal() * 3)

        def density(t):
            return np.exp(log_density(family, t, params))

        total, _ = integrate.quad(density, mu - 12 * sigma, mu + 12 * sigma, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)


def test_log_density_smooth_in_parameters(rng):
    # finite-difference derivatives exist and are stable under step halving
    y = 0.7
    for family, params in ((NORMAL, [0.2, 1.3]), (SKEW_NORMAL, [0.2, 1.3, 1.1])):
        for k in range(len(params)):
            derivs = []
            for h in (1e-5, 5e-6):
                up = list(params)
                down = list(params)
                up[k] += h
                down[k] -= h
                derivs.append(
                    (log_density(family, y, up) - log_density(family, y, down)) / (2 * h)
                )
            assert np.isfinite(derivs).all()
            assert derivs[0] == pytest.approx(derivs[1], rel=1e-4, abs=1e-8)


def test_sampling_moments():
    rng = np.random.default_rng(7)
    n = 100_000
    draws = sample(NORMAL, (1.5, 2.0), rng, size=n)
    se_mean = 2.0 / np.sqrt(n)
    assert abs(draws.mean() - 1.5) < 4 * se_mean
    se_sd = 2.0 / np.sqrt(2 * n)
    assert abs(draws.std() - 2.0) < 4 * se_sd
    draws = sample(SKEW_NORMAL, (0.0, 1.0, 5.0), rng, size=n)
    analytic_mean = float(mean(SKEW_NORMAL, (0.0, 1.0, 5.0)))
    assert abs(draws.mean() - analytic_mean) < 4 * draws.std() / np.sqrt(n)


def test_sampling_deterministic_per_seed():
    a = sample(SKEW_NORMAL, (0.0, 1.0, 3.0), np.random.default_rng(3), size=5)
    b = sample(SKEW_NORMAL, (0.0, 1.0, 3.0), np.random.default_rng(3), size=5)
    np.testing.assert_array_equal(a, b)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        log_density(NORMAL, 0.0, (0.0, -1.0))
    with pytest.raises(ParameterError):
        log_density(NORMAL, 0.0, (0.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        quantile(NORMAL, 1.2, (0.0, 1.0))
    with pytest.raises(DomainError):
        quantile(SKEW_NORMAL, 0.0, (0.0, 1.0, 1.0))


def test_link_roundtrip():
    eta = np.linspace(-30, 30, 61)
    for link in (LOG_LINK, get_link("identity")):
        np.testing.assert_allclose(link.forward(link.inverse(eta)), eta, atol=1e-10)
    # the logit inverse saturates near 0/1; beyond |eta| ~ 14 the rounding
    # of p to float64 alone costs more than 1e-10, so test the range where
    # the roundtrip is representable at all
    eta = np.linspace(-14, 14, 57)
    np.testing.assert_allclose(
        LOGIT_LINK.forward(LOGIT_LINK.inverse(eta)), eta, atol=1e-10
    )


def test_get_family_names():
    assert get_family("skewnormal") is SKEW_NORMAL
    assert get_family("Skew-Normal") is SKEW_NORMAL
    assert get_family(NORMAL) is NORMAL
    with pytest.raises(ConfigError):
        get_family("gamma")
    assert SKEW_NORMAL.parameter_names == ("mu", "sigma", "nu")
    assert [link.kind for link in SKEW_NORMAL.links] == ["identity", "log", "identity"]
