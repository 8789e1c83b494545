import numpy as np
import pytest

from msgamlss.exceptions import ConfigError, ParameterError
from msgamlss.markov import stationary
from msgamlss.sim import (
    DGPSpec,
    benchmark_dgp,
    simulate,
    uniform_generator,
    with_separation,
)


class TestBenchmarkDgp:
    def test_state_parameter_values_at_zero(self):
        dgp = benchmark_dgp()
        x0 = {"x": np.array([0.0])}
        assert dgp.state_parameters[0]["mu"](x0)[0] == 0.0
        assert np.log(dgp.state_parameters[0]["sigma"](x0)[0]) == pytest.approx(-0.5)
        assert dgp.state_parameters[1]["mu"](x0)[0] == -1.0
        assert dgp.state_parameters[1]["sigma"](x0)[0] == pytest.approx(1.0)

    def test_transition_polynomials(self):
        dgp = benchmark_dgp()
        z = {"z": np.array([0.0, 1.0, -1.0])}
        eta12 = dgp.transition_etas[(0, 1)](z)
        eta21 = dgp.transition_etas[(1, 0)](z)
        np.testing.assert_allclose(eta12, [-1.8, -2.3, -5.3])
        np.testing.assert_allclose(eta21, [-2.1, -5.1, -1.1])

    def test_defaults(self):
        dgp = benchmark_dgp()
        assert dgp.n_obs == 4000
        assert dgp.initial == (0.5, 0.5)
        assert dgp.family == "normal"


class TestSimulate:
    def test_deterministic_per_seed(self):
        dgp = benchmark_dgp(n_obs=500)
        frame_a, states_a = simulate(dgp, seed=9)
        frame_b, states_b = simulate(dgp, seed=9)
        np.testing.assert_array_equal(frame_a.response, frame_b.response)
        np.testing.assert_array_equal(states_a, states_b)
        for name in frame_a.covariates:
            np.testing.assert_array_equal(
                frame_a.covariates[name], frame_b.covariates[name]
            )
        frame_c, _ = simulate(dgp, seed=10)
        assert not np.array_equal(frame_a.response, frame_c.response)

    def test_shapes_and_state_range(self):
        frame, states = simulate(benchmark_dgp(n_obs=300), seed=1)
        assert len(frame) == 300 and states.shape == (300,)
        assert set(np.unique(states)) <= {0, 1}
        assert set(frame.covariates) == {"x", "z"}

    def test_transition_frequency_matches_logistic(self):
        # empirical switching frequency out of state 1 near z = 0
        frame, states = simulate(benchmark_dgp(n_obs=1_000_000), seed=4)
        z = frame.covariates["z"]
        from_state = states[:-1]
        switched = states[1:] != states[:-1]
        near_zero = np.abs(z[:-1]) < 0.05
        mask = (from_state == 0) & near_zero
        frequency = switched[mask].mean()
        target = 1.0 / (1.0 + np.exp(1.8))
        assert frequency == pytest.approx(target, abs=0.003)

    def test_long_run_state_proportions(self):
        # the chain's marginal state distribution converges to the
        # stationary vector of the z-averaged transition matrix
        frame, states = simulate(benchmark_dgp(n_obs=1_000_000), seed=8)
        zs = np.linspace(-0.999, 0.999, 4001)
        eta12 = -1.8 + 1.5 * zs - 2.0 * zs**2
        eta21 = -2.1 - 2.0 * zs - 1.0 * zs**2
        g12 = 1.0 / (1.0 + np.exp(-eta12))
        g21 = 1.0 / (1.0 + np.exp(-eta21))
        avg = np.array(
            [[1 - g12.mean(), g12.mean()], [g21.mean(), 1 - g21.mean()]]
        )
        pi = stationary(avg)
        # inflate the binomial SE by the chain's integrated autocorrelation
        lam2 = 1.0 - avg[0, 1] - avg[1, 0]
        n_eff = len(states) * (1 - lam2) / (1 + lam2)
        se = np.sqrt(pi[0] * pi[1] / n_eff)
        assert (states == 0).mean() == pytest.approx(pi[0], abs=3 * se)

    def test_invalid_sigma_names_time_point(self):
        dgp = benchmark_dgp(n_obs=50)
        bad = dict(dgp.state_parameters[0])
        bad["sigma"] = lambda c: c["x"]  # negative for x < 0
        dgp = DGPSpec(
            n_states=2,
            family="normal",
            initial=dgp.initial,
            covariates=dgp.covariates,
            state_parameters=(bad, dgp.state_parameters[1]),
            transition_etas=dgp.transition_etas,
            n_obs=50,
        )
        with pytest.raises(ParameterError, match=r"t=\d+"):
            simulate(dgp, seed=0)

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            DGPSpec(n_states=2, initial=(0.5, 0.6), state_parameters=({}, {}))
        with pytest.raises(ConfigError, match="missing parameter"):
            DGPSpec(
                n_states=1,
                initial=(1.0,),
                state_parameters=({"mu": lambda c: 0.0},),
            )
        good = {
            "mu": lambda c: np.zeros(1),
            "sigma": lambda c: np.ones(1),
        }
        with pytest.raises(ConfigError, match="off-diagonal"):
            DGPSpec(
                n_states=2,
                initial=(0.5, 0.5),
                state_parameters=(good, good),
                transition_etas={(0, 1): lambda c: 0.0},
            )

    def test_single_state_series(self):
        dgp = DGPSpec(
            n_states=1,
            initial=(1.0,),
            covariates={"x": uniform_generator()},
            state_parameters=(
                {"mu": lambda c: 2 * c["x"], "sigma": lambda c: np.full_like(c["x"], 0.5)},
            ),
            n_obs=200,
        )
        frame, states = simulate(dgp, seed=3)
        assert (states == 0).all()
        assert len(frame) == 200


def test_with_separation_shifts_first_state_mean():
    dgp = benchmark_dgp(n_obs=10)
    shifted = with_separation(dgp, 4.0)
    x = {"x": np.array([-0.3, 0.5])}
    np.testing.assert_allclose(
        shifted.state_parameters[0]["mu"](x),
        dgp.state_parameters[0]["mu"](x) + 4.0,
    )
    np.testing.assert_allclose(
        shifted.state_parameters[1]["mu"](x), dgp.state_parameters[1]["mu"](x)
    )
