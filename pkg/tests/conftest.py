import numpy as np
import pytest

from msgamlss.data import TimeSeriesFrame
from msgamlss.model import LinearTerm, ModelSpec, Predictor, as_initial
from msgamlss.splines import SmoothSpec


def random_frame(rng, n_obs, covariate_names=("x", "z")):
    covariates = {name: rng.uniform(-1, 1, size=n_obs) for name in covariate_names}
    return TimeSeriesFrame(response=rng.normal(size=n_obs), covariates=covariates)


def small_spec(n_states=2, family="normal", smooth_k=5, initial="uniform"):
    """A compact spec with smooth + linear terms for oracle-sized tests."""
    predictors = {
        "mu": Predictor((SmoothSpec("x", num_basis=smooth_k, degree=2),)),
        "sigma": Predictor((LinearTerm("x"),)),
    }
    if family != "normal":
        predictors["nu"] = Predictor((LinearTerm("x"),))
    return ModelSpec(
        n_states=n_states,
        family=family,
        predictors=predictors,
        transition=Predictor((LinearTerm("z"),)),
        initial=as_initial(initial),
    )


def random_theta(rng, n_coef, scale=0.3):
    return scale * rng.standard_normal(n_coef)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
