"""State-dependent response distributions and parameter link functions.

Two families are shipped: the normal distribution (mu, sigma) and the
skew-normal in its direct parametrization (location mu, scale sigma,
shape nu), whose density is ``2/sigma * phi(z) * Phi(nu * z)`` with
``z = (y - mu)/sigma``. For ``nu = 0`` the skew-normal reduces exactly
to the normal. The abstraction carries an ordered tuple of parameter
slots so that four-parameter families fit the same interface, but none
is currently implemented.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from .exceptions import ConfigError, ParameterError
from .validation import check_probability

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LinkFn:
    """Monotone link mapping a distribution parameter to the real line."""

    kind: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    inverse_deriv: Callable[[np.ndarray], np.ndarray]


IDENTITY_LINK = LinkFn(
    "identity",
    forward=lambda x: np.asarray(x, dtype=float),
    inverse=lambda eta: np.asarray(eta, dtype=float),
    inverse_deriv=lambda eta: np.ones_like(np.asarray(eta, dtype=float)),
)

LOG_LINK = LinkFn("log", forward=np.log, inverse=np.exp, inverse_deriv=np.exp)

LOGIT_LINK = LinkFn(
    "logit",
    forward=special.logit,
    inverse=special.expit,
    inverse_deriv=lambda eta: special.expit(eta) * (1.0 - special.expit(eta)),
)

_LINKS = {link.kind: link for link in (IDENTITY_LINK, LOG_LINK, LOGIT_LINK)}


def get_link(kind: str) -> LinkFn:
    try:
        return _LINKS[kind]
    except KeyError:
        raise ConfigError(f"unknown link function '{kind}'") from None


@dataclass(frozen=True)
class Family:
    """A response distribution with named parameters and links."""

    name: str
    parameter_names: tuple[str, ...]
    links: tuple[LinkFn, ...]

    def __post_init__(self):
        if len(self.links) != len(self.parameter_names):
            raise ConfigError(
                f"family '{self.name}': got {len(self.links)} links for "
                f"{len(self.parameter_names)} parameters"
            )

    @property
    def n_parameters(self) -> int:
        return len(self.parameter_names)


NORMAL = Family("normal", ("mu", "sigma"), (IDENTITY_LINK, LOG_LINK))
SKEW_NORMAL = Family(
    "skew-normal",
    ("mu", "sigma", "nu"),
    (IDENTITY_LINK, LOG_LINK, IDENTITY_LINK),
)

_FAMILIES = {
    "normal": NORMAL,
    "skew-normal": SKEW_NORMAL,
    "skewnormal": SKEW_NORMAL,
}


def get_family(name) -> Family:
    if isinstance(name, Family):
        return name
    try:
        return _FAMILIES[str(name).lower().replace("_", "-")]
    except KeyError:
        raise ConfigError(
            f"unknown family '{name}'; available: normal, skew-normal"
        ) from None


def _check_params(family: Family, params) -> tuple[np.ndarray, ...]:
    params = tuple(np.asarray(p, dtype=float) for p in params)
    if len(params) != family.n_parameters:
        raise ParameterError(
            f"family '{family.name}' takes {family.n_parameters} parameters "
            f"({', '.join(family.parameter_names)}), got {len(params)}"
        )
    sigma = params[1]
    if np.any(sigma <= 0):
        raise ParameterError(f"family '{family.name}': sigma must be positive")
    return params


def log_density(family: Family, y, params) -> np.ndarray:
    """Log of the response density, vectorized over ``y`` and parameters."""
    y = np.asarray(y, dtype=float)
    params = _check_params(family, params)
    with np.errstate(over="ignore"):  # extreme z overflows to -inf density
        if family.name == "normal":
            mu, sigma = params
            z = (y - mu) / sigma
            return -_HALF_LOG_2PI - np.log(sigma) - 0.5 * z * z
        mu, sigma, nu = params
        z = (y - mu) / sigma
        return (
            np.log(2.0)
            - np.log(sigma)
            - _HALF_LOG_2PI
            - 0.5 * z * z
            + special.log_ndtr(nu * z)
        )


def cdf(family: Family, y, params) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    params = _check_params(family, params)
    if family.name == "normal":
        mu, sigma = params
        return special.ndtr((y - mu) / sigma)
    mu, sigma, nu = params
    return stats.skewnorm.cdf(y, nu, loc=mu, scale=sigma)


def quantile(family: Family, p, params) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    for value in np.atleast_1d(p):
        check_probability(value)
    params = _check_params(family, params)
    if family.name == "normal":
        mu, sigma = params
        return mu + sigma * special.ndtri(p)
    mu, sigma, nu = params
    return stats.skewnorm.ppf(p, nu, loc=mu, scale=sigma)


def sample(family: Family, params, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from the family; consumes state from the passed-in generator."""
    params = _check_params(family, params)
    if family.name == "normal":
        mu, sigma = params
        return rng.normal(mu, sigma, size=size)
    mu, sigma, nu = params
    return stats.skewnorm.rvs(nu, loc=mu, scale=sigma, size=size, random_state=rng)


def mean(family: Family, params) -> np.ndarray:
    """Expected value; used for reporting conditional-mean curves."""
    params = _check_params(family, params)
    if family.name == "normal":
        return params[0]
    mu, sigma, nu = params
    delta = nu / np.sqrt(1.0 + nu * nu)
    return mu + sigma * delta * np.sqrt(2.0 / np.pi)
