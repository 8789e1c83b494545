"""Independent reference implementations used to verify the package.

These deliberately avoid the package's likelihood code paths: densities
come straight from scipy.stats, transition matrices from a hand-rolled
softmax, and the likelihood from an exhaustive sum over all state paths
(or the unscaled forward product). They are only usable for tiny T.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from msgamlss.model import ModelStructure


def dist_params_reference(structure: ModelStructure, theta, covariates, n_rows):
    """Distribution parameters per (t, state) via raw design algebra."""
    out = {}
    for k, name in enumerate(structure.family.parameter_names):
        design = structure.dist_layouts[name].evaluate(covariates, n_rows=n_rows)
        cols = []
        for i in range(structure.n_states):
            eta = design @ np.asarray(theta)[structure.dist_slices[(name, i)]]
            if structure.family.links[k].kind == "log":
                cols.append(np.exp(eta))
            else:
                cols.append(eta)
        out[name] = np.stack(cols, axis=1)
    return out


def log_density_reference(structure, theta, y, covariates):
    """(T, N) log densities from scipy.stats, not the package's families."""
    n_rows = len(y)
    params = dist_params_reference(structure, theta, covariates, n_rows)
    logp = np.empty((n_rows, structure.n_states))
    for i in range(structure.n_states):
        if structure.family.name == "normal":
            logp[:, i] = stats.norm.logpdf(
                y, loc=params["mu"][:, i], scale=params["sigma"][:, i]
            )
        else:
            logp[:, i] = stats.skewnorm.logpdf(
                y,
                params["nu"][:, i],
                loc=params["mu"][:, i],
                scale=params["sigma"][:, i],
            )
    return logp


def tpm_reference(structure, theta, covariates, n_rows):
    """(T-1, N, N) transition matrices via a hand-rolled softmax."""
    n = structure.n_states
    eta = np.zeros((n_rows - 1, n, n))
    for pair in structure.pairs:
        design = structure.trans_layouts[pair].evaluate(covariates, n_rows=n_rows)
        eta[:, pair[0], pair[1]] = (
            design @ np.asarray(theta)[structure.trans_slices[pair]]
        )[: n_rows - 1]
    expd = np.exp(eta)
    return expd / expd.sum(axis=2, keepdims=True)


def pathsum_loglik(logp, gammas, delta) -> float:
    """Exhaustive log-likelihood: logsumexp over all N^T state paths."""
    t_len, n_states = logp.shape
    log_delta = np.log(delta)
    log_gammas = np.log(gammas)
    terms = []
    for path in itertools.product(range(n_states), repeat=t_len):
        value = log_delta[path[0]] + logp[0, path[0]]
        for t in range(1, t_len):
            value += log_gammas[t - 1, path[t - 1], path[t]] + logp[t, path[t]]
        terms.append(value)
    return float(logsumexp(terms))


def naive_forward_loglik(logp, gammas, delta) -> float:
    """Unscaled forward recursion (usable only when no underflow occurs)."""
    alpha = delta * np.exp(logp[0])
    for t in range(1, len(logp)):
        alpha = (alpha @ gammas[t - 1]) * np.exp(logp[t])
    return float(np.log(alpha.sum()))


def brute_force_viterbi(logp, gammas, delta) -> np.ndarray:
    """Most probable path by enumerating all N^T candidates."""
    t_len, n_states = logp.shape
    best_value, best_path = -np.inf, None
    log_delta = np.log(delta)
    log_gammas = np.log(gammas)
    for path in itertools.product(range(n_states), repeat=t_len):
        value = log_delta[path[0]] + logp[0, path[0]]
        for t in range(1, t_len):
            value += log_gammas[t - 1, path[t - 1], path[t]] + logp[t, path[t]]
        if value > best_value:
            best_value, best_path = value, path
    return np.asarray(best_path)


def simulate_response(structure, theta, covariates, rng):
    """Simulate (y, states) from a model structure at given parameters.

    Unlike the sim module, this draws from the spec's own basis
    representation, so the chosen theta is exactly the true parameter.
    """
    n_rows = len(next(iter(covariates.values())))
    params = dist_params_reference(structure, theta, covariates, n_rows)
    states = np.zeros(n_rows, dtype=int)
    if structure.n_states > 1:
        gammas = tpm_reference(structure, theta, covariates, n_rows)
        delta = structure.spec.initial.vector(structure.n_states)
        if delta is None:
            from msgamlss.markov import stationary

            delta = stationary(gammas[0])
        states[0] = rng.choice(structure.n_states, p=delta)
        for t in range(1, n_rows):
            states[t] = rng.choice(structure.n_states, p=gammas[t - 1, states[t - 1]])
    mu = params["mu"][np.arange(n_rows), states]
    sigma = params["sigma"][np.arange(n_rows), states]
    if structure.family.name == "normal":
        y = rng.normal(mu, sigma)
    else:
        nu = params["nu"][np.arange(n_rows), states]
        y = stats.skewnorm.rvs(nu, loc=mu, scale=sigma, random_state=rng)
    return y, states


def central_fd_gradient(fun, theta, relative_step=1e-5) -> np.ndarray:
    """Central finite differences with per-coordinate relative steps."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(len(theta)):
        h = relative_step * (1.0 + abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (fun(up) - fun(down)) / (2.0 * h)
    return grad
