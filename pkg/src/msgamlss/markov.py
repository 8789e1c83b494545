"""Covariate-dependent transition probabilities and stationary distributions.

State transitions follow a multinomial logit: for each ordered pair
``(i, j)`` with ``i != j`` an additive predictor ``eta_ij`` is mapped to
probabilities by a row-wise softmax with the diagonal as reference
category (``eta_ii = 0``). Predictors are clipped to ``+-50`` before the
softmax, which is computed with max subtraction, so arbitrary finite
inputs are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .exceptions import ConfigError, StationaryError
from .validation import check_square

ETA_CLIP = 50.0


def tpm_from_eta(eta) -> np.ndarray:
    """Row-wise softmax of a predictor matrix (supports batch dimensions).

    Accepts shape ``(..., N, N)``; returns row-stochastic matrices of the
    same shape. The diagonal-zero convention is the caller's business;
    any finite matrix is mapped to a valid t.p.m.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.ndim < 2 or eta.shape[-1] != eta.shape[-2]:
        raise ConfigError(f"eta must be square in its last two axes, got {eta.shape}")
    eta = np.clip(eta, -ETA_CLIP, ETA_CLIP)
    shifted = eta - eta.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def stationary(gamma) -> np.ndarray:
    """Stationary distribution ``delta`` with ``delta @ gamma = delta``.

    Computed by state-reduction (GTH), which is subtraction-free and
    therefore stable even for chains with extremely rare transitions; a
    zero pivot signals a reducible chain.

    Raises
    ------
    StationaryError
        If the stationary distribution is not unique (e.g. reducible or
        identity chains).
    """
    gamma = check_square(gamma, "gamma")
    deltas, valid = stationary_many(gamma[None])
    if not valid[0]:
        raise StationaryError(
            "stationary distribution is not unique (reducible chain)"
        )
    return deltas[0]


def stationary_many(gammas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched stationary distributions with a validity mask.

    Uses the GTH state-reduction recurrence, vectorized over the batch;
    reducible items (zero pivot) are flagged rather than raised, so
    callers summarizing many posterior draws can drop them. Returns
    ``(deltas, valid)`` with shapes ``(..., N)`` and ``(...,)``.
    """
    gammas = np.asarray(gammas, dtype=float)
    batch_shape = gammas.shape[:-2]
    n = gammas.shape[-1]
    a = gammas.reshape(-1, n, n).copy()
    b = a.shape[0]
    valid = np.all(np.isfinite(a), axis=(1, 2)) & np.all(a >= 0, axis=(1, 2))
    if n == 1:
        deltas = np.where(valid[:, None], 1.0, np.nan)
        return deltas.reshape(*batch_shape, 1), valid.reshape(batch_shape)
    for j in range(n - 1, 0, -1):
        pivot = a[:, j, :j].sum(axis=1)
        bad = ~(pivot > 0)
        valid &= ~bad
        pivot = np.where(bad, 1.0, pivot)
        a[:, :j, j] /= pivot[:, None]
        a[:, :j, :j] += a[:, :j, j, None] * a[:, None, j, :j]
    deltas = np.empty((b, n))
    deltas[:, 0] = 1.0
    for j in range(1, n):
        deltas[:, j] = np.einsum("bi,bi->b", deltas[:, :j], a[:, :j, j])
    deltas = np.where(valid[:, None], deltas, np.nan)
    deltas /= deltas.sum(axis=1, keepdims=True)
    return deltas.reshape(*batch_shape, n), valid.reshape(batch_shape)


@dataclass
class TransitionModel:
    """Multinomial-logit transition model bound to fitted coefficients.

    ``design_fns`` maps each off-diagonal pair to a callable producing its
    predictor design matrix from a mapping of named covariate arrays; the
    matching coefficient vectors live in ``coefs``.
    """

    n_states: int
    pairs: tuple[tuple[int, int], ...]
    design_fns: Mapping[tuple[int, int], Callable[[Mapping[str, np.ndarray]], np.ndarray]]
    coefs: Mapping[tuple[int, int], np.ndarray]
    covariates: tuple[str, ...] = ()

    def _as_mapping(self, z) -> Mapping[str, np.ndarray]:
        if isinstance(z, Mapping):
            return {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in z.items()}
        if len(self.covariates) == 1:
            return {self.covariates[0]: np.atleast_1d(np.asarray(z, dtype=float))}
        raise ConfigError(
            "transition covariates must be passed as a mapping when the model "
            f"uses {len(self.covariates)} covariates"
        )

    def eta_grid(self, z) -> np.ndarray:
        """Predictor matrices, shape ``(G, N, N)`` with zero diagonals."""
        data = self._as_mapping(z)
        missing = [c for c in self.covariates if c not in data]
        if missing:
            raise ConfigError(
                "missing transition covariates: " + ", ".join(missing)
            )
        lengths = {len(v) for v in data.values()} or {1}
        if len(lengths) != 1:
            raise ConfigError("transition covariate arrays must share one length")
        g = lengths.pop()
        eta = np.zeros((g, self.n_states, self.n_states))
        for (i, j) in self.pairs:
            design = self.design_fns[(i, j)](data)
            eta[:, i, j] = design @ np.asarray(self.coefs[(i, j)], dtype=float)
        return eta

    def eta_matrix(self, z_row) -> np.ndarray:
        """Single predictor matrix for one covariate row."""
        return self.eta_grid(z_row)[0]

    def tpm_grid(self, z) -> np.ndarray:
        return tpm_from_eta(self.eta_grid(z))

    def tpm(self, z_row) -> np.ndarray:
        return tpm_from_eta(self.eta_matrix(z_row))

    def stationary_curve(self, z) -> np.ndarray:
        """Stationary distribution per grid point, shape ``(G, N)``."""
        data = self._as_mapping(z)
        gammas = self.tpm_grid(data)
        out = np.empty((len(gammas), self.n_states))
        for g, gamma in enumerate(gammas):
            try:
                out[g] = stationary(gamma)
            except StationaryError as exc:
                where = ", ".join(f"{k}={v[g]:g}" for k, v in data.items())
                raise StationaryError(f"at grid point {g} ({where}): {exc}") from exc
        return out
