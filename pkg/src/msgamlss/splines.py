"""B-spline bases with difference penalties for smooth model terms.

Each smooth term is represented by ``M`` B-spline basis functions on
equidistant knots spanning the observed covariate range, penalized by a
squared difference matrix of configurable order. Sum-to-zero centering
makes smooths identifiable next to an explicit intercept; the centering
transform is remembered so that prediction applies the identical map.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import ConfigError, DomainError
from .validation import as_float_vector

#: tolerance used to decide that a design is already centered
_CENTER_TOL = 1e-10


@dataclass(frozen=True)
class SmoothSpec:
    """Configuration of one smooth term.

    Parameters
    ----------
    covariate : str
        Name of the covariate column the smooth applies to.
    num_basis : int
        Number of basis functions ``M``. Must satisfy ``M >= degree + 2``.
    degree : int
        Polynomial degree of the B-splines (3 = cubic).
    penalty_order : int
        Order of the difference penalty. Must be smaller than ``M``.
    knot_placement : str
        Only ``"equidistant"`` (over the observed range) is supported.
    """

    covariate: str
    num_basis: int = 10
    degree: int = 3
    penalty_order: int = 2
    knot_placement: str = "equidistant"

    def __post_init__(self):
        if self.num_basis < self.degree + 2:
            raise ConfigError(
                f"smooth({self.covariate}): num_basis={self.num_basis} is too "
                f"small for degree {self.degree}; need at least {self.degree + 2}"
            )
        if not 0 < self.penalty_order < self.num_basis:
            raise ConfigError(
                f"smooth({self.covariate}): penalty_order={self.penalty_order} "
                f"must lie in [1, num_basis)"
            )
        if self.degree < 0:
            raise ConfigError(f"smooth({self.covariate}): degree must be >= 0")
        if self.knot_placement != "equidistant":
            raise ConfigError(
                f"smooth({self.covariate}): unsupported knot placement "
                f"'{self.knot_placement}'"
            )


def difference_penalty(num_basis: int, order: int) -> np.ndarray:
    """Return ``D^T D`` where ``D`` is the order-th difference matrix."""
    d = np.diff(np.eye(num_basis), n=order, axis=0)
    return d.T @ d


@dataclass
class BasisBundle:
    """Basis evaluations plus penalty for one smooth term.

    ``design`` holds one row per observation. Before centering it has
    ``num_basis`` columns that sum to one in every row; after centering
    it has ``num_basis - 1`` columns with column sums zero over the
    sample the bundle was built on. ``centering`` stores the transform
    ``Z`` so new evaluations reproduce the same column space.
    """

    spec: SmoothSpec
    knots: np.ndarray
    design: np.ndarray
    penalty: np.ndarray
    x_range: tuple[float, float]
    centering: np.ndarray | None = None
    penalty_rank: int = field(default=0)

    @property
    def n_columns(self) -> int:
        return self.design.shape[1]

    @property
    def is_centered(self) -> bool:
        return self.centering is not None

    def evaluate(self, x) -> np.ndarray:
        """Basis rows at new covariate values, with stored centering applied.

        Raises
        ------
        DomainError
            If any value lies outside the training range; penalized splines
            do not extrapolate.
        """
        x = as_float_vector(x, self.spec.covariate)
        lo, hi = self.x_range
        slack = 1e-10 * max(hi - lo, 1.0)
        if x.size and (x.min() < lo - slack or x.max() > hi + slack):
            bad = float(x.min()) if x.min() < lo - slack else float(x.max())
            raise DomainError(
                f"covariate '{self.spec.covariate}': value {bad:g} outside the "
                f"training range [{lo:g}, {hi:g}]; refusing to extrapolate"
            )
        x = np.clip(x, lo, hi)
        raw = BSpline.design_matrix(x, self.knots, self.spec.degree).toarray()
        if self.centering is not None:
            return raw @ self.centering
        return raw


def build_basis(spec: SmoothSpec, x) -> BasisBundle:
    """Construct the B-spline design and difference penalty for ``x``.

    Knots are equidistant with ``degree`` extra knots beyond each end of
    the observed range, so the basis forms a partition of unity on
    ``[min(x), max(x)]`` and each row has at most ``degree + 1`` nonzero
    entries.
    """
    x = as_float_vector(x, spec.covariate)
    if x.size == 0:
        raise ConfigError(f"smooth({spec.covariate}): no observations")
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= 0:
        raise ConfigError(
            f"smooth({spec.covariate}): covariate is constant; cannot place knots"
        )
    m, deg = spec.num_basis, spec.degree
    h = (hi - lo) / (m - deg)
    knots = lo + h * (np.arange(m + deg + 1) - deg)
    # guard the boundary against round-off so min(x)/max(x) stay inside
    knots[deg] = lo
    knots[m] = hi
    design = BSpline.design_matrix(x, knots, deg).toarray()
    penalty = difference_penalty(m, spec.penalty_order)
    return BasisBundle(
        spec=spec,
        knots=knots,
        design=design,
        penalty=penalty,
        x_range=(lo, hi),
        penalty_rank=m - spec.penalty_order,
    )


def apply_centering(bundle: BasisBundle) -> BasisBundle:
    """Absorb the sum-to-zero constraint into the basis.

    The returned bundle has one column fewer; its design satisfies
    ``1^T design = 0`` over the rows the bundle was built on, and the
    penalty is transformed consistently (``Z^T S Z``). Applying the
    function to an already centered bundle returns it unchanged.
    """
    col_sums = bundle.design.sum(axis=0)
    if np.max(np.abs(col_sums)) <= _CENTER_TOL * max(1.0, len(bundle.design)):
        return bundle
    if bundle.centering is not None:
        return bundle
    q, _ = np.linalg.qr(col_sums[:, None], mode="complete")
    z = q[:, 1:]
    return replace(
        bundle,
        design=bundle.design @ z,
        penalty=z.T @ bundle.penalty @ z,
        centering=z,
        penalty_rank=bundle.penalty_rank,
    )
