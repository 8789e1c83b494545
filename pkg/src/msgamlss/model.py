"""Model specification, design construction, and parameter packing.

A :class:`ModelSpec` declares the number of states, the response family,
one additive predictor per distribution parameter (shared structure
across states, state-specific coefficients), and predictors for the
off-diagonal transition probabilities. :class:`ModelStructure` binds a
spec to data: it builds spline bases (with centering fitted on the
sample), fixes the packing of all coefficients into one flat vector, and
records which slices carry a difference penalty.

Packing scheme (documented contract): distribution-parameter blocks come
first, ordered by family parameter, then by state; each block holds the
intercept, the linear coefficients in declaration order, then one
sub-block per smooth term. Transition blocks follow, one per ordered
off-diagonal pair in row-major order, with the same internal layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .exceptions import ConfigError
from .families import Family, get_family
from .splines import BasisBundle, SmoothSpec, apply_centering, build_basis
from .validation import as_float_vector


@dataclass(frozen=True)
class LinearTerm:
    """A raw covariate entering the predictor linearly."""

    covariate: str


Term = Union[LinearTerm, SmoothSpec]


@dataclass(frozen=True)
class Predictor:
    """Additive predictor: implicit intercept plus the given terms."""

    terms: tuple[Term, ...] = ()

    def covariates(self) -> tuple[str, ...]:
        return tuple(t.covariate for t in self.terms)


@dataclass(frozen=True)
class InitialDistribution:
    """How the state distribution at t=1 is chosen (never estimated)."""

    mode: str = "uniform"  # "uniform" | "fixed" | "stationary"
    probabilities: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in ("uniform", "fixed", "stationary"):
            raise ConfigError(f"unknown initial-distribution mode '{self.mode}'")
        if self.mode == "fixed":
            if self.probabilities is None:
                raise ConfigError("fixed initial distribution needs probabilities")
            probs = np.asarray(self.probabilities, dtype=float)
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-8:
                raise ConfigError("initial probabilities must be >= 0 and sum to 1")

    def vector(self, n_states: int) -> np.ndarray | None:
        if self.mode == "uniform":
            return np.full(n_states, 1.0 / n_states)
        if self.mode == "fixed":
            probs = np.asarray(self.probabilities, dtype=float)
            if len(probs) != n_states:
                raise ConfigError(
                    f"initial distribution has {len(probs)} entries for "
                    f"{n_states} states"
                )
            return probs
        return None  # stationary: derived from the first transition matrix

    def is_exchangeable(self) -> bool:
        """True when relabeling states leaves the distribution unchanged."""
        if self.mode in ("uniform", "stationary"):
            return True
        probs = np.asarray(self.probabilities, dtype=float)
        return bool(np.allclose(probs, probs[0]))


def as_initial(value) -> InitialDistribution:
    if isinstance(value, InitialDistribution):
        return value
    if isinstance(value, str):
        return InitialDistribution(mode=value)
    return InitialDistribution(mode="fixed", probabilities=tuple(float(v) for v in value))


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a Markov-switching distributional model.

    ``predictors`` maps family parameter names (e.g. ``"mu"``) to their
    predictor; omitted parameters get an intercept only. ``transition``
    is either a single predictor shared by every off-diagonal pair or a
    mapping from 0-based ``(from, to)`` pairs to predictors.
    """

    n_states: int
    family: str = "normal"
    predictors: Mapping[str, Predictor] = field(default_factory=dict)
    transition: Predictor | Mapping[tuple[int, int], Predictor] = Predictor()
    initial: InitialDistribution = InitialDistribution()

    def __post_init__(self):
        if self.n_states < 1:
            raise ConfigError("n_states must be >= 1")
        fam = get_family(self.family)
        for name in self.predictors:
            if name not in fam.parameter_names:
                raise ConfigError(
                    f"predictor for unknown parameter '{name}'; family "
                    f"'{fam.name}' has parameters {fam.parameter_names}"
                )
        if isinstance(self.transition, Mapping):
            for pair in self.transition:
                i, j = pair
                if not (0 <= i < self.n_states and 0 <= j < self.n_states) or i == j:
                    raise ConfigError(f"invalid transition pair {pair}")

    def family_object(self) -> Family:
        return get_family(self.family)

    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (i, j)
            for i in range(self.n_states)
            for j in range(self.n_states)
            if i != j
        )

    def predictor_for(self, parameter: str) -> Predictor:
        return self.predictors.get(parameter, Predictor())

    def transition_predictor_for(self, pair: tuple[int, int]) -> Predictor:
        if isinstance(self.transition, Mapping):
            if pair not in self.transition:
                raise ConfigError(f"no transition predictor for pair {pair}")
            return self.transition[pair]
        return self.transition

    def covariate_names(self) -> tuple[str, ...]:
        names: list[str] = []
        fam = self.family_object()
        for parameter in fam.parameter_names:
            for cov in self.predictor_for(parameter).covariates():
                if cov not in names:
                    names.append(cov)
        for pair in self.pairs():
            for cov in self.transition_predictor_for(pair).covariates():
                if cov not in names:
                    names.append(cov)
        return tuple(names)


@dataclass
class TermColumns:
    """Column range of one term inside a predictor design."""

    term: Term
    start: int
    stop: int
    bundle: BasisBundle | None = None


class PredictorLayout:
    """Design-matrix builder for one predictor, fitted on the sample.

    Column 0 is the intercept; linear and smooth columns follow in
    declaration order. Smooth terms hold their fitted (centered) basis
    bundles so evaluation on new data reuses knots and centering.
    """

    def __init__(self, predictor: Predictor, data: Mapping[str, np.ndarray] | None = None,
                 *, bundles: Sequence[BasisBundle] | None = None):
        self.predictor = predictor
        self.terms: list[TermColumns] = []
        stored = list(bundles) if bundles is not None else None
        col = 1
        for term in predictor.terms:
            if isinstance(term, SmoothSpec):
                if stored is not None:
                    bundle = stored.pop(0)
                else:
                    bundle = apply_centering(build_basis(term, _column(data, term.covariate)))
                width = bundle.n_columns
                self.terms.append(TermColumns(term, col, col + width, bundle))
            else:
                if stored is None:
                    _column(data, term.covariate)  # validate presence
                self.terms.append(TermColumns(term, col, col + 1))
                width = 1
            col += width
        self.n_columns = col

    def evaluate(self, data: Mapping[str, np.ndarray], n_rows: int | None = None) -> np.ndarray:
        """Design matrix on new data (domain-checked for smooth terms)."""
        if n_rows is None:
            if not self.predictor.terms:
                raise ConfigError("cannot infer design length for an intercept-only predictor")
            n_rows = len(_column(data, self.predictor.terms[0].covariate))
        x = np.zeros((n_rows, self.n_columns))
        x[:, 0] = 1.0
        for tc in self.terms:
            values = _column(data, tc.term.covariate)
            if len(values) != n_rows:
                raise ConfigError(
                    f"covariate '{tc.term.covariate}' has length {len(values)}, "
                    f"expected {n_rows}"
                )
            if tc.bundle is not None:
                x[:, tc.start : tc.stop] = tc.bundle.evaluate(values)
            else:
                x[:, tc.start] = values
        return x

    def column_names(self) -> list[str]:
        names = ["(Intercept)"]
        for tc in self.terms:
            if tc.bundle is not None:
                names += [
                    f"s({tc.term.covariate}).{k + 1}"
                    for k in range(tc.stop - tc.start)
                ]
            else:
                names.append(tc.term.covariate)
        return names

    def smooth_terms(self) -> list[TermColumns]:
        return [tc for tc in self.terms if tc.bundle is not None]


def _column(data: Mapping[str, np.ndarray], name: str) -> np.ndarray:
    try:
        values = data[name]
    except KeyError:
        raise ConfigError(f"missing covariate column '{name}'") from None
    return as_float_vector(values, name)


@dataclass
class PenaltyBlock:
    """One penalized spline coefficient block with its smoothing slot."""

    name: str
    start: int
    stop: int
    penalty: np.ndarray
    rank: int

    @property
    def sl(self) -> slice:
        return slice(self.start, self.stop)


class ModelStructure:
    """A spec bound to a training sample: designs, packing, penalties.

    Instances are what fitted models carry around; they contain no data
    columns, only fitted basis metadata (knots, centering transforms,
    covariate ranges) and the coefficient packing index.
    """

    def __init__(self, spec: ModelSpec, data: Mapping[str, np.ndarray] | None, *,
                 response_name: str = "y",
                 dist_layouts: Mapping[str, PredictorLayout] | None = None,
                 trans_layouts: Mapping[tuple[int, int], PredictorLayout] | None = None,
                 covariate_stats: Mapping[str, tuple[float, float, float]] | None = None):
        self.spec = spec
        self.family = spec.family_object()
        self.response_name = response_name
        self.n_states = spec.n_states
        self.pairs = spec.pairs()

        if dist_layouts is not None:
            self.dist_layouts = dict(dist_layouts)
        else:
            self.dist_layouts = {
                parameter: PredictorLayout(spec.predictor_for(parameter), data)
                for parameter in self.family.parameter_names
            }

        if trans_layouts is not None:
            self.trans_layouts = dict(trans_layouts)
        else:
            distinct: dict[Predictor, PredictorLayout] = {}
            self.trans_layouts = {}
            for pair in self.pairs:
                predictor = spec.transition_predictor_for(pair)
                if predictor not in distinct:
                    distinct[predictor] = PredictorLayout(predictor, data)
                self.trans_layouts[pair] = distinct[predictor]

        # flat packing: distribution blocks (parameter-major, then state),
        # then transition blocks in pair order
        offset = 0
        self.dist_slices: dict[tuple[str, int], slice] = {}
        for parameter in self.family.parameter_names:
            width = self.dist_layouts[parameter].n_columns
            for state in range(self.n_states):
                self.dist_slices[(parameter, state)] = slice(offset, offset + width)
                offset += width
        self.trans_slices: dict[tuple[int, int], slice] = {}
        for pair in self.pairs:
            width = self.trans_layouts[pair].n_columns
            self.trans_slices[pair] = slice(offset, offset + width)
            offset += width
        self.n_coef = offset

        self.penalties: list[PenaltyBlock] = []
        for parameter in self.family.parameter_names:
            layout = self.dist_layouts[parameter]
            for state in range(self.n_states):
                base = self.dist_slices[(parameter, state)].start
                for tc in layout.smooth_terms():
                    self.penalties.append(
                        PenaltyBlock(
                            name=f"{parameter}[{state + 1}].s({tc.term.covariate})",
                            start=base + tc.start,
                            stop=base + tc.stop,
                            penalty=tc.bundle.penalty,
                            rank=tc.bundle.penalty_rank,
                        )
                    )
        for pair in self.pairs:
            layout = self.trans_layouts[pair]
            base = self.trans_slices[pair].start
            for tc in layout.smooth_terms():
                self.penalties.append(
                    PenaltyBlock(
                        name=f"transition[{pair[0] + 1}->{pair[1] + 1}].s({tc.term.covariate})",
                        start=base + tc.start,
                        stop=base + tc.stop,
                        penalty=tc.bundle.penalty,
                        rank=tc.bundle.penalty_rank,
                    )
                )

        self.lags: dict[str, int] = {}  # data-prep metadata carried for the CLI

        if covariate_stats is not None:
            self.covariate_stats = dict(covariate_stats)
        else:
            self.covariate_stats = {}
            for name in spec.covariate_names():
                values = _column(data, name)
                self.covariate_stats[name] = (
                    float(values.min()),
                    float(values.max()),
                    float(values.mean()),
                )

    # -- packing ---------------------------------------------------------

    @property
    def n_penalties(self) -> int:
        return len(self.penalties)

    def coefficient_names(self) -> list[str]:
        names = [""] * self.n_coef
        for parameter in self.family.parameter_names:
            cols = self.dist_layouts[parameter].column_names()
            for state in range(self.n_states):
                sl = self.dist_slices[(parameter, state)]
                for k, col in enumerate(cols):
                    names[sl.start + k] = f"{parameter}[{state + 1}].{col}"
        for pair in self.pairs:
            cols = self.trans_layouts[pair].column_names()
            sl = self.trans_slices[pair]
            for k, col in enumerate(cols):
                names[sl.start + k] = f"transition[{pair[0] + 1}->{pair[1] + 1}].{col}"
        return names

    def pack(self, dist_coefs: Mapping, trans_coefs: Mapping) -> np.ndarray:
        theta = np.zeros(self.n_coef)
        for key, sl in self.dist_slices.items():
            theta[sl] = np.asarray(dist_coefs[key], dtype=float)
        for pair, sl in self.trans_slices.items():
            theta[sl] = np.asarray(trans_coefs[pair], dtype=float)
        return theta

    def unpack(self, theta) -> tuple[dict, dict]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_coef,):
            raise ConfigError(
                f"parameter vector has shape {theta.shape}, expected ({self.n_coef},)"
            )
        dist = {key: theta[sl].copy() for key, sl in self.dist_slices.items()}
        trans = {pair: theta[sl].copy() for pair, sl in self.trans_slices.items()}
        return dist, trans

    # -- state relabeling --------------------------------------------------

    def can_relabel(self) -> bool:
        """Relabeling is only well-defined for symmetric specifications."""
        layouts = {id(self.trans_layouts[p]) for p in self.pairs}
        return len(layouts) <= 1 and self.spec.initial.is_exchangeable()

    def relabel_index(self, perm: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping old theta/lambda to relabeled ones.

        ``perm[new_state] = old_state``; returns ``(theta_idx, lam_idx)``
        such that ``theta_new = theta[theta_idx]``.
        """
        perm = list(perm)
        theta_idx = np.arange(self.n_coef)
        for parameter in self.family.parameter_names:
            for new_state in range(self.n_states):
                src = self.dist_slices[(parameter, perm[new_state])]
                dst = self.dist_slices[(parameter, new_state)]
                theta_idx[dst] = np.arange(src.start, src.stop)
        for (i, j) in self.pairs:
            src = self.trans_slices[(perm[i], perm[j])]
            dst = self.trans_slices[(i, j)]
            theta_idx[dst] = np.arange(src.start, src.stop)

        # smoothing parameters move with their blocks
        start_to_slot = {p.start: k for k, p in enumerate(self.penalties)}
        lam_idx = np.arange(self.n_penalties)
        for slot, block in enumerate(self.penalties):
            src_start = int(theta_idx[block.start])
            lam_idx[slot] = start_to_slot[src_start]
        return theta_idx, lam_idx

    # -- misc ---------------------------------------------------------------

    def required_covariates(self) -> tuple[str, ...]:
        return self.spec.covariate_names()

    def transition_covariates(self) -> tuple[str, ...]:
        names: list[str] = []
        for pair in self.pairs:
            for cov in self.trans_layouts[pair].predictor.covariates():
                if cov not in names:
                    names.append(cov)
        return tuple(names)

    def grid_frame(self, covariate: str, values, others: str = "mean") -> dict[str, np.ndarray]:
        """Covariate mapping for curve prediction along one covariate.

        Remaining required covariates are held at their training mean
        (the only supported policy).
        """
        if covariate not in self.covariate_stats:
            raise ConfigError(f"'{covariate}' is not a covariate of this model")
        if others != "mean":
            raise ConfigError(f"unsupported fill policy '{others}'")
        values = as_float_vector(values, covariate)
        out = {covariate: values}
        for name, (_, _, mean) in self.covariate_stats.items():
            if name != covariate:
                out[name] = np.full(len(values), mean)
        return out

    def default_grid(self, covariate: str, n: int = 100) -> np.ndarray:
        lo, hi, _ = self.covariate_stats[covariate]
        return np.linspace(lo, hi, n)
