"""JSON serialization of fitted models.

The model file stores the spec, the fitted basis metadata per smooth
term (knots, centering transform, training range), the packed parameter
vector, smoothing parameters, penalized Hessian, and diagnostics. Floats
go through Python's shortest round-trip ``repr``, so reloaded parameters
are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError
from .inference import FitDiagnostics, FittedModel
from .model import (
    InitialDistribution,
    LinearTerm,
    ModelSpec,
    ModelStructure,
    Predictor,
    PredictorLayout,
)
from .splines import BasisBundle, SmoothSpec, difference_penalty

FORMAT_VERSION = 1


def _term_to_dict(term) -> dict:
    if isinstance(term, SmoothSpec):
        return {
            "type": "smooth",
            "covariate": term.covariate,
            "num_basis": term.num_basis,
            "degree": term.degree,
            "penalty_order": term.penalty_order,
        }
    return {"type": "linear", "covariate": term.covariate}


def _term_from_dict(d: dict):
    if d["type"] == "smooth":
        return SmoothSpec(
            covariate=d["covariate"],
            num_basis=int(d["num_basis"]),
            degree=int(d["degree"]),
            penalty_order=int(d["penalty_order"]),
        )
    if d["type"] == "linear":
        return LinearTerm(covariate=d["covariate"])
    raise ConfigError(f"unknown term type '{d['type']}' in model file")


def _predictor_to_dict(predictor: Predictor) -> list:
    return [_term_to_dict(t) for t in predictor.terms]


def _predictor_from_dict(terms: list) -> Predictor:
    return Predictor(terms=tuple(_term_from_dict(t) for t in terms))


def _pair_key(pair: tuple[int, int]) -> str:
    return f"{pair[0] + 1}->{pair[1] + 1}"


def _pair_from_key(key: str) -> tuple[int, int]:
    i, j = key.split("->")
    return int(i) - 1, int(j) - 1


def spec_to_dict(spec: ModelSpec) -> dict:
    if isinstance(spec.transition, Predictor):
        transition = {"shared": _predictor_to_dict(spec.transition)}
    else:
        transition = {
            "pairs": {
                _pair_key(pair): _predictor_to_dict(pred)
                for pair, pred in spec.transition.items()
            }
        }
    return {
        "n_states": spec.n_states,
        "family": spec.family,
        "predictors": {
            name: _predictor_to_dict(pred) for name, pred in spec.predictors.items()
        },
        "transition": transition,
        "initial": {
            "mode": spec.initial.mode,
            "probabilities": (
                None
                if spec.initial.probabilities is None
                else list(spec.initial.probabilities)
            ),
        },
    }


def spec_from_dict(d: dict) -> ModelSpec:
    if "shared" in d["transition"]:
        transition = _predictor_from_dict(d["transition"]["shared"])
    else:
        transition = {
            _pair_from_key(key): _predictor_from_dict(terms)
            for key, terms in d["transition"]["pairs"].items()
        }
    probs = d["initial"]["probabilities"]
    return ModelSpec(
        n_states=int(d["n_states"]),
        family=d["family"],
        predictors={
            name: _predictor_from_dict(terms)
            for name, terms in d["predictors"].items()
        },
        transition=transition,
        initial=InitialDistribution(
            mode=d["initial"]["mode"],
            probabilities=None if probs is None else tuple(probs),
        ),
    )


def _bundle_to_dict(bundle: BasisBundle) -> dict:
    return {
        "term": _term_to_dict(bundle.spec),
        "knots": bundle.knots.tolist(),
        "x_range": list(bundle.x_range),
        "centering": None if bundle.centering is None else bundle.centering.tolist(),
        "penalty_rank": bundle.penalty_rank,
    }


def _bundle_from_dict(d: dict) -> BasisBundle:
    spec = _term_from_dict(d["term"])
    raw_penalty = difference_penalty(spec.num_basis, spec.penalty_order)
    centering = None if d["centering"] is None else np.asarray(d["centering"], dtype=float)
    if centering is not None:
        penalty = centering.T @ raw_penalty @ centering
        n_cols = centering.shape[1]
    else:
        penalty = raw_penalty
        n_cols = spec.num_basis
    return BasisBundle(
        spec=spec,
        knots=np.asarray(d["knots"], dtype=float),
        design=np.zeros((0, n_cols)),
        penalty=penalty,
        x_range=(float(d["x_range"][0]), float(d["x_range"][1])),
        centering=centering,
        penalty_rank=int(d["penalty_rank"]),
    )


def structure_to_dict(structure: ModelStructure) -> dict:
    dist_bundles = {
        parameter: [
            _bundle_to_dict(tc.bundle)
            for tc in structure.dist_layouts[parameter].smooth_terms()
        ]
        for parameter in structure.family.parameter_names
    }
    trans_bundles = {
        _pair_key(pair): [
            _bundle_to_dict(tc.bundle)
            for tc in structure.trans_layouts[pair].smooth_terms()
        ]
        for pair in structure.pairs
    }
    return {
        "spec": spec_to_dict(structure.spec),
        "response_name": structure.response_name,
        "covariate_stats": {
            name: list(stats) for name, stats in structure.covariate_stats.items()
        },
        "lags": {name: int(lag) for name, lag in structure.lags.items()},
        "dist_bundles": dist_bundles,
        "trans_bundles": trans_bundles,
    }


def structure_from_dict(d: dict) -> ModelStructure:
    spec = spec_from_dict(d["spec"])
    dist_layouts = {}
    for parameter in spec.family_object().parameter_names:
        bundles = [_bundle_from_dict(b) for b in d["dist_bundles"][parameter]]
        dist_layouts[parameter] = PredictorLayout(
            spec.predictor_for(parameter), bundles=bundles
        )
    distinct: dict[Predictor, PredictorLayout] = {}
    trans_layouts = {}
    for pair in spec.pairs():
        predictor = spec.transition_predictor_for(pair)
        if predictor not in distinct:
            bundles = [
                _bundle_from_dict(b) for b in d["trans_bundles"][_pair_key(pair)]
            ]
            distinct[predictor] = PredictorLayout(predictor, bundles=bundles)
        trans_layouts[pair] = distinct[predictor]
    structure = ModelStructure(
        spec,
        None,
        response_name=d["response_name"],
        dist_layouts=dist_layouts,
        trans_layouts=trans_layouts,
        covariate_stats={
            name: tuple(stats) for name, stats in d["covariate_stats"].items()
        },
    )
    structure.lags = {name: int(lag) for name, lag in d.get("lags", {}).items()}
    return structure


def fitted_to_dict(fitted: FittedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "structure": structure_to_dict(fitted.structure),
        "theta": fitted.theta.tolist(),
        "lambda": fitted.lam.tolist(),
        "hessian": fitted.hessian.tolist(),
        "log_likelihood": float(fitted.log_lik),
        "diagnostics": fitted.diagnostics.to_dict(),
    }


def fitted_from_dict(d: dict) -> FittedModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported model file version {d.get('format_version')!r}"
        )
    structure = structure_from_dict(d["structure"])
    theta = np.asarray(d["theta"], dtype=float)
    if theta.shape != (structure.n_coef,):
        raise ConfigError("model file parameter vector does not match the spec")
    return FittedModel(
        structure=structure,
        theta=theta,
        lam=np.asarray(d["lambda"], dtype=float),
        hessian=np.asarray(d["hessian"], dtype=float),
        log_lik=float(d["log_likelihood"]),
        diagnostics=FitDiagnostics.from_dict(d["diagnostics"]),
    )
