"""Command-line interface.

Subcommands mirror the analysis workflow: ``simulate`` produces data,
``fit`` estimates a model from a config file or flags, and ``decode`` /
``residuals`` / ``effects`` / ``transitions`` / ``stationary`` turn a
fitted model file into grid CSVs that any plotting tool can consume.
Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from .config import RunConfig, load_config, parse_lags
from .data import load_frame
from .exceptions import ConfigError, MsgamlssError
from .inference import FittedModel, predict_parameters, pseudo_residuals, viterbi
from .sim import benchmark_dgp, simulate as simulate_dgp
from .smoothing import select_smoothness
from .uncertainty import effect_band, sample_posterior, transition_band


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MsgamlssError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(getattr(exc, "exit_code", 2))

    return wrapper


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(path) -> FittedModel:
    if not Path(path).exists():
        raise ConfigError(f"model file not found: {path}")
    return FittedModel.load(path)


def _frame_for_model(fitted: FittedModel, data_path):
    lags = getattr(fitted.structure, "lags", {})
    return load_frame(data_path, fitted.structure.response_name, lags)


@click.group()
def main():
    """Markov-switching distributional regression models."""


@main.command()
@click.option("--benchmark", is_flag=True, required=True,
              help="Simulate from the built-in two-state normal benchmark DGP.")
@click.option("--T", "n_obs", type=int, default=4000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--replications", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@handle_errors
def simulate(benchmark, n_obs, seed, replications, out):
    """Simulate data; writes data.csv with the true states alongside."""
    if replications < 1:
        raise ConfigError("--replications must be >= 1")
    out = _out_dir(out)
    dgp = benchmark_dgp(n_obs=n_obs)
    root = np.random.SeedSequence(seed)
    seeds = root.spawn(replications)
    for r in range(replications):
        frame, states = simulate_dgp(dgp, np.random.default_rng(seeds[r]))
        df = frame.to_pandas()
        df["state_true"] = states + 1
        name = "data.csv" if replications == 1 else f"data_{r + 1:03d}.csv"
        df.to_csv(out / name, index=False)
        click.echo(f"wrote {out / name} ({len(df)} rows)")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML configuration file (see README for the schema).")
@click.option("--data", "data_path", type=click.Path(), default=None)
@click.option("--response", default=None)
@click.option("--family", default=None)
@click.option("--states", type=int, default=None)
@click.option("--mu", multiple=True, help="Term for the location predictor (repeatable).")
@click.option("--sigma", multiple=True, help="Term for the scale predictor (repeatable).")
@click.option("--nu", multiple=True, help="Term for the shape predictor (repeatable).")
@click.option("--transition", multiple=True,
              help="Term shared by all transition predictors (repeatable).")
@click.option("--lag", "lag_directives", multiple=True,
              help="Lag directive like 'lag(spread, 360)' (repeatable).")
@click.option("--initial", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@handle_errors
def fit(config_path, data_path, response, family, states, mu, sigma, nu,
        transition, lag_directives, initial, seed, out):
    """Fit a model; writes model.json and fit_report.json."""
    if config_path is not None:
        cfg = load_config(config_path)
        if data_path is not None:
            cfg.data = data_path
        if out is not None:
            cfg.out = out
        if seed is not None:
            cfg.seed = seed
    else:
        if data_path is None or response is None:
            raise ConfigError("either --config or both --data and --response are required")
        predictors = {}
        for name, terms in (("mu", mu), ("sigma", sigma), ("nu", nu)):
            if terms:
                predictors[name] = list(terms)
        cfg = RunConfig(
            data=data_path,
            response=response,
            family=family or "normal",
            n_states=states or 2,
            predictors=predictors,
            transition=list(transition) if transition else None,
            lags=parse_lags(list(lag_directives)),
            initial=initial or "uniform",
            seed=seed or 0,
            out=out or ".",
        )

    frame = load_frame(cfg.data, cfg.response, cfg.lags, cfg.label_column)
    spec = cfg.build_spec()
    optimizer = cfg.build_optimizer()
    if "multi_start_seed" not in cfg.optimizer:
        optimizer = dataclasses.replace(optimizer, multi_start_seed=cfg.seed)
    fitted = select_smoothness(spec, frame, config=optimizer)
    fitted.structure.lags = dict(cfg.lags)

    out_path = _out_dir(cfg.out)
    fitted.save(out_path / "model.json")
    report = {
        "log_likelihood": fitted.log_lik,
        "n_observations": len(frame),
        "n_parameters": fitted.n_parameters,
        "coefficients": dict(fitted.coefficient_table()),
        "smoothing": dict(fitted.smoothing_table()),
        "diagnostics": fitted.diagnostics.to_dict(),
        "seed": cfg.seed,
    }
    with open(out_path / "fit_report.json", "w") as fh:
        json.dump(report, fh, indent=1)
    click.echo(
        f"fit complete: log-likelihood {fitted.log_lik:.4f}, "
        f"{fitted.diagnostics.n_outer} outer iterations; wrote "
        f"{out_path / 'model.json'} and {out_path / 'fit_report.json'}"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@handle_errors
def decode(model_path, data_path, out):
    """Write the most probable state sequence (decoded.csv)."""
    fitted = _load_model(model_path)
    frame = _frame_for_model(fitted, data_path)
    states = viterbi(fitted, frame) + 1
    out = _out_dir(out)
    df = pd.DataFrame(
        {"t": np.arange(1, len(frame) + 1), "y": frame.response, "state": states}
    )
    if frame.labels is not None:
        df.insert(0, "label", frame.labels)
    df.to_csv(out / "decoded.csv", index=False)
    click.echo(f"wrote {out / 'decoded.csv'} ({len(df)} rows)")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@handle_errors
def residuals(model_path, data_path, out):
    """Write pseudo-residuals and their KS summary."""
    fitted = _load_model(model_path)
    frame = _frame_for_model(fitted, data_path)
    res = pseudo_residuals(fitted, frame)
    statistic, p_value = res.ks_statistic()
    out = _out_dir(out)
    pd.DataFrame(
        {"t": np.arange(1, len(frame) + 1), "residual": res.values}
    ).to_csv(out / "residuals.csv", index=False)
    summary = {
        "ks_statistic": statistic,
        "ks_p_value": p_value,
        "n_clamped": res.n_clamped,
        "n_observations": len(frame),
    }
    with open(out / "residuals_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    click.echo(
        f"wrote {out / 'residuals.csv'}; KS statistic {statistic:.4f} "
        f"(p={p_value:.4g})"
    )


def _band_options(fn):
    fn = click.option("--grid-size", type=int, default=100, show_default=True)(fn)
    fn = click.option("--draws", type=int, default=1000, show_default=True)(fn)
    fn = click.option("--level", type=float, default=0.95, show_default=True)(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--no-bands", is_flag=True, default=False)(fn)
    fn = click.option("--covariate", default=None,
                      help="Covariate for the grid (required when ambiguous).")(fn)
    return fn


def _resolve_covariate(names, requested, what) -> str:
    if requested is not None:
        if requested not in names:
            raise ConfigError(
                f"'{requested}' is not a {what} covariate of this model "
                f"(available: {', '.join(names) or 'none'})"
            )
        return requested
    if len(names) == 1:
        return names[0]
    raise ConfigError(
        f"model has {len(names)} {what} covariates; pass --covariate "
        f"(available: {', '.join(names) or 'none'})"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--quantiles", default=None,
              help="Comma-separated probabilities for conditional response quantiles.")
@_band_options
@handle_errors
def effects(model_path, out, quantiles, grid_size, draws, level, seed, no_bands, covariate):
    """Write state-dependent parameter curves over a covariate grid."""
    fitted = _load_model(model_path)
    structure = fitted.structure
    names = []
    for parameter in structure.family.parameter_names:
        for cov in structure.dist_layouts[parameter].predictor.covariates():
            if cov not in names:
                names.append(cov)
    cov = _resolve_covariate(names, covariate, "distribution")
    values = structure.default_grid(cov, grid_size)
    grid = structure.grid_frame(cov, values)

    probs = None
    if quantiles:
        probs = [float(p) for p in str(quantiles).split(",")]
    curves = predict_parameters(fitted, grid, quantiles=probs)

    samples = None
    if not no_bands:
        samples = sample_posterior(fitted, n_draws=draws, seed=seed)

    rows = []
    for parameter, matrix in curves.parameters.items():
        for state in range(structure.n_states):
            if samples is not None:
                band = effect_band(fitted, samples, parameter, state, grid, level=level)
                lower, upper = band.lower, band.upper
            else:
                lower = upper = np.full(len(values), np.nan)
            for g, value in enumerate(values):
                rows.append(
                    {
                        "parameter": parameter,
                        "state": state + 1,
                        "covariate": cov,
                        "value": value,
                        "estimate": matrix[g, state],
                        "lower": lower[g],
                        "upper": upper[g],
                    }
                )
    out = _out_dir(out)
    pd.DataFrame(rows).to_csv(out / "effects.csv", index=False)
    written = [str(out / "effects.csv")]
    if curves.quantiles is not None:
        qrows = []
        for p, matrix in curves.quantiles.items():
            for state in range(structure.n_states):
                for g, value in enumerate(values):
                    qrows.append(
                        {
                            "state": state + 1,
                            "covariate": cov,
                            "value": value,
                            "p": p,
                            "quantile": matrix[g, state],
                        }
                    )
        pd.DataFrame(qrows).to_csv(out / "effects_quantiles.csv", index=False)
        written.append(str(out / "effects_quantiles.csv"))
    click.echo("wrote " + ", ".join(written))


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@_band_options
@handle_errors
def transitions(model_path, out, grid_size, draws, level, seed, no_bands, covariate):
    """Write transition probabilities over a transition-covariate grid."""
    fitted = _load_model(model_path)
    structure = fitted.structure
    cov = _resolve_covariate(
        list(structure.transition_covariates()), covariate, "transition"
    )
    values = structure.default_grid(cov, grid_size)
    grid = structure.grid_frame(cov, values)
    tm = fitted.transition_model()
    estimate = tm.tpm_grid(grid)
    samples = None
    if not no_bands:
        samples = sample_posterior(fitted, n_draws=draws, seed=seed)
    rows = []
    n = structure.n_states
    for i in range(n):
        for j in range(n):
            if samples is not None:
                band = transition_band(fitted, samples, (i, j), grid, level=level)
                lower, upper = band.lower, band.upper
            else:
                lower = upper = np.full(len(values), np.nan)
            for g, value in enumerate(values):
                rows.append(
                    {
                        "from_state": i + 1,
                        "to_state": j + 1,
                        "covariate": cov,
                        "value": value,
                        "estimate": estimate[g, i, j],
                        "lower": lower[g],
                        "upper": upper[g],
                    }
                )
    out = _out_dir(out)
    pd.DataFrame(rows).to_csv(out / "transitions.csv", index=False)
    click.echo(f"wrote {out / 'transitions.csv'}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
@_band_options
@handle_errors
def stationary(model_path, out, grid_size, draws, level, seed, no_bands, covariate):
    """Write covariate-dependent stationary state probabilities."""
    fitted = _load_model(model_path)
    structure = fitted.structure
    cov = _resolve_covariate(
        list(structure.transition_covariates()), covariate, "transition"
    )
    values = structure.default_grid(cov, grid_size)
    grid = structure.grid_frame(cov, values)
    tm = fitted.transition_model()
    estimate = tm.stationary_curve(grid)
    samples = None
    if not no_bands:
        samples = sample_posterior(fitted, n_draws=draws, seed=seed)
    rows = []
    for state in range(structure.n_states):
        if samples is not None:
            band = transition_band(
                fitted, samples, ("stationary", state), grid, level=level
            )
            lower, upper = band.lower, band.upper
        else:
            lower = upper = np.full(len(values), np.nan)
        for g, value in enumerate(values):
            rows.append(
                {
                    "state": state + 1,
                    "covariate": cov,
                    "value": value,
                    "estimate": estimate[g, state],
                    "lower": lower[g],
                    "upper": upper[g],
                }
            )
    out = _out_dir(out)
    pd.DataFrame(rows).to_csv(out / "stationary.csv", index=False)
    click.echo(f"wrote {out / 'stationary.csv'}")


if __name__ == "__main__":
    main()
