"""Time-series data container and CSV ingestion with lag transforms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError


@dataclass
class TimeSeriesFrame:
    """Response plus aligned covariate columns, in time order.

    All columns must have equal length and contain only finite values;
    ``labels`` is an optional opaque column (e.g. dates) carried through
    to outputs but never parsed.
    """

    response: np.ndarray
    covariates: dict[str, np.ndarray] = field(default_factory=dict)
    response_name: str = "y"
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.response = _validated_column(self.response, self.response_name)
        self.covariates = {
            name: _validated_column(values, name)
            for name, values in self.covariates.items()
        }
        n = len(self.response)
        for name, values in self.covariates.items():
            if len(values) != n:
                raise DataError(
                    f"column '{name}' has length {len(values)}, response has {n}"
                )
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if len(self.labels) != n:
                raise DataError("label column length differs from response")
        if self.response_name in self.covariates:
            raise ConfigError(
                f"response column '{self.response_name}' also listed as covariate"
            )

    def __len__(self) -> int:
        return len(self.response)

    def to_pandas(self) -> pd.DataFrame:
        data = {self.response_name: self.response, **self.covariates}
        df = pd.DataFrame(data)
        if self.labels is not None:
            df.insert(0, "label", self.labels)
        return df

    @classmethod
    def from_pandas(cls, df: pd.DataFrame, response: str,
                    label_column: str | None = None) -> "TimeSeriesFrame":
        if response not in df.columns:
            raise ConfigError(f"response column '{response}' not found")
        labels = None
        if label_column is not None:
            if label_column not in df.columns:
                raise ConfigError(f"label column '{label_column}' not found")
            labels = df[label_column].to_numpy()
        covariates = {}
        for name in df.columns:
            if name in (response, label_column):
                continue
            covariates[name] = _numeric_column(df[name], name)
        return cls(
            response=_numeric_column(df[response], response),
            covariates=covariates,
            response_name=response,
            labels=labels,
        )


def _validated_column(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"column '{name}' must be 1-d, got shape {arr.shape}")
    if arr.size == 0:
        raise DataError(f"column '{name}' is empty")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"column '{name}': non-finite value at row {int(bad[0])}")
    return arr


def _numeric_column(series: pd.Series, name: str) -> np.ndarray:
    converted = pd.to_numeric(series, errors="coerce")
    bad = converted.isna() & ~series.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError(
            f"column '{name}', row {row}: cannot parse value {series.iloc[row]!r}"
        )
    if converted.isna().any():
        row = int(np.flatnonzero(converted.isna().to_numpy())[0])
        raise DataError(f"column '{name}', row {row}: missing value")
    return converted.to_numpy(dtype=float)


def apply_lags(frame: TimeSeriesFrame, lags: Mapping[str, int]) -> TimeSeriesFrame:
    """Replace columns by their lagged values and trim the burn-in rows.

    ``lags[name] = L`` makes row ``t`` carry the value from row ``t - L``;
    the first ``max(L)`` rows (where lagged values do not exist) are
    dropped from every column including the response.
    """
    if not lags:
        return frame
    n = len(frame)
    for name, lag in lags.items():
        if name == frame.response_name:
            raise ConfigError("the response column cannot be lagged")
        if name not in frame.covariates:
            raise ConfigError(f"lag directive references unknown column '{name}'")
        if not 0 < int(lag) < n:
            raise ConfigError(
                f"lag({name}, {lag}): lag must lie in [1, {n - 1}] for {n} rows"
            )
    max_lag = max(int(lag) for lag in lags.values())
    covariates = {}
    for name, values in frame.covariates.items():
        lag = int(lags.get(name, 0))
        covariates[name] = values[max_lag - lag : n - lag]
    return TimeSeriesFrame(
        response=frame.response[max_lag:],
        covariates=covariates,
        response_name=frame.response_name,
        labels=None if frame.labels is None else frame.labels[max_lag:],
    )


def load_frame(path, response: str, lags: Mapping[str, int] | None = None,
               label_column: str | None = None) -> TimeSeriesFrame:
    """Read a CSV file into a :class:`TimeSeriesFrame`, applying lags."""
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {path}") from None
    except Exception as exc:  # malformed CSV
        raise DataError(f"cannot read CSV file {path}: {exc}") from exc
    if df.empty:
        raise DataError(f"data file {path} has no rows")
    frame = TimeSeriesFrame.from_pandas(df, response, label_column=label_column)
    return apply_lags(frame, lags or {})
