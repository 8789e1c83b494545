import numpy as np
import pandas as pd
import pytest

from msgamlss.config import (
    RunConfig,
    load_config,
    parse_lag,
    parse_lags,
    parse_term,
    parse_transition,
)
from msgamlss.data import TimeSeriesFrame, apply_lags, load_frame
from msgamlss.exceptions import ConfigError, DataError
from msgamlss.model import LinearTerm, Predictor
from msgamlss.splines import SmoothSpec


class TestTimeSeriesFrame:
    def test_basic_construction(self):
        frame = TimeSeriesFrame(
            response=[1.0, 2.0], covariates={"x": [0.1, 0.2]}
        )
        assert len(frame) == 2

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            TimeSeriesFrame(response=[1.0, 2.0], covariates={"x": [0.1]})

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="row 1"):
            TimeSeriesFrame(response=[1.0, np.nan], covariates={})

    def test_response_name_clash(self):
        with pytest.raises(ConfigError):
            TimeSeriesFrame(response=[1.0], covariates={"y": [1.0]}, response_name="y")

    def test_pandas_round_trip(self):
        frame = TimeSeriesFrame(
            response=[1.0, 2.0],
            covariates={"x": [3.0, 4.0]},
            response_name="price",
        )
        df = frame.to_pandas()
        back = TimeSeriesFrame.from_pandas(df, "price")
        np.testing.assert_array_equal(back.response, frame.response)
        np.testing.assert_array_equal(back.covariates["x"], frame.covariates["x"])


class TestLags:
    def test_shift_semantics(self):
        frame = TimeSeriesFrame(
            response=[10.0, 20.0, 30.0], covariates={"x": [1.0, 2.0, 3.0]}
        )
        lagged = apply_lags(frame, {"x": 1})
        np.testing.assert_array_equal(lagged.response, [20.0, 30.0])
        np.testing.assert_array_equal(lagged.covariates["x"], [1.0, 2.0])

    def test_no_lags_keeps_length(self):
        frame = TimeSeriesFrame(response=[1.0, 2.0], covariates={})
        assert len(apply_lags(frame, {})) == 2

    def test_row_count_with_long_lag(self, tmp_path):
        n = 6515
        df = pd.DataFrame(
            {"y": np.arange(n, dtype=float), "spread": np.arange(n, dtype=float)}
        )
        path = tmp_path / "long.csv"
        df.to_csv(path, index=False)
        frame = load_frame(path, "y", {"spread": 360})
        assert len(frame) == 6155
        # row t carries the value from t - 360
        np.testing.assert_array_equal(
            frame.covariates["spread"], frame.response - 360
        )

    def test_mixed_lags_align_on_longest(self):
        frame = TimeSeriesFrame(
            response=np.arange(10.0),
            covariates={"a": np.arange(10.0), "b": np.arange(10.0)},
        )
        lagged = apply_lags(frame, {"a": 3, "b": 1})
        assert len(lagged) == 7
        np.testing.assert_array_equal(lagged.covariates["a"], np.arange(7.0))
        np.testing.assert_array_equal(lagged.covariates["b"], np.arange(2.0, 9.0))

    def test_lag_validation(self):
        frame = TimeSeriesFrame(response=[1.0, 2.0], covariates={"x": [1.0, 2.0]})
        with pytest.raises(ConfigError):
            apply_lags(frame, {"x": 2})  # lag >= T
        with pytest.raises(ConfigError):
            apply_lags(frame, {"missing": 1})
        with pytest.raises(ConfigError):
            apply_lags(frame, {"y": 1})


class TestLoadFrame:
    def test_unparsable_cell_reports_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(DataError, match="column 'x', row 1"):
            load_frame(path, "y")

    def test_missing_cell_reports_location(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("y,x\n1.0,2.0\n3.0,\n")
        with pytest.raises(DataError, match="row 1"):
            load_frame(path, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_frame(tmp_path / "nope.csv", "y")

    def test_label_column_carried_opaque(self, tmp_path):
        path = tmp_path / "dated.csv"
        path.write_text("date,y,x\n2020-01-01,1.0,2.0\n2020-01-02,3.0,4.0\n")
        frame = load_frame(path, "y", label_column="date")
        assert list(frame.labels) == ["2020-01-01", "2020-01-02"]
        assert "date" not in frame.covariates


class TestTermGrammar:
    def test_smooth_with_options(self):
        term = parse_term("smooth(oil, k=12, degree=2, order=1)")
        assert term == SmoothSpec("oil", num_basis=12, degree=2, penalty_order=1)

    def test_smooth_defaults(self):
        assert parse_term("smooth(x)") == SmoothSpec("x")

    def test_linear_forms(self):
        assert parse_term("linear(x)") == LinearTerm("x")
        assert parse_term("x") == LinearTerm("x")

    def test_small_basis_rejected(self):
        with pytest.raises(ConfigError, match="at least 4"):
            parse_term("smooth(x, k=3)")

    def test_garbage_rejected(self):
        for bad in ("smooth()", "smooth(x, q=3)", "spline(x)", "2x"):
            with pytest.raises(ConfigError):
                parse_term(bad)

    def test_transition_forms(self):
        shared = parse_transition(["smooth(z)"])
        assert isinstance(shared, Predictor)
        per_pair = parse_transition({"1->2": ["z"], "2->1": []})
        assert per_pair[(0, 1)] == Predictor((LinearTerm("z"),))
        assert per_pair[(1, 0)] == Predictor()
        with pytest.raises(ConfigError):
            parse_transition({"1-2": ["z"]})

    def test_lag_grammar(self):
        assert parse_lag("lag(spread, 360)") == ("spread", 360)
        with pytest.raises(ConfigError):
            parse_lag("lag(spread)")
        assert parse_lags(["lag(a, 1)", "lag(b, 2)"]) == {"a": 1, "b": 2}
        with pytest.raises(ConfigError, match="duplicate"):
            parse_lags(["lag(a, 1)", "lag(a, 2)"])


class TestRunConfig:
    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            """
data: data.csv
response: price
family: skew-normal
states: 2
mu: [smooth(oil_price)]
sigma: [smooth(oil_price)]
nu: [smooth(oil_price)]
transition: [smooth(exchange_rate)]
lags: {exchange_rate: 2}
initial: uniform
seed: 7
out: results
optimizer: {max_outer: 30, initial_lambda: 1000.0}
"""
        )
        cfg = load_config(path)
        assert cfg.family == "skew-normal"
        assert cfg.lags == {"exchange_rate": 2}
        spec = cfg.build_spec()
        assert spec.n_states == 2
        assert spec.predictor_for("nu").terms[0].covariate == "oil_price"
        optimizer = cfg.build_optimizer()
        assert optimizer.max_outer == 30
        assert optimizer.initial_lambda == 1000.0

    def test_missing_required_keys(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("data: d.csv\n")
        with pytest.raises(ConfigError, match="response"):
            load_config(path)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("data: d.csv\nresponse: y\nbanana: 1\n")
        with pytest.raises(ConfigError, match="banana"):
            load_config(path)

    def test_unknown_optimizer_option(self):
        cfg = RunConfig(data="d.csv", response="y", optimizer={"turbo": True})
        with pytest.raises(ConfigError, match="turbo"):
            cfg.build_optimizer()

    def test_fixed_initial_vector(self):
        cfg = RunConfig(data="d", response="y", initial=[0.5, 0.5])
        spec = cfg.build_spec()
        assert spec.initial.mode == "fixed"
        np.testing.assert_allclose(spec.initial.vector(2), [0.5, 0.5])
