"""Pearson correlation, metric frames, and report serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qe_gauge.stats_core import (
    CorrelationMatrix,
    DegenerateInput,
    LengthMismatch,
    MetricFrame,
    correlation_matrix,
    listwise_frame,
    matrix_to_long_csv,
    matrix_to_tsv,
    pearson,
)


def pearson_oracle(x, y):
    """Two-pass covariance / SD definition, independent of the implementation."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


class TestPearson:
    def test_exact_positive(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)

    def test_exact_negative(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)

    def test_against_oracle(self):
        x, y = [1, 2, 4, 8], [1, 3, 2, 5]
        assert pearson(x, y) == pytest.approx(pearson_oracle(x, y), abs=1e-12)

    def test_constant_column(self):
        with pytest.raises(DegenerateInput):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            pearson([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(DegenerateInput):
            pearson([1], [2])

    def test_affine_images(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, 50)
        assert pearson(x, 3.5 * x + 2) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, -0.25 * x + 7) == pytest.approx(-1.0, abs=1e-12)

    @settings(max_examples=100)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x = rng.normal(0, 1, 30)
        y = rng.normal(0, 1, 30)
        assert pearson(a * x + b, y) == pytest.approx(pearson(x, y), abs=1e-12)


class TestMetricFrame:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            MetricFrame([("x", [1.0, float("nan")])])

    def test_rejects_ragged(self):
        with pytest.raises(LengthMismatch):
            MetricFrame([("x", [1.0, 2.0]), ("y", [1.0])])

    def test_factor_access(self):
        frame = MetricFrame([("x", [1.0, 2.0])], [("g", ["a", "b"])])
        assert frame.factor("g") == ["a", "b"]
        assert frame.has_factor("g") and not frame.has_factor("x")
        assert frame.factor_names == ["g"]


class TestCorrelationMatrix:
    def test_single_column(self):
        cm = correlation_matrix(MetricFrame([("x", [1.0, 2.0, 5.0])]))
        assert cm.names == ["x"]
        assert cm.r.tolist() == [[1.0]]

    def test_negation(self):
        x = [1.0, 2.0, 4.0]
        cm = correlation_matrix(MetricFrame([("x", x), ("neg", [-v for v in x])]))
        assert cm.r[0, 1] == pytest.approx(-1.0, abs=1e-15)

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(7)
        cols = [(f"c{i}", rng.normal(0, 1, 40)) for i in range(4)]
        cm = correlation_matrix(MetricFrame(cols))
        for i in range(4):
            for j in range(4):
                expected = 1.0 if i == j else pearson_oracle(cols[i][1], cols[j][1])
                assert cm.r[i, j] == pytest.approx(expected, abs=1e-12)

    def test_degenerate_column_is_named(self):
        frame = MetricFrame([("x", [1.0, 2.0, 3.0]), ("hter", [0.5, 0.5, 0.5])])
        with pytest.raises(DegenerateInput) as exc:
            correlation_matrix(frame)
        assert exc.value.column == "hter"

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(8)
        cols = [(f"c{i}", rng.normal(0, 1, 25)) for i in range(5)]
        cm = correlation_matrix(MetricFrame(cols))
        assert np.max(np.abs(cm.r - cm.r.T)) <= 1e-15
        assert np.max(np.abs(np.diag(cm.r) - 1.0)) <= 1e-12

    def test_reorder_invariance(self):
        rng = np.random.default_rng(9)
        cols = [(f"c{i}", rng.normal(0, 1, 30)) for i in range(3)]
        cm = correlation_matrix(MetricFrame(cols))
        perm = [2, 0, 1]
        cm_p = correlation_matrix(MetricFrame([cols[i] for i in perm]))
        for a, i in enumerate(perm):
            for b, j in enumerate(perm):
                assert cm_p.r[a, b] == cm.r[i, j]

    def test_constructor_validates(self):
        with pytest.raises(ValueError):
            CorrelationMatrix(["a", "b"], np.array([[1.0, 0.5], [0.4, 1.0]]))
        with pytest.raises(ValueError):
            CorrelationMatrix(["a"], np.array([[0.9]]))


class TestListwiseFrame:
    def test_drops_incomplete_rows(self):
        frame, dropped = listwise_frame(
            [("x", [1.0, None, 3.0, float("nan")]), ("y", [1.0, 2.0, 3.0, 4.0])],
            [("g", ["a", "b", "c", "d"])])
        assert dropped == 2
        assert frame.column("x").tolist() == [1.0, 3.0]
        assert frame.factor("g") == ["a", "c"]

    def test_nothing_to_drop(self):
        frame, dropped = listwise_frame([("x", [1.0, 2.0])])
        assert dropped == 0 and frame.n_rows == 2


class TestExports:
    def _cm(self):
        rng = np.random.default_rng(10)
        cols = [("alpha", rng.normal(0, 1, 20)), ("beta", rng.normal(0, 1, 20))]
        return correlation_matrix(MetricFrame(cols))

    def test_tsv_shape_and_round_trip(self):
        cm = self._cm()
        lines = matrix_to_tsv(cm).splitlines()
        assert lines[0].split("\t") == ["", "alpha", "beta"]
        assert len(lines) == 3
        assert float(lines[1].split("\t")[2]) == cm.r[0, 1]

    def test_long_csv(self):
        cm = self._cm()
        lines = matrix_to_long_csv(cm, 20).splitlines()
        assert lines[0] == "name_i,name_j,r,n"
        assert len(lines) == 1 + 4
        cells = lines[2].split(",")
        assert cells[:2] == ["alpha", "beta"]
        assert float(cells[2]) == cm.r[0, 1]
        assert cells[3] == "20"
