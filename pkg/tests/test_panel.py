import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from panelcup.errors import (
    DegenerateProjection,
    DimensionMismatch,
    DuplicateCell,
    MissingColumn,
    NonNumericField,
    TooShort,
    UnbalancedPanel,
)
from panelcup.panel import (
    DetrendSpec,
    PanelDataset,
    first_difference,
    load_panel,
    project_deterministics,
    read_csv,
    to_records,
    write_csv,
)


def _rows(units, times, f=lambda u, t: (u + t, u - t)):
    out = []
    for u in units:
        for t in times:
            y, x = f(u, t)
            out.append({"unit": u, "time": t, "y": y, "x1": x})
    return out


def _series_panel(values):
    v = np.asarray(values, dtype=float)
    return PanelDataset(v[None, :], v[None, :, None])


class TestLoadPanel:
    def test_sorted_regardless_of_input_order(self):
        rows = _rows([2, 1], [2, 1])
        rows.reverse()
        p = load_panel(rows)
        assert p.unit_ids == (1, 2)
        assert p.time_ids == (1, 2)
        assert_array_equal(p.y, [[2, 3], [3, 4]])
        assert_array_equal(p.x[:, :, 0], [[0, -1], [1, 0]])

    def test_two_by_three(self):
        p = load_panel(_rows([1, 2], [1, 2, 3]))
        assert (p.n, p.T, p.k) == (2, 3, 1)

    def test_string_labels_sort_numerically(self):
        rows = _rows(["10", "9"], ["1", "2"], lambda u, t: (1.0, 2.0))
        assert load_panel(rows).unit_ids == (9, 10)

    def test_missing_cell(self):
        rows = _rows([1, 2], [1, 2])
        rows = [r for r in rows if not (r["unit"] == 2 and r["time"] == 2)]
        with pytest.raises(UnbalancedPanel) as err:
            load_panel(rows)
        assert "2" in str(err.value)

    def test_duplicate_cell(self):
        rows = _rows([1], [1, 2]) + _rows([1], [2])
        with pytest.raises(DuplicateCell):
            load_panel(rows)

    def test_non_numeric(self):
        rows = _rows([1], [1, 2])
        rows[1]["y"] = "abc"
        with pytest.raises(NonNumericField) as err:
            load_panel(rows)
        assert "abc" in str(err.value)

    def test_missing_column(self):
        rows = [{"unit": 1, "time": 1, "x1": 0.0}]
        with pytest.raises(MissingColumn) as err:
            load_panel(rows)
        assert "y" in str(err.value)

    def test_records_roundtrip(self, rng):
        p = PanelDataset(rng.standard_normal((3, 5)), rng.standard_normal((3, 5, 2)))
        assert load_panel(to_records(p), x_names=p.x_names) == p

    def test_csv_roundtrip(self, tmp_path, rng):
        p = PanelDataset(rng.standard_normal((4, 6)), rng.standard_normal((4, 6, 2)))
        path = tmp_path / "panel.csv"
        write_csv(p, path)
        with open(path) as fh:
            assert next(csv.reader(fh)) == ["unit", "time", "y", "x1", "x2"]
        assert read_csv(path) == p


class TestPanelDataset:
    def test_arrays_are_read_only_copies(self):
        y = np.zeros((2, 3))
        p = PanelDataset(y, np.zeros((2, 3)))
        y[0, 0] = 1.0
        assert p.y[0, 0] == 0.0
        with pytest.raises(ValueError):
            p.y[0, 0] = 2.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            PanelDataset(np.zeros((2, 3)), np.zeros((2, 4, 1)))

    def test_non_finite(self):
        with pytest.raises(NonNumericField):
            PanelDataset(np.array([[0.0, np.nan]]), np.zeros((1, 2)))

    def test_estimable_bounds(self):
        with pytest.raises(TooShort):
            PanelDataset(np.zeros((1, 2)), np.zeros((1, 2))).require_estimable()
        PanelDataset(np.zeros((2, 4)), np.zeros((2, 4))).require_estimable()


class TestDeterministics:
    def test_demean(self):
        out = project_deterministics(_series_panel([1, 2, 3]), "demean")
        assert_allclose(out.y[0], [-1, 0, 1], atol=1e-12)

    def test_trend_annihilates_line(self):
        t = np.arange(1, 9, dtype=float)
        out = project_deterministics(_series_panel(3.0 - 0.5 * t), "demean_and_trend")
        assert_allclose(out.y[0], 0.0, atol=1e-12)

    def test_trend_matches_normal_equations(self):
        z = np.array([1.0, 4.0, 9.0, 16.0])
        D = np.column_stack([np.ones(4), np.arange(1, 5.0)])
        coef = np.linalg.solve(D.T @ D, D.T @ z)
        out = project_deterministics(_series_panel(z), "trend")
        assert_allclose(out.y[0], z - D @ coef, atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateProjection):
            project_deterministics(_series_panel([1.0, 2.0]), "demean_and_trend")

    def test_none_is_identity(self):
        p = _series_panel([1.0, 5.0, 2.0])
        assert project_deterministics(p, DetrendSpec()) is p

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            DetrendSpec("quadratic")

    @given(arrays(np.float64, (3, 7), elements=st.floats(-1e3, 1e3)), st.sampled_from(["demean", "demean_and_trend"]))
    def test_idempotent(self, y, mode):
        p = PanelDataset(y, y[:, :, None])
        once = project_deterministics(p, mode)
        twice = project_deterministics(once, mode)
        assert_allclose(twice.y, once.y, atol=1e-9)

    @given(arrays(np.float64, (6,), elements=st.floats(-1e3, 1e3)))
    def test_differencing_kills_unit_constant(self, z):
        out = project_deterministics(_series_panel(z), "demean").y[0]
        assert_allclose(np.diff(out), np.diff(z), atol=1e-9)


class TestFirstDifference:
    def test_telescoping(self):
        d = first_difference([0.0, 1.0, 3.0, 6.0])
        assert_array_equal(d.values, [1, 2, 3])
        assert d.origin_offset == 2 and len(d) == 3

    def test_constant(self):
        assert_array_equal(first_difference(np.full((5, 2), 4.0)).values, 0.0)

    def test_inverts_cumsum(self, rng):
        e = rng.standard_normal(50)
        assert_allclose(first_difference(np.cumsum(e)).values, e[1:], rtol=1e-12, atol=1e-12)

    def test_too_short(self):
        with pytest.raises(TooShort):
            first_difference([1.0])
