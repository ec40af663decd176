import numpy as np
import pytest

from core.errors import DimensionError, InputError, ParameterError
from fkwc.depth import DepthKind, DepthSpec
from fkwc.fdata import (
    FunctionalDataset,
    Grid,
    center_by_deepest,
    differentiate,
    gram_matrix,
    inner_product,
    l2_norm,
    load_csv,
    load_dataset,
    load_derivatives,
    load_json,
    save_csv,
    save_json,
)


class TestGrid:
    def test_points_and_step(self):
        grid = Grid(11)
        assert grid.points[0] == 0.0
        assert grid.points[-1] == 1.0
        assert grid.step == pytest.approx(0.1)

    def test_weights_sum_to_one(self):
        assert Grid(101).weights.sum() == pytest.approx(1.0, abs=1e-14)

    def test_too_small(self):
        with pytest.raises(ParameterError):
            Grid(2)

    def test_from_points_rejects_uneven_spacing(self):
        with pytest.raises(InputError, match="equispaced"):
            Grid.from_points([0.0, 0.2, 1.0])

    def test_from_points_rebuilds_grid(self):
        assert Grid.from_points([0.0, 0.25, 0.5, 0.75, 1.0]) == Grid(5)


class TestGeometry:
    def test_constant_curve_norm(self):
        grid = Grid(51)
        assert l2_norm(np.full(51, 3.0), grid) == pytest.approx(3.0)

    def test_inner_product_is_symmetric(self, rng, grid):
        f, g = rng.standard_normal((2, grid.m))
        assert inner_product(f, g, grid) == inner_product(g, f, grid)

    def test_sine_norm(self):
        grid = Grid(1001)
        f = np.sin(2 * np.pi * grid.points)
        assert inner_product(f, f, grid) == pytest.approx(0.5, abs=1e-6)

    def test_mismatched_grid(self, grid):
        with pytest.raises(DimensionError):
            inner_product(np.zeros(grid.m), np.zeros(grid.m + 1), grid)

    def test_gram_matrix_matches_inner_products(self, rng, grid):
        X = rng.standard_normal((3, grid.m))
        Y = rng.standard_normal((4, grid.m))
        G = gram_matrix(X, Y, grid)
        assert G.shape == (3, 4)
        assert G[1, 2] == pytest.approx(inner_product(X[1], Y[2], grid))

    def test_derivative_of_quadratic_is_exact(self, grid):
        t = grid.points
        np.testing.assert_allclose(differentiate(t ** 2, grid), 2 * t, atol=1e-12)

    def test_derivative_along_rows(self, grid):
        t = grid.points
        curves = np.vstack([3 * t, -t + 1])
        np.testing.assert_allclose(differentiate(curves, grid), [[3.0] * grid.m, [-1.0] * grid.m], atol=1e-12)


class TestFunctionalDataset:
    def test_group_sizes(self, three_groups):
        assert three_groups.num_groups == 3
        assert three_groups.group_sizes.tolist() == [12, 12, 12]
        assert three_groups.n == 36

    def test_curves_are_read_only(self, three_groups):
        with pytest.raises(ValueError):
            three_groups.curves[0, 0] = 1.0

    def test_labels_must_cover_range(self, grid):
        with pytest.raises(InputError, match="cover 1..3"):
            FunctionalDataset(grid, np.zeros((2, grid.m)), np.array([1, 3]))

    def test_non_integer_labels(self, grid):
        with pytest.raises(InputError):
            FunctionalDataset(grid, np.zeros((2, grid.m)), np.array([1.0, 1.5]))

    def test_non_finite_values(self, grid):
        curves = np.zeros((2, grid.m))
        curves[1, 4] = np.nan
        with pytest.raises(InputError, match="curve 1"):
            FunctionalDataset(grid, curves, np.array([1, 1]))

    def test_derivative_shape(self, grid):
        with pytest.raises(DimensionError):
            FunctionalDataset(grid, np.zeros((2, grid.m)), np.array([1, 1]), np.zeros((3, grid.m)))

    def test_select_groups_relabels_in_order(self, three_groups):
        sub = three_groups.select_groups([3, 1])
        assert sub.num_groups == 2
        np.testing.assert_array_equal(sub.curves[sub.groups == 1], three_groups.curves[three_groups.groups == 3])

    def test_select_unknown_group(self, three_groups):
        with pytest.raises(ParameterError):
            three_groups.select_groups([1, 4])

    def test_with_derivatives(self, three_groups):
        ds = three_groups.with_derivatives()
        np.testing.assert_allclose(ds.derivatives, differentiate(three_groups.curves, ds.grid))
        assert ds.with_derivatives() is ds

    def test_scaled_uses_product_rule(self, grid, rng):
        ds = FunctionalDataset(grid, rng.standard_normal((4, grid.m)), np.array([1, 1, 2, 2])).with_derivatives()
        a = 1.0 + grid.points
        scaled = ds.scaled(a)
        np.testing.assert_allclose(scaled.curves, ds.curves * a)
        np.testing.assert_allclose(scaled.derivatives, a * ds.derivatives + ds.curves, atol=1e-10)

    def test_shifted(self, three_groups):
        shifted = three_groups.shifted(2.0)
        np.testing.assert_allclose(shifted.curves, three_groups.curves + 2.0)


class TestCenterByDeepest:
    def test_deepest_curve_becomes_zero(self, grid):
        ones = np.ones(grid.m)
        curves = np.vstack([0 * ones, 1 * ones, 2 * ones, 10 * ones, 11 * ones, 12 * ones])
        ds = FunctionalDataset(grid, curves, np.array([1, 1, 1, 2, 2, 2]))
        centred = center_by_deepest(ds, DepthSpec(DepthKind.MBD))
        np.testing.assert_allclose(centred.curves[1], 0.0)
        np.testing.assert_allclose(centred.curves[4], 0.0)
        np.testing.assert_allclose(centred.curves[3], -ones)


class TestCsv:
    def test_round_trip(self, tmp_path, three_groups):
        path = tmp_path / "data.csv"
        save_csv(three_groups, path)
        loaded = load_csv(path)
        np.testing.assert_array_equal(loaded.curves, three_groups.curves)
        np.testing.assert_array_equal(loaded.groups, three_groups.groups)

    def test_seventeen_digit_values_read_exactly(self, tmp_path):
        values = np.random.default_rng(11).standard_normal((40, 5)) * np.logspace(-3, 3, 5)
        rows = "".join(f"1,{','.join(repr(float(v)) for v in row)}\n" for row in values)
        path = tmp_path / "data.csv"
        path.write_text("group,0.0,0.25,0.5,0.75,1.0\n" + rows)
        np.testing.assert_array_equal(load_csv(path).curves, values)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,0.0,0.5,1.0\n1,0.1,0.2,0.3\n2,0.1,abc,0.3\n")
        with pytest.raises(InputError, match=r"row 2 \(line 3\), column '0.5'"):
            load_csv(path)

    def test_missing_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,0.0,0.5,1.0\n1,0.1,,0.3\n2,0.1,0.2,0.3\n")
        with pytest.raises(InputError, match="missing value"):
            load_csv(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,0.0,0.5,1.0\n1,0.1,0.2,0.3\n2,0.1,0.2,0.3,0.4,0.5\n")
        with pytest.raises(InputError, match="ragged"):
            load_csv(path)

    def test_header_must_start_with_group(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,0.0,0.5,1.0\n1,0.1,0.2,0.3\n")
        with pytest.raises(InputError, match="group"):
            load_csv(path)

    def test_fractional_group_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,0.0,0.5,1.0\n1.5,0.1,0.2,0.3\n")
        with pytest.raises(InputError, match="not an integer"):
            load_csv(path)

    def test_short_header_decimals_accepted(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("group,0,0.333333,0.666667,1\n1,1,2,3,4\n2,4,3,2,1\n")
        assert load_csv(path).grid == Grid(4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_csv(tmp_path / "nope.csv")

    def test_external_derivatives(self, tmp_path, three_groups):
        with_d = three_groups.with_derivatives()
        save_csv(with_d, tmp_path / "x.csv", tmp_path / "dx.csv")
        loaded = load_derivatives(load_csv(tmp_path / "x.csv"), tmp_path / "dx.csv")
        np.testing.assert_array_equal(loaded.derivatives, with_d.derivatives)


class TestJson:
    def test_round_trip_with_derivatives(self, tmp_path, three_groups):
        ds = three_groups.with_derivatives()
        path = tmp_path / "data.json"
        save_json(ds, path)
        loaded = load_json(path)
        np.testing.assert_array_equal(loaded.curves, ds.curves)
        np.testing.assert_array_equal(loaded.derivatives, ds.derivatives)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "data.json"
        path.write_text('{"grid": [0, 0.5, 1], "groups": [1]}')
        with pytest.raises(InputError, match="curves"):
            load_json(path)

    def test_dispatch_by_suffix(self, tmp_path, three_groups):
        save_json(three_groups, tmp_path / "d.json")
        assert load_dataset(tmp_path / "d.json").n == three_groups.n

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InputError, match="unsupported"):
            load_dataset(tmp_path / "d.parquet")
