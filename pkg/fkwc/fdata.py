"""
Functional Data Core
Grid-based curves, L2 geometry, finite-difference derivatives and dataset I/O.

Curves are rows of float arrays evaluated on a shared equispaced grid over [0,1].
Every function here is pure; datasets are immutable once built.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from core.errors import DimensionError, InputError, ParameterError

GRID_TOLERANCE = 1e-12
HEADER_TOLERANCE = 1e-6  # header points are often written with few decimals
GROUP_COLUMN = "group"

Curve = np.ndarray


@dataclass(frozen=True)
class Grid:
    """Equispaced evaluation points on [0,1], endpoints included"""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 3:
            raise ParameterError(f"grid needs at least 3 points, got m={self.m}")
        object.__setattr__(self, "m", int(self.m))

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.linspace(0.0, 1.0, self.m)
        pts.setflags(write=False)
        return pts

    @property
    def step(self) -> float:
        return 1.0 / (self.m - 1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (sum to 1)"""
        w = np.full(self.m, self.step)
        w[0] = w[-1] = self.step / 2
        w.setflags(write=False)
        return w

    @classmethod
    def from_points(cls, points: Sequence[float], tol: float = GRID_TOLERANCE) -> "Grid":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise InputError(f"grid needs at least 3 points, got {pts.size}")
        grid = cls(pts.size)
        if np.any(np.diff(pts) <= 0):
            raise InputError("grid points must be strictly increasing")
        worst = float(np.max(np.abs(pts - grid.points)))
        if worst > tol:
            raise InputError(
                f"grid points are not equispaced over [0,1] "
                f"(largest deviation {worst:.3g} from linspace(0, 1, {pts.size}))"
            )
        return grid


def _check_on_grid(f: np.ndarray, grid: Grid, name: str = "curve"):
    if f.shape[-1] != grid.m:
        raise DimensionError(
            f"{name} has {f.shape[-1]} values but the grid has {grid.m} points"
        )


def inner_product(f: Curve, g: Curve, grid: Grid) -> Union[float, np.ndarray]:
    """Trapezoid approximation of the L2([0,1]) inner product"""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_on_grid(f, grid, "first curve")
    _check_on_grid(g, grid, "second curve")
    value = trapezoid(f * g, x=grid.points, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def l2_norm(f: Curve, grid: Grid) -> Union[float, np.ndarray]:
    sq = inner_product(f, f, grid)
    return np.sqrt(np.maximum(sq, 0.0)) if np.ndim(sq) else float(np.sqrt(max(sq, 0.0)))


def gram_matrix(X: np.ndarray, Y: np.ndarray, grid: Grid) -> np.ndarray:
    """All pairwise inner products <X_i, Y_j>"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _check_on_grid(X, grid)
    _check_on_grid(Y, grid)
    return (X * grid.weights) @ Y.T


def squared_norms(X: np.ndarray, grid: Grid) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_on_grid(X, grid)
    return (X * X) @ grid.weights


def differentiate(f: Curve, grid: Grid) -> Curve:
    """Central differences inside, second-order one-sided differences at the ends"""
    f = np.asarray(f, dtype=float)
    _check_on_grid(f, grid)
    return np.gradient(f, grid.step, axis=-1, edge_order=2)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """N curves on a common grid, labelled with groups 1..J"""

    grid: Grid
    curves: np.ndarray
    groups: np.ndarray
    derivatives: Optional[np.ndarray] = None
    group_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        curves = np.atleast_2d(np.asarray(self.curves, dtype=float))
        if curves.ndim != 2:
            raise DimensionError("curves must be an N x m array")
        _check_on_grid(curves, self.grid, "curves")
        if not np.all(np.isfinite(curves)):
            bad = np.argwhere(~np.isfinite(curves))[0]
            raise InputError(f"non-finite value in curve {bad[0]} at grid index {bad[1]}")

        groups = np.asarray(self.groups)
        if groups.shape != (curves.shape[0],):
            raise DimensionError(
                f"{groups.size} group labels given for {curves.shape[0]} curves"
            )
        if groups.size and not np.all(np.equal(np.mod(groups, 1), 0)):
            raise InputError("group labels must be integers")
        groups = groups.astype(int)
        if groups.size:
            J = int(groups.max())
            missing = sorted(set(range(1, J + 1)) - set(groups.tolist()))
            if groups.min() < 1 or missing:
                raise InputError(
                    f"group labels must cover 1..{J} (missing: {missing}, "
                    f"smallest label: {int(groups.min())})"
                )
        groups.setflags(write=False)

        derivs = self.derivatives
        if derivs is not None:
            derivs = np.atleast_2d(np.asarray(derivs, dtype=float))
            if derivs.shape != curves.shape:
                raise DimensionError(
                    f"derivatives have shape {derivs.shape}, curves {curves.shape}"
                )
            if not np.all(np.isfinite(derivs)):
                raise InputError("non-finite value in derivative curves")
            derivs = _frozen(derivs)

        object.__setattr__(self, "curves", _frozen(curves))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "derivatives", derivs)
        if self.group_names is not None:
            object.__setattr__(self, "group_names", tuple(str(g) for g in self.group_names))

    @classmethod
    def from_groups(cls, samples: Sequence[np.ndarray], grid: Optional[Grid] = None) -> "FunctionalDataset":
        """Stack one array of curves per group; labels follow list order"""
        arrays = [np.atleast_2d(np.asarray(s, dtype=float)) for s in samples]
        if grid is None:
            grid = Grid(arrays[0].shape[1])
        labels = np.concatenate([np.full(len(a), j + 1) for j, a in enumerate(arrays)])
        return cls(grid, np.vstack(arrays), labels)

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def num_groups(self) -> int:
        return int(self.groups.max()) if self.n else 0

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.num_groups + 1)[1:]

    def label(self, j: int) -> str:
        if self.group_names is not None:
            return self.group_names[j - 1]
        return str(j)

    def with_derivatives(self) -> "FunctionalDataset":
        """Attach finite-difference derivatives unless some are already present"""
        if self.derivatives is not None:
            return self
        return FunctionalDataset(
            self.grid, self.curves, self.groups, differentiate(self.curves, self.grid), self.group_names
        )

    def channels(self, use_derivatives: bool) -> list:
        """[curves] or [curves, derivatives]"""
        if not use_derivatives:
            return [self.curves]
        return [self.curves, self.with_derivatives().derivatives]

    def subset(self, index: Sequence[int]) -> "FunctionalDataset":
        index = np.asarray(index, dtype=int)
        derivs = None if self.derivatives is None else self.derivatives[index]
        return FunctionalDataset(self.grid, self.curves[index], self.groups[index], derivs, self.group_names)

    def select_groups(self, labels: Sequence[int]) -> "FunctionalDataset":
        """Keep the listed groups, relabelled 1..len(labels) in the given order"""
        labels = [int(j) for j in labels]
        unknown = [j for j in labels if j < 1 or j > self.num_groups]
        if unknown:
            raise ParameterError(f"unknown group labels {unknown} (dataset has 1..{self.num_groups})")
        mask = np.isin(self.groups, labels)
        relabel = {old: new for new, old in enumerate(labels, start=1)}
        new_groups = np.array([relabel[g] for g in self.groups[mask]], dtype=int)
        derivs = None if self.derivatives is None else self.derivatives[mask]
        names = None
        if self.group_names is not None:
            names = tuple(self.group_names[j - 1] for j in labels)
        return FunctionalDataset(self.grid, self.curves[mask], new_groups, derivs, names)

    def replace_curves(self, curves: np.ndarray, derivatives: Optional[np.ndarray] = None) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, curves, self.groups, derivatives, self.group_names)

    def scaled(self, a: Union[float, np.ndarray]) -> "FunctionalDataset":
        """Multiply every curve by a constant or a function on the grid (product rule for derivatives)"""
        a_arr = np.broadcast_to(np.asarray(a, dtype=float), (self.m,))
        derivs = None
        if self.derivatives is not None:
            derivs = a_arr * self.derivatives + differentiate(a_arr, self.grid) * self.curves
        return self.replace_curves(self.curves * a_arr, derivs)

    def shifted(self, b: Union[float, np.ndarray]) -> "FunctionalDataset":
        b_arr = np.broadcast_to(np.asarray(b, dtype=float), (self.m,))
        derivs = None
        if self.derivatives is not None:
            derivs = self.derivatives + differentiate(b_arr, self.grid)
        return self.replace_curves(self.curves + b_arr, derivs)


def center_by_deepest(ds: FunctionalDataset, spec) -> FunctionalDataset:
    """Subtract each group's deepest curve (depth taken within the group) from that group"""
    from fkwc.depth import compute_depth, deepest_index

    curves = np.array(ds.curves, copy=True)
    derivs = None if ds.derivatives is None else np.array(ds.derivatives, copy=True)
    for j in range(1, ds.num_groups + 1):
        members = np.flatnonzero(ds.groups == j)
        group = ds.select_groups([j])
        deepest = members[deepest_index(compute_depth(group, spec).values)]
        curves[members] -= ds.curves[deepest]
        if derivs is not None:
            derivs[members] -= ds.derivatives[deepest]
    return ds.replace_curves(curves, derivs)


# ---------------------------------------------------------------------------
# Wide CSV / JSON
# ---------------------------------------------------------------------------


def _parse_header(columns: Sequence[str], path) -> Grid:
    if not columns or str(columns[0]).strip().lower() != GROUP_COLUMN:
        raise InputError(f"{path}: first header cell must be '{GROUP_COLUMN}'")
    try:
        points = [float(c) for c in columns[1:]]
    except ValueError as e:
        raise InputError(f"{path}: header grid points must be numbers ({e})")
    try:
        return Grid.from_points(points, tol=HEADER_TOLERANCE)
    except InputError as e:
        raise InputError(f"{path}: {e}")


def _parse_groups(raw: pd.Series, path) -> np.ndarray:
    labels = pd.to_numeric(raw, errors="coerce")
    for row, (text, value) in enumerate(zip(raw, labels), start=1):
        if pd.isna(value) or value != int(value):
            raise InputError(
                f"{path}: row {row} (line {row + 1}), column '{GROUP_COLUMN}': "
                f"group label {text!r} is not an integer"
            )
    return labels.to_numpy(dtype=int)


def _parse_values(frame: pd.DataFrame, path) -> np.ndarray:
    values = frame.apply(pd.to_numeric, errors="coerce")
    bad = values.isna() | ~np.isfinite(values.fillna(0.0))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        text = frame.iat[row, col]
        reason = "missing value" if pd.isna(text) else f"non-numeric value {text!r}"
        raise InputError(
            f"{path}: row {row + 1} (line {row + 2}), column '{frame.columns[col]}': {reason}"
        )
    # pandas' fast parser can be off by an ulp; float() reads repr output exactly
    return frame.apply(lambda column: column.map(float)).to_numpy(dtype=float)


def _read_wide(path) -> tuple:
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found")
    except pd.errors.EmptyDataError:
        raise InputError(f"{path}: file is empty")
    except pd.errors.ParserError as e:
        raise InputError(f"{path}: ragged row ({e})")
    if frame.empty:
        raise InputError(f"{path}: no curves found")
    grid = _parse_header(list(frame.columns), path)
    groups = _parse_groups(frame.iloc[:, 0], path)
    values = _parse_values(frame.iloc[:, 1:], path)
    return grid, groups, values


def load_csv(path) -> FunctionalDataset:
    """Read a wide CSV: header 'group', t_1..t_m; one row per curve"""
    grid, groups, values = _read_wide(path)
    return FunctionalDataset(grid, values, groups)


def load_derivatives(ds: FunctionalDataset, path) -> FunctionalDataset:
    """Attach derivative curves read from a wide CSV with the same rows as ds"""
    grid, groups, values = _read_wide(path)
    if grid.m != ds.m or len(groups) != ds.n:
        raise DimensionError(
            f"{path}: derivative file has {len(groups)} x {grid.m} values, dataset {ds.n} x {ds.m}"
        )
    if not np.array_equal(groups, ds.groups):
        raise InputError(f"{path}: derivative group labels do not match the dataset rows")
    return FunctionalDataset(ds.grid, ds.curves, ds.groups, values, ds.group_names)


def _frame(ds: FunctionalDataset, values: np.ndarray) -> pd.DataFrame:
    columns = [repr(float(t)) for t in ds.grid.points]
    frame = pd.DataFrame(values, columns=columns)
    frame.insert(0, GROUP_COLUMN, ds.groups)
    return frame


def save_csv(ds: FunctionalDataset, path, derivatives_path=None):
    _frame(ds, ds.curves).to_csv(path, index=False)
    if derivatives_path is not None and ds.derivatives is not None:
        _frame(ds, ds.derivatives).to_csv(derivatives_path, index=False)


def dataset_to_dict(ds: FunctionalDataset) -> dict:
    payload = {
        "grid": ds.grid.points.tolist(),
        "groups": ds.groups.tolist(),
        "curves": ds.curves.tolist(),
    }
    if ds.derivatives is not None:
        payload["derivatives"] = ds.derivatives.tolist()
    if ds.group_names is not None:
        payload["group_names"] = list(ds.group_names)
    return payload


def save_json(ds: FunctionalDataset, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dataset_to_dict(ds), f)


def load_json(path) -> FunctionalDataset:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})")
    missing = [k for k in ("grid", "groups", "curves") if k not in payload]
    if missing:
        raise InputError(f"{path}: missing keys {missing}")
    grid = Grid.from_points(payload["grid"], tol=HEADER_TOLERANCE)
    return FunctionalDataset(
        grid,
        np.asarray(payload["curves"], dtype=float),
        np.asarray(payload["groups"]),
        payload.get("derivatives"),
        payload.get("group_names"),
    )


def load_dataset(path, fmt: Optional[str] = None) -> FunctionalDataset:
    """Load a dataset, picking the reader from fmt or the file suffix"""
    fmt = (fmt or Path(path).suffix.lstrip(".") or "csv").lower()
    if fmt == "csv":
        return load_csv(path)
    if fmt == "json":
        return load_json(path)
    raise InputError(f"{path}: unsupported dataset format '{fmt}' (use csv or json)")
