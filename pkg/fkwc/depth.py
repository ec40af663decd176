"""
Functional Data Depths
L2-root, random projection, integrated halfspace, modified band, spatial and kernel
spatial depth, each with a derivative-augmented variant, plus tie-breaking ranks.

Every depth takes the dataset to evaluate and an optional reference sample
(`against`); the default reference is the dataset itself (the pooled sample).
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.ndimage import uniform_filter1d
from scipy.special import comb
from scipy.stats import norm

from core.config import Config
from core.errors import DimensionError, ParameterError
from core.logger import log
from fkwc import seeding
from fkwc.fdata import FunctionalDataset, Grid, gram_matrix, l2_norm, squared_norms

MEDIAN_HEURISTIC = "median-heuristic"
DIRECTION_SMOOTHING = 5  # moving-average width applied to raw Gaussian directions
COINCIDENT_TOLERANCE = 1e-12  # relative squared distance treated as zero
ROW_OFFSET = 16.0  # > 3*pi, separates rows when angles are searched as one flat array


class DepthKind(str, Enum):
    LTR = "ltr"
    RP = "rp"
    MFHD = "mfhd"
    MBD = "mbd"
    SPATIAL = "spatial"
    KSD = "ksd"


@dataclass(frozen=True)
class DepthSpec:
    """Which depth to compute and its options"""

    kind: DepthKind
    use_derivatives: bool = False
    num_projections: int = Config.NUM_PROJECTIONS
    band_order: int = Config.BAND_ORDER
    channel_weights: Tuple[float, float] = (0.5, 0.5)
    kernel_bandwidth: Union[str, float] = MEDIAN_HEURISTIC
    rng_seed: int = Config.SEED

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", DepthKind(str(getattr(self.kind, "value", self.kind)).lower()))
        except ValueError:
            choices = ", ".join(k.value for k in DepthKind)
            raise ParameterError(f"unknown depth '{self.kind}' (choose from {choices})")

        if int(self.num_projections) != self.num_projections or self.num_projections < 1:
            raise ParameterError(f"num_projections must be a positive integer, got {self.num_projections}")
        if int(self.band_order) != self.band_order or self.band_order < 2:
            raise ParameterError(f"band_order must be an integer >= 2, got {self.band_order}")
        object.__setattr__(self, "num_projections", int(self.num_projections))
        object.__setattr__(self, "band_order", int(self.band_order))

        weights = tuple(float(w) for w in self.channel_weights)
        if len(weights) != 2 or min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
            raise ParameterError(f"channel_weights must be two nonnegative reals summing to 1, got {weights}")
        object.__setattr__(self, "channel_weights", weights)

        bw = self.kernel_bandwidth
        if isinstance(bw, str) and bw.strip().lower() == MEDIAN_HEURISTIC:
            object.__setattr__(self, "kernel_bandwidth", MEDIAN_HEURISTIC)
        else:
            try:
                bw = float(bw)
            except (TypeError, ValueError):
                raise ParameterError(f"kernel_bandwidth must be a positive number or '{MEDIAN_HEURISTIC}'")
            if not bw > 0:
                raise ParameterError(f"kernel_bandwidth must be positive, got {bw}")
            object.__setattr__(self, "kernel_bandwidth", bw)

        object.__setattr__(self, "rng_seed", int(self.rng_seed))

    @property
    def label(self) -> str:
        name = self.kind.value
        if self.kind == DepthKind.RP:
            name += str(self.num_projections)
        return name + ("'" if self.use_derivatives else "")


@dataclass(frozen=True, eq=False)
class DepthVector:
    values: np.ndarray
    spec: DepthSpec


@dataclass(frozen=True, eq=False)
class RankVector:
    ranks: np.ndarray
    tie_breaks_applied: int = 0

    def __eq__(self, other):
        return isinstance(other, RankVector) and np.array_equal(self.ranks, other.ranks)

    def __len__(self):
        return len(self.ranks)


def _reference(ds: FunctionalDataset, against: Optional[FunctionalDataset], derivatives: bool):
    ref = ds if against is None else against
    if ref.m != ds.m:
        raise DimensionError(f"reference sample has {ref.m} grid points, dataset {ds.m}")
    if derivatives:
        return ds.with_derivatives(), ref.with_derivatives()
    return ds, ref


# ---------------------------------------------------------------------------
# L2-root depth
# ---------------------------------------------------------------------------


def _mean_squared_distance(X: np.ndarray, R: np.ndarray, grid: Grid) -> np.ndarray:
    """mean_j ||x - R_j||^2 for every row x of X"""
    centre = R.mean(axis=0, keepdims=True)
    cross = gram_matrix(X, centre, grid)[:, 0]
    value = squared_norms(X, grid) - 2.0 * cross + squared_norms(R, grid).mean()
    return np.maximum(value, 0.0)


def ltr_depth(ds: FunctionalDataset, p: int = 0, against: Optional[FunctionalDataset] = None) -> DepthVector:
    """(1 + mean over derivative orders of sqrt(E||x^(k) - X^(k)||^2))^-1"""
    if p not in (0, 1):
        raise ParameterError(f"L2-root depth supports p=0 or p=1, got {p}")
    ds, ref = _reference(ds, against, p == 1)
    total = np.zeros(ds.n)
    for X, R in zip(ds.channels(p == 1), ref.channels(p == 1)):
        total += np.sqrt(_mean_squared_distance(X, R, ds.grid))
    values = 1.0 / (1.0 + total / (p + 1))
    return DepthVector(values, DepthSpec(DepthKind.LTR, use_derivatives=p == 1))


def root_norm_sum(channels: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    """sum_k sqrt(||x^(k)||^2 + mean_j ||X_j^(k)||^2): the L2-root distance sum with the sample centred at zero"""
    total = np.zeros(channels[0].shape[0])
    for X in channels:
        sq = squared_norms(X, grid)
        total += np.sqrt(sq + sq.mean())
    return total


def ltr_rank_scores(ds: FunctionalDataset, p: int = 0) -> np.ndarray:
    """Norm-based scores whose descending order is the L2-root depth order of centred data"""
    if p == 0:
        return squared_norms(ds.curves, ds.grid)
    ds = ds.with_derivatives()
    return root_norm_sum([ds.curves, ds.derivatives], ds.grid)


# ---------------------------------------------------------------------------
# Random projection depths
# ---------------------------------------------------------------------------


def projection_directions(grid: Grid, count: int, seed: int) -> np.ndarray:
    """Smoothed Gaussian direction curves with unit L2 norm, count x m"""
    rng = seeding.stream(seed, seeding.PROJECTIONS)
    raw = rng.standard_normal((count, grid.m))
    smooth = uniform_filter1d(raw, size=DIRECTION_SMOOTHING, axis=1, mode="nearest")
    return smooth / l2_norm(smooth, grid)[:, None]


def _midrank_cdf(values: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """(#{ref < z} + #{ref == z}/2) / n for every z in values"""
    ref = np.sort(reference)
    below = np.searchsorted(ref, values, side="left")
    upto = np.searchsorted(ref, values, side="right")
    return (below + 0.5 * (upto - below)) / ref.size


def rp_depth(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    ds, ref = _reference(ds, against, False)
    directions = projection_directions(ds.grid, spec.num_projections, spec.rng_seed)
    proj = gram_matrix(ds.curves, directions, ds.grid)
    ref_proj = gram_matrix(ref.curves, directions, ds.grid)

    total = np.zeros(ds.n)
    for d in range(spec.num_projections):
        F = _midrank_cdf(proj[:, d], ref_proj[:, d])
        total += F * (1.0 - F)
    return DepthVector(total / spec.num_projections, spec)


def _kde_at(points: np.ndarray, sample: np.ndarray, h: float) -> np.ndarray:
    """Product Gaussian kernel density of `sample` (n x d) at `points` (k x d)"""
    diffs = (points[:, None, :] - sample[None, :, :]) / h
    kernel = np.prod(norm.pdf(diffs), axis=2)
    return kernel.mean(axis=1) / h ** points.shape[1]


def level_free_directions(grid: Grid, count: int, seed: int) -> np.ndarray:
    """Brownian paths with their mean removed, unit L2 norm, count x m"""
    rng = seeding.stream(seed, seeding.PROJECTIONS)
    steps = rng.standard_normal((count, grid.m)) * np.sqrt(grid.step)
    steps[:, 0] = 0.0
    paths = np.cumsum(steps, axis=1)
    paths -= (paths @ grid.weights)[:, None]
    return paths / l2_norm(paths, grid)[:, None]


def rp_depth_deriv(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    """
    Average over directions of the likelihood depth of the couples (<x,u>, <x',u>).

    The couples are not rescaled: the kernel is isotropic with the Scott-rate bandwidth
    N^(-1/6) times the root mean coordinate variance of the reference couples.
    Directions carry no constant component.
    """
    ds, ref = _reference(ds, against, True)
    directions = level_free_directions(ds.grid, spec.num_projections, spec.rng_seed)

    couples = np.stack([gram_matrix(ds.curves, directions, ds.grid),
                        gram_matrix(ds.derivatives, directions, ds.grid)], axis=2)
    ref_couples = np.stack([gram_matrix(ref.curves, directions, ds.grid),
                            gram_matrix(ref.derivatives, directions, ds.grid)], axis=2)

    total = np.zeros(ds.n)
    degenerate = 0
    for d in range(spec.num_projections):
        pts, sample = couples[:, d, :], ref_couples[:, d, :]
        h = ref.n ** (-1.0 / 6.0) * np.sqrt(sample.var(axis=0).mean())
        if not h > 0:
            degenerate += 1
            total += 1.0
            continue
        total += _kde_at(pts, sample, h)

    if degenerate:
        log("depth", "rp_degenerate_direction", {"directions": degenerate, "of": spec.num_projections})
    return DepthVector(total / spec.num_projections, spec)


# ---------------------------------------------------------------------------
# Integrated halfspace (Tukey) depth
# ---------------------------------------------------------------------------


def _univariate_halfspace(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    ordered = np.sort(ref)
    at_or_below = np.searchsorted(ordered, x, side="right")
    at_or_above = ordered.size - np.searchsorted(ordered, x, side="left")
    return np.minimum(at_or_below, at_or_above) / ordered.size


def bivariate_halfspace(points: np.ndarray, sample: np.ndarray) -> np.ndarray:
    """
    Exact Tukey depth of each row of `points` (k x 2) in `sample` (n x 2).

    Rotating-line count: depth = (coincident + others - max open half-plane count) / n,
    where the largest open half-plane is found from sorted angles around each point.
    """
    k, n = points.shape[0], sample.shape[0]
    d = sample[None, :, :] - points[:, None, :]
    coincident = (d[..., 0] == 0) & (d[..., 1] == 0)

    theta = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2 * np.pi)
    theta[coincident] = np.inf
    theta.sort(axis=1)
    valid = np.isfinite(theta)
    n_other = valid.sum(axis=1)

    offsets = ROW_OFFSET * np.arange(k)[:, None]
    theta[~valid] = ROW_OFFSET - 1.0
    flat = (theta + offsets).ravel()
    row_start = (n * np.arange(k))[:, None]

    start = theta + offsets
    inside = np.searchsorted(flat, start + np.pi, side="left") - np.searchsorted(flat, start, side="left")
    wrapped = np.searchsorted(flat, np.maximum(theta - np.pi, 0.0) + offsets, side="left") - row_start
    counts = np.where(valid, inside + wrapped, -1)
    max_open = np.maximum(counts.max(axis=1), 0)

    return (coincident.sum(axis=1) + n_other - max_open) / n


def mfhd(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    ds, ref = _reference(ds, against, spec.use_derivatives)
    pointwise = np.empty((ds.n, ds.m))
    for t in range(ds.m):
        if spec.use_derivatives:
            pts = np.column_stack([ds.curves[:, t], ds.derivatives[:, t]])
            sample = np.column_stack([ref.curves[:, t], ref.derivatives[:, t]])
            pointwise[:, t] = bivariate_halfspace(pts, sample)
        else:
            pointwise[:, t] = _univariate_halfspace(ds.curves[:, t], ref.curves[:, t])
    return DepthVector(pointwise @ ds.grid.weights, spec)


# ---------------------------------------------------------------------------
# Modified band depth
# ---------------------------------------------------------------------------


def _band_depth(X: np.ndarray, R: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    n = R.shape[0]
    if n < 2:
        return np.ones(X.shape[0])
    ordered = np.sort(R, axis=0)
    below = np.empty(X.shape)
    above = np.empty(X.shape)
    for t in range(grid.m):
        below[:, t] = np.searchsorted(ordered[:, t], X[:, t], side="left")
        above[:, t] = n - np.searchsorted(ordered[:, t], X[:, t], side="right")

    inside = np.zeros(X.shape)
    for k in range(2, min(order, n) + 1):
        total = comb(n, k)
        inside += (total - comb(above, k) - comb(below, k)) / total
    return inside @ grid.weights


def mbd(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    ds, ref = _reference(ds, against, spec.use_derivatives)
    values = _weighted_channels(
        ds, ref, spec, lambda X, R: _band_depth(X, R, ds.grid, spec.band_order)
    )
    return DepthVector(values, spec)


def _weighted_channels(ds, ref, spec: DepthSpec, depth_fn) -> np.ndarray:
    channels: List[np.ndarray] = [
        depth_fn(X, R) for X, R in zip(ds.channels(spec.use_derivatives), ref.channels(spec.use_derivatives))
    ]
    if len(channels) == 1:
        return channels[0]
    w1, w2 = spec.channel_weights
    return w1 * channels[0] + w2 * channels[1]


# ---------------------------------------------------------------------------
# Spatial and kernel spatial depth
# ---------------------------------------------------------------------------


def _unit_weights(sq_dist: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """1/distance, with zero for coincident pairs (s(0) = 0)"""
    zero = sq_dist <= COINCIDENT_TOLERANCE * scale
    safe = np.where(zero, 1.0, sq_dist)
    return np.where(zero, 0.0, 1.0 / np.sqrt(safe))


def _spatial_from_gram(self_x: np.ndarray, cross: np.ndarray, ref_gram: np.ndarray, sq_dist: np.ndarray,
                       scale: np.ndarray) -> np.ndarray:
    """1 - ||mean_j (x - r_j)/||x - r_j||| from inner products only"""
    W = _unit_weights(sq_dist, scale)
    s = W.sum(axis=1)
    norm_sq = s * s * self_x - 2.0 * s * (W * cross).sum(axis=1) + ((W @ ref_gram) * W).sum(axis=1)
    n = ref_gram.shape[0]
    return np.clip(1.0 - np.sqrt(np.maximum(norm_sq, 0.0)) / n, 0.0, 1.0)


def _spatial_channel(X: np.ndarray, R: np.ndarray, grid: Grid) -> np.ndarray:
    qq = squared_norms(X, grid)
    rr = squared_norms(R, grid)
    cross = gram_matrix(X, R, grid)
    sq_dist = qq[:, None] + rr[None, :] - 2.0 * cross
    return _spatial_from_gram(qq, cross, gram_matrix(R, R, grid), sq_dist, qq[:, None] + rr[None, :])


def spatial_depth(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    ds, ref = _reference(ds, against, spec.use_derivatives)
    values = _weighted_channels(ds, ref, spec, lambda X, R: _spatial_channel(X, R, ds.grid))
    return DepthVector(values, spec)


def _pairwise_sq_dist(X: np.ndarray, R: np.ndarray, grid: Grid) -> np.ndarray:
    sq = squared_norms(X, grid)[:, None] + squared_norms(R, grid)[None, :] - 2.0 * gram_matrix(X, R, grid)
    return np.maximum(sq, 0.0)


def kernel_scale(R: np.ndarray, grid: Grid, bandwidth: Union[str, float]) -> float:
    """sigma^2 of the Gaussian kernel; the median heuristic uses the median pairwise squared distance"""
    if bandwidth != MEDIAN_HEURISTIC:
        return float(bandwidth) ** 2
    sq = _pairwise_sq_dist(R, R, grid)
    upper = sq[np.triu_indices(R.shape[0], k=1)]
    median = float(np.median(upper)) if upper.size else 0.0
    return median if median > 0 else 1.0


def _ksd_channel(X: np.ndarray, R: np.ndarray, grid: Grid, bandwidth) -> np.ndarray:
    sigma2 = kernel_scale(R, grid, bandwidth)
    k_xr = np.exp(-_pairwise_sq_dist(X, R, grid) / sigma2)
    k_rr = np.exp(-_pairwise_sq_dist(R, R, grid) / sigma2)
    # feature space: <phi(x), phi(x)> = 1 and ||phi(x) - phi(r)||^2 = 2 - 2k(x, r)
    sq_dist = 2.0 - 2.0 * k_xr
    return _spatial_from_gram(np.ones(X.shape[0]), k_xr, k_rr, sq_dist, np.full(sq_dist.shape, 2.0))


def ksd_depth(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    ds, ref = _reference(ds, against, spec.use_derivatives)
    values = _weighted_channels(
        ds, ref, spec, lambda X, R: _ksd_channel(X, R, ds.grid, spec.kernel_bandwidth)
    )
    return DepthVector(values, spec)


# ---------------------------------------------------------------------------
# Dispatch and ranking
# ---------------------------------------------------------------------------


def compute_depth(ds: FunctionalDataset, spec: DepthSpec, against: Optional[FunctionalDataset] = None) -> DepthVector:
    if spec.kind == DepthKind.LTR:
        depth = ltr_depth(ds, 1 if spec.use_derivatives else 0, against)
        return DepthVector(depth.values, spec)
    if spec.kind == DepthKind.RP:
        if spec.use_derivatives:
            return rp_depth_deriv(ds, spec, against)
        return rp_depth(ds, spec, against)
    if spec.kind == DepthKind.MFHD:
        return mfhd(ds, spec, against)
    if spec.kind == DepthKind.MBD:
        return mbd(ds, spec, against)
    if spec.kind == DepthKind.SPATIAL:
        return spatial_depth(ds, spec, against)
    return ksd_depth(ds, spec, against)


def rank_depths(values: np.ndarray, seed: int) -> RankVector:
    """Ascending ranks 1..N (N = deepest); exact ties broken by a seeded shuffle"""
    values = np.asarray(values, dtype=float)
    tie_keys = seeding.stream(seed, seeding.TIE_BREAKS).permutation(values.size)
    order = np.lexsort((tie_keys, values))
    ranks = np.empty(values.size, dtype=int)
    ranks[order] = np.arange(1, values.size + 1)

    _, counts = np.unique(values, return_counts=True)
    return RankVector(ranks, int(counts[counts > 1].sum()))


def depth_ranks(ds: FunctionalDataset, spec: DepthSpec) -> RankVector:
    """Pooled-sample depth ranks; L2-root depth ranks come from norms directly"""
    if spec.kind == DepthKind.LTR:
        scores = ltr_rank_scores(ds, 1 if spec.use_derivatives else 0)
        return rank_depths(-scores, spec.rng_seed)
    return rank_depths(compute_depth(ds, spec).values, spec.rng_seed)


def deepest_index(values: np.ndarray) -> int:
    return int(np.argmax(values))


def export_depths(ds: FunctionalDataset, depths: DepthVector, ranks: RankVector) -> pd.DataFrame:
    return pd.DataFrame({
        "index": np.arange(ds.n),
        "group": ds.groups,
        "depth": depths.values,
        "rank": ranks.ranks,
    })
