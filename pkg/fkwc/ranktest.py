"""
Depth-Rank Tests
Kruskal-Wallis type statistic on depth ranks, its percentile-modified variant,
chi-square calibration and pairwise rank-sum comparisons with family-wise correction.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.stats import chi2, mannwhitneyu
from statsmodels.stats.multitest import multipletests

from core.config import Config
from core.errors import ConfigurationError, DegenerateStatisticWarning, ParameterError, SmallSampleWarning
from core.logger import log
from fkwc.depth import DepthSpec, RankVector, compute_depth, depth_ranks
from fkwc.fdata import FunctionalDataset

CORRECTIONS = ("sidak", "bonferroni", "holm")
MIN_NORMAL_APPROX = 4  # group size below which the rank-sum normal approximation is poor
EXACT_LIMIT = 10  # largest group size for the optional exact rank-sum path


@dataclass(frozen=True)
class TestConfig:
    depth_spec: DepthSpec
    alpha: float = Config.ALPHA
    percentile_r: Optional[float] = None

    __test__ = False  # keep pytest from collecting this as a test class

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.percentile_r is not None and not 0 < self.percentile_r <= 1:
            raise ParameterError(f"percentile r must lie in (0, 1], got {self.percentile_r}")


@dataclass
class TestResult:
    statistic: float
    df: int
    p_value: float
    group_mean_ranks: List[float]
    group_deviations: List[float]
    statistic_kind: str
    critical_value: float
    reject: bool
    alpha: float
    group_sizes: List[int]
    n: int
    depth: str
    tie_breaks_applied: int = 0
    percentile_r: Optional[float] = None

    __test__ = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MCResult:
    pairwise_raw_p: np.ndarray
    pairwise_adjusted_p: np.ndarray
    num_comparisons: int
    method: str
    depth: str
    group_labels: List[str] = field(default_factory=list)
    pairs: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pairwise_raw_p": self.pairwise_raw_p.tolist(),
            "pairwise_adjusted_p": self.pairwise_adjusted_p.tolist(),
            "num_comparisons": self.num_comparisons,
            "method": self.method,
            "depth": self.depth,
            "group_labels": list(self.group_labels),
            "pairs": self.pairs,
        }


def _rank_array(ranks: Union[RankVector, Sequence[int]]) -> np.ndarray:
    if isinstance(ranks, RankVector):
        return np.asarray(ranks.ranks, dtype=float)
    return np.asarray(ranks, dtype=float)


def _group_layout(ranks: np.ndarray, groups: Sequence[int]) -> tuple:
    groups = np.asarray(groups, dtype=int)
    if groups.shape != ranks.shape:
        raise ConfigurationError(f"{groups.size} group labels for {ranks.size} ranks")
    J = int(groups.max()) if groups.size else 0
    if J < 2:
        raise ConfigurationError(f"at least 2 groups are needed, got {J}")
    sizes = np.bincount(groups, minlength=J + 1)[1:]
    if np.any(sizes == 0):
        empty = [j + 1 for j in np.flatnonzero(sizes == 0)]
        raise ConfigurationError(f"groups {empty} have no observations")
    return groups, J, sizes


def group_mean_ranks(ranks, groups) -> np.ndarray:
    r = _rank_array(ranks)
    groups, J, sizes = _group_layout(r, groups)
    return np.bincount(groups, weights=r, minlength=J + 1)[1:] / sizes


def kw_statistic(ranks, groups) -> float:
    """12/(N(N+1)) * sum_j N_j (mean rank_j - (N+1)/2)^2"""
    r = _rank_array(ranks)
    groups, J, sizes = _group_layout(r, groups)
    N = r.size
    means = np.bincount(groups, weights=r, minlength=J + 1)[1:] / sizes
    return float(12.0 / (N * (N + 1)) * np.sum(sizes * (means - (N + 1) / 2.0) ** 2))


def percentile_statistic(ranks, groups, r: float) -> float:
    """
    Kruskal-Wallis type statistic restricted to the floor(rN) least deep observations.

    Each group contributes (1 - N_j/N) * (S_j - E S_j)^2 / Var S_j where S_j sums the
    scores N' - s + 1 of its members with rank s <= N'. r = 1 gives the plain statistic.
    """
    if not 0 < r <= 1:
        raise ParameterError(f"percentile r must lie in (0, 1], got {r}")
    rk = _rank_array(ranks)
    groups, J, sizes = _group_layout(rk, groups)
    N = rk.size
    n_low = int(np.floor(r * N + 1e-9))
    if n_low < 1:
        raise ParameterError(f"r={r} keeps no observations out of N={N}")
    if n_low < J:
        msg = f"only {n_low} observations kept for {J} groups; the percentile statistic is degenerate"
        warnings.warn(msg, DegenerateStatisticWarning, stacklevel=2)
        log("ranktest", "degenerate_percentile", {"kept": n_low, "groups": J, "r": r})

    scores = np.clip(n_low - rk + 1, 0, None)
    S = np.bincount(groups, weights=scores, minlength=J + 1)[1:]
    expected = sizes * n_low * (n_low + 1) / (2.0 * N)
    variance = (
        sizes * (N - sizes) * n_low * (n_low + 1)
        * (2.0 * N * (2 * n_low + 1) - 3.0 * n_low * (n_low + 1))
        / (12.0 * N * N * (N - 1))
    )
    K = (S - expected) ** 2 / variance
    return float(np.sum((1.0 - sizes / N) * K))


def fkwc_test(ds: FunctionalDataset, config: TestConfig) -> TestResult:
    """Rank the pooled sample by depth and calibrate against chi-square with J-1 df"""
    if ds.num_groups < 2:
        raise ConfigurationError(f"at least 2 groups are needed, got {ds.num_groups}")

    ranks = depth_ranks(ds, config.depth_spec)
    if config.percentile_r is None:
        statistic, kind = kw_statistic(ranks, ds.groups), "W"
    else:
        statistic, kind = percentile_statistic(ranks, ds.groups, config.percentile_r), "M_r"

    df = ds.num_groups - 1
    p_value = float(chi2.sf(statistic, df))
    means = group_mean_ranks(ranks, ds.groups)
    result = TestResult(
        statistic=statistic,
        df=df,
        p_value=p_value,
        group_mean_ranks=means.tolist(),
        group_deviations=((means - (ds.n + 1) / 2.0) ** 2).tolist(),
        statistic_kind=kind,
        critical_value=float(chi2.ppf(1.0 - config.alpha, df)),
        reject=p_value < config.alpha,
        alpha=config.alpha,
        group_sizes=ds.group_sizes.tolist(),
        n=ds.n,
        depth=config.depth_spec.label,
        tie_breaks_applied=ranks.tie_breaks_applied,
        percentile_r=config.percentile_r,
    )
    return result


def adjust_pvalues(raw: Sequence[float], method: str = "sidak", count: Optional[int] = None) -> np.ndarray:
    """Family-wise adjustment over `count` tests; untested family members count as p = 1"""
    if method not in CORRECTIONS:
        raise ParameterError(f"unknown correction '{method}' (choose from {', '.join(CORRECTIONS)})")
    raw = np.asarray(raw, dtype=float)
    count = raw.size if count is None else int(count)
    if count < raw.size:
        raise ParameterError(f"correction count {count} is smaller than the {raw.size} comparisons performed")
    if raw.size == 0:
        return raw
    padded = np.concatenate([raw, np.ones(count - raw.size)])
    adjusted = multipletests(padded, method=method)[1][: raw.size]
    return np.clip(np.maximum(adjusted, raw), 0.0, 1.0)


def _compare_pair(ds: FunctionalDataset, spec: DepthSpec, pair: tuple, exact_small: bool) -> dict:
    j, k = pair
    sub = ds.select_groups([j, k])
    # same directions for every pair: a pair sees only its own curves and the seed
    depths = compute_depth(sub, spec).values
    x, y = depths[sub.groups == 1], depths[sub.groups == 2]

    if min(x.size, y.size) < MIN_NORMAL_APPROX:
        msg = f"groups {j} and {k} have {x.size} and {y.size} curves; the normal approximation is poor"
        warnings.warn(msg, SmallSampleWarning, stacklevel=3)
        log("ranktest", "small_rank_sum_groups", {"pair": [j, k], "sizes": [x.size, y.size]})

    method = "asymptotic"
    if exact_small and min(x.size, y.size) <= EXACT_LIMIT and np.unique(depths).size == depths.size:
        method = "exact"
    res = mannwhitneyu(x, y, alternative="two-sided", method=method)
    return {"groups": [j, k], "statistic": float(res.statistic), "p_value": float(res.pvalue), "method": method}


def steel_mc(
    ds: FunctionalDataset,
    spec: DepthSpec,
    correction_count: Optional[int] = None,
    method: str = "sidak",
    exact_small: bool = False,
    threads: int = 1,
) -> MCResult:
    """Pairwise rank-sum tests on depths recomputed within each pair of groups"""
    J = ds.num_groups
    if J < 2:
        raise ConfigurationError(f"at least 2 groups are needed, got {J}")
    if method not in CORRECTIONS:
        raise ParameterError(f"unknown correction '{method}' (choose from {', '.join(CORRECTIONS)})")

    pairs = list(combinations(range(1, J + 1), 2))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(lambda pair: _compare_pair(ds, spec, pair, exact_small), pairs))

    raw_list = [o["p_value"] for o in outcomes]
    adjusted_list = adjust_pvalues(raw_list, method, correction_count)

    raw = np.ones((J, J))
    adjusted = np.ones((J, J))
    for (j, k), p, q, outcome in zip(pairs, raw_list, adjusted_list, outcomes):
        raw[j - 1, k - 1] = raw[k - 1, j - 1] = p
        adjusted[j - 1, k - 1] = adjusted[k - 1, j - 1] = q
        outcome["adjusted_p"] = float(q)

    return MCResult(
        pairwise_raw_p=raw,
        pairwise_adjusted_p=adjusted,
        num_comparisons=len(pairs) if correction_count is None else int(correction_count),
        method=method,
        depth=spec.label,
        group_labels=[ds.label(j) for j in range(1, J + 1)],
        pairs=outcomes,
    )
