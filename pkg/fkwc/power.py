"""
Power and Sample Size
Noncentral chi-square approximation of the rank statistic under alternatives:
noncentrality from pairwise depth-order probabilities or from a local scale
alternative, Monte Carlo order probabilities for L2-root depth, and sample-size search.
"""

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.stats
from scipy.stats import chi2, poisson

from core.config import Config
from core.errors import NumericalError, ParameterError
from core.logger import log
from fkwc import seeding
from fkwc.depth import root_norm_sum
from fkwc.fdata import Grid, differentiate, squared_norms
from fkwc.sim import ProcessModel, generate

SERIES_TAIL = 1e-12  # Poisson mass left out of the noncentral series
NORMALIZATION_TOLERANCE = 1e-3
SUPPORT_QUANTILE = 1e-9
SUPPORT_POINTS = 20001


@dataclass(frozen=True)
class Density:
    """Density values on a support grid with quadrature weights"""

    support: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights * self.values))


@dataclass(frozen=True)
class LocalAlternativeSpec:
    deltas: tuple
    thetas: tuple
    density: Density

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        thetas = tuple(float(t) for t in self.thetas)
        if len(deltas) != len(thetas) or len(deltas) < 2:
            raise ParameterError(f"need matching deltas and thetas for at least 2 groups, got {len(deltas)} and {len(thetas)}")
        if min(thetas) <= 0 or abs(sum(thetas) - 1.0) > 1e-9:
            raise ParameterError(f"thetas must be positive and sum to 1, got {thetas}")
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "thetas", thetas)


@dataclass
class PowerResult:
    tau: float
    predicted_power: float
    alpha: float
    J: int
    N: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleSizeResult:
    feasible: bool
    target_power: float
    N: Optional[int] = None
    power_at_N: Optional[float] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RankProbability:
    estimate: float
    std_error: float
    reps: int


def _check_thetas(thetas: Sequence[float], J: int) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (J,):
        raise ParameterError(f"expected {J} group proportions, got {thetas.size}")
    if np.any(thetas <= 0) or abs(thetas.sum() - 1.0) > 1e-9:
        raise ParameterError(f"thetas must be positive and sum to 1, got {thetas.tolist()}")
    return thetas


def tau_from_pairwise(probs, thetas, group_sizes, N: float) -> float:
    """
    Noncentrality of the rank statistic from Pr(D(X_j) <= D(X_k)):

        12/(N(N+1)) * sum_j N_j (N * sum_{k != j} theta_k (P_jk - 1/2))^2
    """
    probs = np.asarray(probs, dtype=float)
    J = probs.shape[0]
    if probs.shape != (J, J):
        raise ParameterError(f"probability matrix must be square, got shape {probs.shape}")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ParameterError("pairwise probabilities must lie in [0, 1]")
    thetas = _check_thetas(thetas, J)
    sizes = np.asarray(group_sizes, dtype=float)

    off = probs - 0.5
    np.fill_diagonal(off, 0.0)
    shift = N * (off @ thetas)
    return float(12.0 / (N * (N + 1)) * np.sum(sizes * shift ** 2))


def noncentral_chisq_sf(x: float, df: int, tau: float) -> float:
    """Poisson mixture of central chi-square tails, truncated once the Poisson tail is negligible"""
    if tau < 0 or df < 1:
        raise ParameterError(f"need df >= 1 and tau >= 0, got df={df}, tau={tau}")
    if x <= 0:
        return 1.0
    if tau == 0:
        return float(chi2.sf(x, df))
    mean = tau / 2.0
    k_max = int(poisson.isf(SERIES_TAIL, mean)) + 1
    k = np.arange(k_max + 1)
    return float(np.sum(poisson.pmf(k, mean) * chi2.sf(x, df + 2 * k)))


def density_from_scipy(name: str, params=()) -> Density:
    """Analytic density of a scipy.stats distribution on its central support"""
    dist_cls = getattr(scipy.stats, name, None)
    if dist_cls is None or not hasattr(dist_cls, "pdf"):
        raise ParameterError(f"unknown scipy distribution '{name}'")
    dist = dist_cls(**params) if isinstance(params, dict) else dist_cls(*params)
    lo, hi = dist.ppf(SUPPORT_QUANTILE), dist.isf(SUPPORT_QUANTILE)
    support = np.linspace(lo, hi, SUPPORT_POINTS)
    weights = np.full(SUPPORT_POINTS, support[1] - support[0])
    weights[0] = weights[-1] = weights[1] / 2
    return Density(support, dist.pdf(support), weights)


def density_from_draws(draws: Sequence[float]) -> Density:
    """Histogram density with Freedman-Diaconis bins, evaluated at bin midpoints"""
    draws = np.asarray(draws, dtype=float)
    values, edges = np.histogram(draws, bins="fd", density=True)
    return Density((edges[:-1] + edges[1:]) / 2.0, values, np.diff(edges))


def local_tau(spec: LocalAlternativeSpec) -> float:
    """12 (int z g(z)^2 dz)^2 sum_j theta_j (delta_j - mean delta)^2"""
    g = spec.density
    if abs(g.mass - 1.0) > NORMALIZATION_TOLERANCE:
        raise NumericalError(f"density integrates to {g.mass:.6f}, not 1 (tolerance {NORMALIZATION_TOLERANCE})")
    spread = float(np.sum(g.weights * g.support * g.values ** 2))
    deltas = np.asarray(spec.deltas)
    thetas = np.asarray(spec.thetas)
    centre = float(thetas @ deltas)
    return 12.0 * spread ** 2 * float(thetas @ (deltas - centre) ** 2)


def predicted_power(tau: float, J: int, alpha: float = Config.ALPHA, N: Optional[int] = None) -> PowerResult:
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    critical = float(chi2.ppf(1.0 - alpha, J - 1))
    power = noncentral_chisq_sf(critical, J - 1, tau)
    return PowerResult(tau=tau, predicted_power=power, alpha=alpha, J=J, N=N)


def power_at(probs, thetas, N: int, alpha: float = Config.ALPHA) -> PowerResult:
    """Predicted power when the N curves are split in proportions thetas"""
    thetas = np.asarray(thetas, dtype=float)
    tau = tau_from_pairwise(probs, thetas, thetas * N, N)
    return predicted_power(tau, thetas.size, alpha, N)


def required_sample_size(target_power: float, probs, thetas, alpha: float = Config.ALPHA) -> SampleSizeResult:
    """Smallest total N reaching target_power, by bisection over [4J, max sample size]"""
    if not alpha < target_power < 1:
        raise ParameterError(f"target power must lie in (alpha, 1) = ({alpha}, 1), got {target_power}")
    J = len(thetas)
    lo, hi = Config.MIN_SAMPLE_PER_GROUP * J, Config.MAX_SAMPLE_SIZE

    low_power = power_at(probs, thetas, lo, alpha).predicted_power
    if low_power >= target_power:
        return SampleSizeResult(True, target_power, lo, low_power)
    high_power = power_at(probs, thetas, hi, alpha).predicted_power
    if high_power < target_power:
        log("power", "sample_size_infeasible", {"target": target_power, "power_at_max": high_power})
        return SampleSizeResult(
            False, target_power, reason=f"power at N={hi} is only {high_power:.4f}"
        )

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if power_at(probs, thetas, mid, alpha).predicted_power >= target_power:
            hi = mid
        else:
            lo = mid
    return SampleSizeResult(True, target_power, hi, power_at(probs, thetas, hi, alpha).predicted_power)


def ltr_scores(curves: np.ndarray, grid: Grid, p: int) -> np.ndarray:
    """L2-root rank scores of pooled draws; larger means less deep"""
    if p == 0:
        return squared_norms(curves, grid)
    return root_norm_sum([curves, differentiate(curves, grid)], grid)


def mc_rank_prob(model_j: ProcessModel, model_k: ProcessModel, p: int = 0, reps: int = 10_000,
                 seed: int = Config.SEED) -> RankProbability:
    """Monte Carlo Pr(D(X_k) <= D(X_j)) under L2-root ranks of the pooled draws"""
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    if p not in (0, 1):
        raise ParameterError(f"derivative order must be 0 or 1, got {p}")
    if model_j.grid != model_k.grid:
        raise ParameterError(f"models use different grids (m={model_j.grid.m} and m={model_k.grid.m})")
    xj = generate(model_j, reps, seeding.stream(seed, seeding.MONTE_CARLO, 0))
    xk = generate(model_k, reps, seeding.stream(seed, seeding.MONTE_CARLO, 1))
    scores = ltr_scores(np.vstack([xj, xk]), model_j.grid, p)
    hits = scores[:reps] <= scores[reps:]
    estimate = float(hits.mean())
    return RankProbability(estimate, float(np.sqrt(estimate * (1.0 - estimate) / reps)), reps)


def pairwise_probs(models: Sequence[ProcessModel], p: int = 0, reps: int = 10_000,
                   seed: int = Config.SEED) -> np.ndarray:
    """probs[j][k] = Pr(D(X_j) <= D(X_k)) under L2-root depth ranks"""
    J = len(models)
    probs = np.full((J, J), 0.5)
    for j in range(J):
        for k in range(j + 1, J):
            pair_seed = seeding.derive_seed(seed, seeding.MONTE_CARLO, j + 1, k + 1)
            # deeper means smaller norm
            estimate = mc_rank_prob(models[k], models[j], p, reps, pair_seed).estimate
            probs[j, k] = estimate
            probs[k, j] = 1.0 - estimate
    return probs


def _density_from_entry(entry: dict, seed: int) -> Density:
    if "scipy" in entry:
        return density_from_scipy(entry["scipy"], entry.get("params", ()))
    if "model" in entry:
        model = _model_from_entry(entry["model"])
        draws = int(entry.get("draws", 20_000))
        curves = generate(model, draws, seeding.stream(seed, seeding.MONTE_CARLO, 2))
        return density_from_draws(squared_norms(curves, model.grid))
    if "draws" in entry:
        return density_from_draws(entry["draws"])
    raise ParameterError("density needs 'scipy', 'model' or 'draws'")


def _model_from_entry(entry: dict) -> ProcessModel:
    entry = dict(entry)
    grid = Grid(int(entry.pop("grid_size", Config.GRID_SIZE)))
    if "eigenvalues" in entry:
        entry["eigenvalues"] = tuple(entry["eigenvalues"])
    try:
        return ProcessModel(grid=grid, **entry)
    except TypeError as e:
        raise ParameterError(f"bad model {entry}: {e}")


def power_from_spec(payload: dict, seed: int = Config.SEED) -> dict:
    """
    Evaluate a power request. Recognised forms, by key:
        tau             direct noncentrality (with J)
        deltas          local scale alternative (thetas, density)
        probs           pairwise order probabilities (thetas, N)
        models          process models, order probabilities by Monte Carlo (thetas, N, p, reps)
    Any form with probabilities also accepts target_power for a sample-size search.
    """
    alpha = float(payload.get("alpha", Config.ALPHA))
    output = {}

    if "tau" in payload:
        result = predicted_power(float(payload["tau"]), int(payload.get("J", 2)), alpha, payload.get("N"))
    elif "deltas" in payload:
        spec = LocalAlternativeSpec(payload["deltas"], payload["thetas"], _density_from_entry(payload["density"], seed))
        result = predicted_power(local_tau(spec), len(spec.deltas), alpha)
    elif "probs" in payload or "models" in payload:
        if "probs" in payload:
            probs = np.asarray(payload["probs"], dtype=float)
        else:
            models: List[ProcessModel] = [_model_from_entry(m) for m in payload["models"]]
            probs = pairwise_probs(models, int(payload.get("p", 0)), int(payload.get("reps", 10_000)), seed)
            output["probs"] = probs.tolist()
        thetas = payload.get("thetas") or [1.0 / probs.shape[0]] * probs.shape[0]
        target = payload.get("target_power")
        if "N" not in payload and target is None:
            raise ParameterError("power spec with probabilities needs 'N' or 'target_power'")
        N = payload.get("N")
        if target is not None:
            sample_size = required_sample_size(float(target), probs, thetas, alpha)
            output["sample_size"] = sample_size.to_dict()
            if N is None:
                N = sample_size.N if sample_size.feasible else Config.MAX_SAMPLE_SIZE
        result = power_at(probs, thetas, int(N), alpha)
    else:
        raise ParameterError("power spec needs one of 'tau', 'deltas', 'probs' or 'models'")

    output["power"] = result.to_dict()
    log("power", "power_evaluated", {"tau": result.tau, "power": result.predicted_power, "J": result.J})
    return output
