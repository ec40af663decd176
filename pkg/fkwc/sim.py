"""
Simulation
Gaussian, Cauchy (t1) and skewed Gaussian processes with squared-exponential kernels,
finite Karhunen-Loeve processes on a Fourier basis, and replicated size/power studies.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cholesky

from core.config import Config
from core.errors import InputError, NumericalError, ParameterError
from core.logger import log
from fkwc import seeding
from fkwc.depth import DepthSpec
from fkwc.fdata import FunctionalDataset, Grid
from fkwc.ranktest import TestConfig, fkwc_test

MIN_CHI2_DRAW = 1e-300
SWEEP_PARAMS = ("alpha", "beta", "skew_shape", "eigen_scale")


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T1 = "student_t1"
    SKEW_GAUSSIAN = "skew_gaussian"
    EIGEN = "eigen"


# Eigenvalue pairs (group 1, group 2) of the six finite-dimensional scenarios
_SHORT = np.arange(1, 4, dtype=float)
_LONG = np.arange(1, 12, dtype=float)
_EXPONENTIAL = 2.0 ** _LONG
SCENARIOS: Dict[int, Tuple[np.ndarray, np.ndarray]] = {
    1: (_SHORT, _SHORT[::-1]),  # reversed short linear decay
    2: (_LONG, _LONG[::-1]),  # reversed long linear decay
    3: (_EXPONENTIAL, _EXPONENTIAL[::-1]),  # reversed long exponential decay
    4: (_SHORT, 1.5 * _SHORT),  # scaled short linear decay
    5: (_LONG, 1.5 * _LONG),  # scaled long linear decay
    6: (_EXPONENTIAL, 1.5 * _EXPONENTIAL),  # scaled long exponential decay
}


@dataclass(frozen=True)
class ProcessModel:
    family: Family
    alpha: float = 0.05
    beta: float = 1.0
    eigenvalues: Optional[Tuple[float, ...]] = None
    basis_size: Optional[int] = None
    skew_shape: float = Config.SKEW_SHAPE
    grid: Grid = field(default_factory=lambda: Grid(Config.GRID_SIZE))

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", Family(str(getattr(self.family, "value", self.family)).lower()))
        except ValueError:
            choices = ", ".join(f.value for f in Family)
            raise ParameterError(f"unknown process family '{self.family}' (choose from {choices})")

        if self.family == Family.EIGEN:
            if self.eigenvalues is None or len(self.eigenvalues) == 0:
                raise ParameterError("the eigen family needs eigenvalues")
            lam = tuple(float(v) for v in self.eigenvalues)
            if min(lam) < 0:
                raise ParameterError(f"eigenvalues must be nonnegative, got {lam}")
            object.__setattr__(self, "eigenvalues", lam)
            size = len(lam) if self.basis_size is None else int(self.basis_size)
            if size < len(lam):
                raise ParameterError(f"basis_size {size} is smaller than the {len(lam)} eigenvalues")
            object.__setattr__(self, "basis_size", size)
        else:
            if not (self.alpha > 0 and self.beta > 0):
                raise ParameterError(f"kernel parameters must be positive, got alpha={self.alpha}, beta={self.beta}")
        if self.skew_shape < 0:
            raise ParameterError(f"skew shape must be nonnegative, got {self.skew_shape}")

    def to_dict(self) -> dict:
        payload = {"family": self.family.value, "grid_size": self.grid.m}
        if self.family == Family.EIGEN:
            payload.update(eigenvalues=list(self.eigenvalues), basis_size=self.basis_size)
        else:
            payload.update(alpha=self.alpha, beta=self.beta)
        if self.family == Family.SKEW_GAUSSIAN:
            payload["skew_shape"] = self.skew_shape
        return payload


def se_kernel(s, t, alpha: float, beta: float):
    """beta * exp(-(s - t)^2 / (2 alpha^2))"""
    return beta * np.exp(-((np.asarray(s) - np.asarray(t)) ** 2) / (2.0 * alpha ** 2))


def kernel_matrix(grid: Grid, alpha: float, beta: float) -> np.ndarray:
    t = grid.points
    return se_kernel(t[:, None], t[None, :], alpha, beta)


@lru_cache(maxsize=32)
def _cholesky(m: int, alpha: float, beta: float) -> np.ndarray:
    K = kernel_matrix(Grid(m), alpha, beta)
    for jitter in Config.JITTER_SCHEDULE:
        try:
            L = cholesky(K + jitter * beta * np.eye(m), lower=True)
        except LinAlgError:
            log("sim", "jitter_escalated", {"m": m, "alpha": alpha, "beta": beta, "jitter": jitter})
            continue
        L.setflags(write=False)
        return L
    raise NumericalError(
        f"Cholesky factorization failed for alpha={alpha}, beta={beta}, m={m} "
        f"even with jitter {Config.JITTER_SCHEDULE[-1]}*beta"
    )


def cholesky_factor(model: ProcessModel) -> np.ndarray:
    return _cholesky(model.grid.m, float(model.alpha), float(model.beta))


def gen_gp(model: ProcessModel, n: int, seed) -> np.ndarray:
    """n zero-mean Gaussian process curves with the model's squared-exponential kernel"""
    rng = np.random.default_rng(seed)
    L = cholesky_factor(model)
    return rng.standard_normal((n, model.grid.m)) @ L.T


def gen_t1(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Gaussian curves each divided by the root of its own chi-square(1) draw"""
    rng = np.random.default_rng(seed)
    Z = gen_gp(model, n, rng)
    W = rng.chisquare(1, size=n)
    small = W < MIN_CHI2_DRAW
    while small.any():
        W[small] = rng.chisquare(1, size=int(small.sum()))
        small = W < MIN_CHI2_DRAW
    return Z / np.sqrt(W)[:, None]


def gen_skew_gp(model: ProcessModel, n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = model.skew_shape
    delta = a / np.sqrt(1.0 + a * a)
    Z1 = gen_gp(model, n, rng)
    Z2 = gen_gp(model, n, rng)
    mean = delta * np.sqrt(2.0 / np.pi) * np.sqrt(model.beta)
    return delta * np.abs(Z1) + np.sqrt(1.0 - delta * delta) * Z2 - mean


def fourier_basis(grid: Grid, size: int) -> np.ndarray:
    """Orthonormal basis 1, sqrt2 sin 2pi t, sqrt2 cos 2pi t, sqrt2 sin 4pi t, ... (size x m)"""
    t = grid.points
    rows = [np.ones_like(t)]
    k = 1
    while len(rows) < size:
        rows.append(np.sqrt(2.0) * np.sin(2 * np.pi * k * t))
        if len(rows) < size:
            rows.append(np.sqrt(2.0) * np.cos(2 * np.pi * k * t))
        k += 1
    return np.vstack(rows[:size])


def scenario_eigenvalues(scenario: int) -> Tuple[np.ndarray, np.ndarray]:
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown eigenvalue scenario {scenario} (choose 1..6)")
    first, second = SCENARIOS[scenario]
    return first.copy(), second.copy()


def scenario_models(scenario: int, grid: Optional[Grid] = None) -> Tuple[ProcessModel, ProcessModel]:
    grid = grid or Grid(Config.GRID_SIZE)
    first, second = scenario_eigenvalues(scenario)
    return (
        ProcessModel(Family.EIGEN, eigenvalues=tuple(first), grid=grid),
        ProcessModel(Family.EIGEN, eigenvalues=tuple(second), grid=grid),
    )


def gen_eigen(model, n: int, seed, grid: Optional[Grid] = None) -> np.ndarray:
    """sum_k sqrt(lambda_k) xi_k phi_k with i.i.d. standard normal xi_k"""
    if not isinstance(model, ProcessModel):
        model = ProcessModel(Family.EIGEN, eigenvalues=tuple(model), grid=grid or Grid(Config.GRID_SIZE))
    rng = np.random.default_rng(seed)
    lam = np.zeros(model.basis_size)
    lam[: len(model.eigenvalues)] = model.eigenvalues
    scores = rng.standard_normal((n, model.basis_size)) * np.sqrt(lam)
    return scores @ fourier_basis(model.grid, model.basis_size)


_GENERATORS = {
    Family.GAUSSIAN: gen_gp,
    Family.STUDENT_T1: gen_t1,
    Family.SKEW_GAUSSIAN: gen_skew_gp,
    Family.EIGEN: gen_eigen,
}


def generate(model: ProcessModel, n: int, seed) -> np.ndarray:
    return _GENERATORS[model.family](model, n, seed)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    group: int
    param: str
    values: Tuple[float, ...]

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ParameterError(f"cannot sweep '{self.param}' (choose from {', '.join(SWEEP_PARAMS)})")
        if not self.values:
            raise ParameterError("sweep needs at least one value")

    def apply(self, models: List[ProcessModel], value: float) -> List[ProcessModel]:
        if not 1 <= self.group <= len(models):
            raise ParameterError(f"sweep group {self.group} outside 1..{len(models)}")
        models = list(models)
        target = models[self.group - 1]
        if self.param == "eigen_scale":
            if target.eigenvalues is None:
                raise ParameterError("eigen_scale sweeps need an eigen-family group")
            target = replace(target, eigenvalues=tuple(value * v for v in target.eigenvalues))
        else:
            target = replace(target, **{self.param: value})
        models[self.group - 1] = target
        return models


@dataclass(frozen=True)
class StudySpec:
    models: Tuple[ProcessModel, ...]
    group_sizes: Tuple[int, ...]
    depth_specs: Tuple[DepthSpec, ...]
    alpha: float = Config.ALPHA
    replications: int = 200
    seed: int = Config.SEED
    percentile_r: Optional[float] = None
    sweep: Optional[Sweep] = None
    name: str = "study"

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError(f"replications must be >= 1, got {self.replications}")
        if len(self.models) != len(self.group_sizes):
            raise ParameterError(f"{len(self.models)} models for {len(self.group_sizes)} group sizes")
        if len(self.models) < 2:
            raise ParameterError("a study needs at least 2 groups")
        if min(self.group_sizes) < 1:
            raise ParameterError(f"group sizes must be positive, got {self.group_sizes}")
        if not self.depth_specs:
            raise ParameterError("a study needs at least one depth")
        TestConfig(self.depth_specs[0], self.alpha, self.percentile_r)

    @property
    def family(self) -> str:
        names = sorted({m.family.value for m in self.models})
        return "/".join(names)

    @classmethod
    def from_dict(cls, payload: dict) -> "StudySpec":
        grid = Grid(int(payload.get("grid_size", Config.GRID_SIZE)))
        sizes = payload.get("group_sizes")

        if "scenario" in payload:
            models = list(scenario_models(int(payload["scenario"]), grid))
        else:
            groups = payload.get("groups")
            if not groups:
                raise ParameterError("study needs 'groups' or 'scenario'")
            models = []
            for g in groups:
                g = dict(g)
                g.pop("n", None)
                if "eigenvalues" in g:
                    g["eigenvalues"] = tuple(g["eigenvalues"])
                try:
                    models.append(ProcessModel(grid=grid, **g))
                except TypeError as e:
                    raise ParameterError(f"bad group model {g}: {e}")
            if sizes is None:
                sizes = [int(g.get("n", 0)) for g in groups]
        if sizes is None:
            raise ParameterError("study needs 'group_sizes'")

        depths = [_depth_from_entry(d) for d in payload.get("depths", ["ltr"])]
        sweep = None
        if payload.get("sweep"):
            s = payload["sweep"]
            sweep = Sweep(int(s.get("group", 2)), s["param"], tuple(float(v) for v in s["values"]))

        return cls(
            models=tuple(models),
            group_sizes=tuple(int(n) for n in sizes),
            depth_specs=tuple(depths),
            alpha=float(payload.get("alpha", Config.ALPHA)),
            replications=int(payload.get("replications", 200)),
            seed=int(payload.get("seed", Config.SEED)),
            percentile_r=payload.get("percentile_r"),
            sweep=sweep,
            name=str(payload.get("name", "study")),
        )


def _depth_from_entry(entry) -> DepthSpec:
    """'rp', "rp'" or a dict of DepthSpec fields"""
    if isinstance(entry, str):
        return DepthSpec(entry.rstrip("'"), use_derivatives=entry.endswith("'"))
    entry = dict(entry)
    if "channel_weights" in entry:
        entry["channel_weights"] = tuple(entry["channel_weights"])
    try:
        return DepthSpec(**entry)
    except TypeError as e:
        raise ParameterError(f"bad depth entry {entry}: {e}")


def load_study(path) -> StudySpec:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})")
    return StudySpec.from_dict(payload)


@dataclass
class StudyResult:
    name: str
    rows: List[dict] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = ["depth", "family", "param_name", "param_value", "N", "rate", "se", "R"]
        return pd.DataFrame(self.rows, columns=columns)

    def to_dict(self) -> dict:
        return {"name": self.name, "rows": self.rows}

    def rate(self, depth: str, param_value: Optional[float] = None) -> float:
        for row in self.rows:
            if row["depth"] == depth and (param_value is None or row["param_value"] == param_value):
                return row["rate"]
        raise KeyError(depth)


def _replicate(spec: StudySpec, models: Sequence[ProcessModel], point: int, rep: int) -> List[bool]:
    samples = [
        generate(model, n, seeding.stream(spec.seed, seeding.DATA, point, rep, g))
        for g, (model, n) in enumerate(zip(models, spec.group_sizes))
    ]
    ds = FunctionalDataset.from_groups(samples, models[0].grid)
    rejections = []
    for d, depth_spec in enumerate(spec.depth_specs):
        seeded = replace(depth_spec, rng_seed=seeding.derive_seed(spec.seed, seeding.DEPTH, point, rep, d))
        result = fkwc_test(ds, TestConfig(seeded, spec.alpha, spec.percentile_r))
        rejections.append(result.reject)
    return rejections


def run_study(spec: StudySpec, threads: int = Config.THREADS) -> StudyResult:
    """Replicate data generation and testing; output depends only on the spec and its seed"""
    points = [(None, None)] if spec.sweep is None else [(spec.sweep.param, v) for v in spec.sweep.values]
    log("sim", "study_started", {"name": spec.name, "points": len(points), "replications": spec.replications})

    result = StudyResult(spec.name)
    R = spec.replications
    for point, (param, value) in enumerate(points):
        models = list(spec.models) if param is None else spec.sweep.apply(list(spec.models), value)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            outcomes = list(pool.map(lambda rep: _replicate(spec, models, point, rep), range(R)))
        counts = np.sum(np.asarray(outcomes, dtype=int), axis=0)

        for depth_spec, hits in zip(spec.depth_specs, counts):
            rate = hits / R
            result.rows.append({
                "depth": depth_spec.label,
                "family": spec.family,
                "param_name": param or "none",
                "param_value": float("nan") if value is None else value,
                "N": int(sum(spec.group_sizes)),
                "rate": float(rate),
                "se": float(np.sqrt(rate * (1.0 - rate) / R)),
                "R": R,
            })
        log("sim", "point_completed", {"name": spec.name, "point": point, "param": param, "value": value,
                                       "rates": [r["rate"] for r in result.rows[-len(spec.depth_specs):]]})

    log("sim", "study_finished", {"name": spec.name, "rows": len(result.rows)})
    return result
