"""Benchmark harness: test functions, synthetic datasets, experiment runs.

Each experiment draws ``n_seeds`` independent datasets from a registered
test function, runs model-order selection on each, and measures the
integrated squared and absolute distances between the fitted surface and
the truth on an evaluation window that extends beyond the fitting window
(extrapolation). Per-seed results and their medians form the report;
medians are reported because a single run's distance depends on optimizer
luck.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DataError, DomainError, FitFailure, NumericRangeError
from .fit import Dataset, FitConfig, select_model
from .metrics import GridSpec, integrated_sq_distance, l1_distance, shift_window_above
from .model import atomic_write_text, predict_grid
from .rng import RngStream

__all__ = [
    "TestFunction",
    "ExperimentSpec",
    "SeedRecord",
    "ExperimentReport",
    "REGISTRY",
    "get_test_function",
    "default_spec",
    "make_dataset",
    "run_experiment",
    "spec_from_dict",
    "spec_to_dict",
    "load_experiment_specs",
    "report_to_csv",
    "report_to_json",
]

DEFAULT_GRID_POINTS = {1: 1000, 2: 200}
_DEFAULT_N_SEEDS = 5
# Per-seed fit stream seeds are offset by a large odd constant so they never
# collide with the dataset streams drawn from the same master seed.
_FIT_SEED_STRIDE = 100003


@dataclass(frozen=True)
class TestFunction:
    """A registered target: the true map plus its canonical study settings.

    ``n_starts``/``max_iters`` of None keep the fitting defaults; functions
    whose noise regime needs a different split of the evaluation budget
    across starts carry explicit values.
    """

    id: str
    d: int
    fn: Callable[[np.ndarray], np.ndarray]
    fit_lower: tuple[float, ...]
    fit_upper: tuple[float, ...]
    eval_lower: tuple[float, ...]
    eval_upper: tuple[float, ...]
    x0: tuple[float, ...]
    sigma: float
    m_max: int
    k_values: tuple[int, ...]
    n_starts: int | None = None
    max_iters: int | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        values = np.asarray(self.fn(pts), dtype=float).reshape(-1)
        if values.shape[0] != pts.shape[0]:
            raise DomainError(f"test function {self.id} returned a wrong-length vector")
        return values


def _fn_identity(x: np.ndarray) -> np.ndarray:
    return x[:, 0]


def _fn_cubic(x: np.ndarray) -> np.ndarray:
    t = x[:, 0]
    return t**3 - 6.0 * t


def _fn_trig_mix(x: np.ndarray) -> np.ndarray:
    t = x[:, 0]
    return t * np.sin(t) + np.exp(-(t**2)) + t * np.cos(t) / (t**2 + 1.0)


def _fn_exp2d(x: np.ndarray) -> np.ndarray:
    return np.exp(-(x[:, 0] ** 2) + x[:, 1])


def _fn_polyexp2d(x: np.ndarray) -> np.ndarray:
    u, v = x[:, 0], x[:, 1]
    return u**3 * v - v**2 * np.exp(u) + 3.0 * u * v


# Budgets: the model family has near-flat RSS directions along which extra
# components trade coefficient growth against power warps; on noisy data the
# optimizer rides them (tiny RSS gains, severe extrapolation drift). Per-start
# budgets of a few evaluations keep noisy polynomial-regime fits near the
# anchor, while near-noiseless or multiplicative targets benefit from deep
# polish.
REGISTRY: dict[str, TestFunction] = {
    tf.id: tf
    for tf in (
        TestFunction(
            id="identity",
            d=1,
            fn=_fn_identity,
            fit_lower=(0.0,),
            fit_upper=(5.0,),
            eval_lower=(0.0,),
            eval_upper=(7.0,),
            x0=(0.0,),
            sigma=1e-5,
            m_max=15,
            k_values=(500,),
            n_starts=4,
            max_iters=400,
        ),
        TestFunction(
            id="cubic",
            d=1,
            fn=_fn_cubic,
            fit_lower=(0.0,),
            fit_upper=(3.0,),
            eval_lower=(0.0,),
            eval_upper=(4.0,),
            x0=(0.0,),
            sigma=1.0,
            m_max=5,
            k_values=(25, 100, 500),
            n_starts=20,
            max_iters=40,
        ),
        TestFunction(
            id="trig_mix",
            d=1,
            fn=_fn_trig_mix,
            fit_lower=(0.0,),
            fit_upper=(3.0,),
            eval_lower=(0.0,),
            eval_upper=(4.0,),
            x0=(0.0,),
            sigma=0.2,
            m_max=6,
            k_values=(25, 100, 500),
            n_starts=20,
            max_iters=100,
        ),
        TestFunction(
            id="exp2d",
            d=2,
            fn=_fn_exp2d,
            fit_lower=(0.0, 0.0),
            fit_upper=(1.0, 1.0),
            eval_lower=(0.0, 0.0),
            eval_upper=(1.2, 1.2),
            x0=(-0.05, -0.05),
            sigma=0.5,
            m_max=6,
            k_values=(500,),
        ),
        TestFunction(
            id="polyexp2d",
            d=2,
            fn=_fn_polyexp2d,
            fit_lower=(0.0, 0.0),
            fit_upper=(1.0, 1.0),
            eval_lower=(0.0, 0.0),
            eval_upper=(1.2, 1.2),
            x0=(-0.1, -0.1),
            sigma=0.05,
            m_max=8,
            k_values=(500,),
        ),
    )
}


def get_test_function(function_id: str) -> TestFunction:
    try:
        return REGISTRY[function_id]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise DomainError(f"unknown test function {function_id!r}; known: {known}") from None


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a test function at one sample size, over several seeds.

    ``x0`` is the explicit expansion origin (None delegates to the
    automatic data-driven rule). ``n_starts``/``max_iters``/``grid_points``
    of None fall back to package defaults.
    """

    function: str
    K: int
    sigma: float
    m_max: int
    fit_lower: tuple[float, ...]
    fit_upper: tuple[float, ...]
    eval_lower: tuple[float, ...]
    eval_upper: tuple[float, ...]
    n_seeds: int = _DEFAULT_N_SEEDS
    seed: int = 0
    x0: tuple[float, ...] | None = None
    n_starts: int | None = None
    max_iters: int | None = None
    grid_points: int | None = None

    def __post_init__(self) -> None:
        fn = get_test_function(self.function)
        for name in ("fit_lower", "fit_upper", "eval_lower", "eval_upper"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != fn.d:
                raise DomainError(f"{name} must have length d={fn.d}, got {len(value)}")
            if not all(math.isfinite(v) for v in value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if any(lo >= hi for lo, hi in zip(self.fit_lower, self.fit_upper)):
            raise DomainError("fit window must have lower < upper")
        if any(lo >= hi for lo, hi in zip(self.eval_lower, self.eval_upper)):
            raise DomainError("evaluation window must have lower < upper")
        # The evaluation window must contain the fit window: extrapolation
        # quality is measured on a superset of the training region.
        inside = all(
            elo <= flo and fhi <= ehi
            for elo, flo, fhi, ehi in zip(
                self.eval_lower, self.fit_lower, self.fit_upper, self.eval_upper
            )
        )
        if not inside:
            raise DomainError("evaluation window must contain the fit window")
        if not isinstance(self.K, int) or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K}")
        if not (float(self.sigma) >= 0.0):
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))
        if not isinstance(self.m_max, int) or self.m_max < 1:
            raise DomainError(f"m_max must be a positive integer, got {self.m_max}")
        if not isinstance(self.n_seeds, int) or self.n_seeds < 1:
            raise DomainError(f"n_seeds must be a positive integer, got {self.n_seeds}")
        object.__setattr__(self, "seed", int(self.seed))
        if self.x0 is not None:
            x0 = tuple(float(v) for v in self.x0)
            if len(x0) != fn.d:
                raise DomainError(f"x0 must have length d={fn.d}, got {len(x0)}")
            object.__setattr__(self, "x0", x0)

    @property
    def d(self) -> int:
        return get_test_function(self.function).d


def default_spec(function_id: str, K: int | None = None, **overrides) -> ExperimentSpec:
    """Canonical spec for a registered function (K defaults to its largest)."""
    fn = get_test_function(function_id)
    base = dict(
        function=fn.id,
        K=int(K) if K is not None else fn.k_values[-1],
        sigma=fn.sigma,
        m_max=fn.m_max,
        fit_lower=fn.fit_lower,
        fit_upper=fn.fit_upper,
        eval_lower=fn.eval_lower,
        eval_upper=fn.eval_upper,
        x0=fn.x0,
        n_starts=fn.n_starts,
        max_iters=fn.max_iters,
    )
    base.update(overrides)
    return ExperimentSpec(**base)


def make_dataset(fn: TestFunction, K: int, sigma: float, rng: RngStream) -> Dataset:
    """K noisy samples of fn on its fit window, rows sorted lexicographically.

    Coordinates are uniform with an open lower edge (lo, hi] so every sample
    stays strictly above an origin placed at the window's lower corner;
    noise is N(0, sigma^2), drawn after sorting. Bit-identical per stream.
    """
    if not isinstance(K, int) or K < 1:
        raise DomainError(f"K must be a positive integer, got {K}")
    if not (float(sigma) >= 0.0):
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    gen = rng.generator()
    lo = np.asarray(fn.fit_lower)
    hi = np.asarray(fn.fit_upper)
    u = gen.random((K, fn.d))
    X = hi[None, :] - (hi - lo)[None, :] * u
    X = X[np.lexsort(X.T[::-1])]
    y = fn(X) + float(sigma) * gen.standard_normal(K)
    return Dataset(X=X, y=y)


@dataclass(frozen=True)
class SeedRecord:
    """Outcome of one seed of an experiment (error text when the fit failed)."""

    seed_index: int
    chosen_m: int | None
    rss: float | None
    sigma2_hat: float | None
    d_sq: float | None
    d_l1: float | None
    wall_time_s: float
    error: str | None = None


@dataclass(frozen=True)
class ExperimentReport:
    """Per-seed outcomes plus medians over the successful seeds."""

    spec: ExperimentSpec
    per_seed: tuple[SeedRecord, ...]
    medians: dict[str, float] = field(compare=False)

    @property
    def n_failed(self) -> int:
        return sum(1 for rec in self.per_seed if rec.error is not None)


_MEDIAN_FIELDS = ("chosen_m", "rss", "sigma2_hat", "d_sq", "d_l1", "wall_time_s")


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run every seed of the experiment and attach medians.

    Seed i draws its dataset from stream (spec.seed, i) and fits with master
    seed spec.seed + 100003*(i+1). Per-seed fit failures are recorded, not
    fatal, unless every seed fails.
    """
    fn = get_test_function(spec.function)
    fn = replace(
        fn,
        fit_lower=spec.fit_lower,
        fit_upper=spec.fit_upper,
        eval_lower=spec.eval_lower,
        eval_upper=spec.eval_upper,
    )
    grid_points = spec.grid_points or DEFAULT_GRID_POINTS.get(fn.d, 100)
    records = []
    for i in range(spec.n_seeds):
        t_start = time.perf_counter()
        error = None
        chosen_m = rss_value = sigma2_hat = d_sq = d_l1 = None
        try:
            data = make_dataset(fn, spec.K, spec.sigma, RngStream(spec.seed, i))
            cfg = FitConfig(
                n_starts=spec.n_starts if spec.n_starts is not None else FitConfig().n_starts,
                max_iters=spec.max_iters if spec.max_iters is not None else FitConfig().max_iters,
                seed=spec.seed + _FIT_SEED_STRIDE * (i + 1),
            )
            sel = select_model(data, spec.m_max, cfg, x0=spec.x0)
            model = sel.chosen.model
            grid = shift_window_above(
                GridSpec(spec.eval_lower, spec.eval_upper, grid_points), model.x0
            )
            pts = grid.points()
            f_hat = predict_grid(model, pts)
            f_true = fn(pts)
            chosen_m = sel.chosen_m
            rss_value = sel.chosen.rss
            sigma2_hat = sel.chosen.sigma2
            d_sq = integrated_sq_distance(f_hat, f_true, grid)
            d_l1 = l1_distance(f_hat, f_true, grid)
        except (FitFailure, NumericRangeError, DomainError) as exc:
            error = f"{type(exc).__name__}: {exc}"
        records.append(
            SeedRecord(
                seed_index=i,
                chosen_m=chosen_m,
                rss=rss_value,
                sigma2_hat=sigma2_hat,
                d_sq=d_sq,
                d_l1=d_l1,
                wall_time_s=time.perf_counter() - t_start,
                error=error,
            )
        )
    good = [rec for rec in records if rec.error is None]
    if not good:
        raise FitFailure(
            f"every seed of experiment {spec.function!r} (K={spec.K}) failed: "
            + "; ".join(rec.error for rec in records if rec.error)
        )
    medians = {}
    for name in _MEDIAN_FIELDS:
        values = [getattr(rec, name) for rec in (records if name == "wall_time_s" else good)]
        medians[name] = float(np.median([v for v in values if v is not None]))
    return ExperimentReport(spec=spec, per_seed=tuple(records), medians=medians)


# ---------------------------------------------------------------------------
# Spec and report serialization.
# ---------------------------------------------------------------------------


def spec_to_dict(spec: ExperimentSpec) -> dict:
    doc = {
        "function": spec.function,
        "K": spec.K,
        "sigma": spec.sigma,
        "m_max": spec.m_max,
        "fit_window": {"lower": list(spec.fit_lower), "upper": list(spec.fit_upper)},
        "eval_window": {"lower": list(spec.eval_lower), "upper": list(spec.eval_upper)},
        "n_seeds": spec.n_seeds,
        "seed": spec.seed,
        "x0": None if spec.x0 is None else list(spec.x0),
    }
    for name in ("n_starts", "max_iters", "grid_points"):
        value = getattr(spec, name)
        if value is not None:
            doc[name] = value
    return doc


def spec_from_dict(doc: dict) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise DataError("experiment spec must be a JSON object")
    try:
        function = doc["function"]
    except KeyError:
        raise DataError("experiment spec is missing the 'function' field") from None
    fn = get_test_function(function)
    kwargs = dict(
        function=function,
        K=int(doc.get("K", fn.k_values[-1])),
        sigma=float(doc.get("sigma", fn.sigma)),
        m_max=int(doc.get("m_max", fn.m_max)),
        n_seeds=int(doc.get("n_seeds", _DEFAULT_N_SEEDS)),
        seed=int(doc.get("seed", 0)),
    )
    fit_window = doc.get("fit_window")
    kwargs["fit_lower"] = tuple(fit_window["lower"]) if fit_window else fn.fit_lower
    kwargs["fit_upper"] = tuple(fit_window["upper"]) if fit_window else fn.fit_upper
    eval_window = doc.get("eval_window")
    kwargs["eval_lower"] = tuple(eval_window["lower"]) if eval_window else fn.eval_lower
    kwargs["eval_upper"] = tuple(eval_window["upper"]) if eval_window else fn.eval_upper
    if "x0" in doc:
        kwargs["x0"] = None if doc["x0"] is None else tuple(doc["x0"])
    else:
        kwargs["x0"] = fn.x0
    for name in ("n_starts", "max_iters"):
        if doc.get(name) is not None:
            kwargs[name] = int(doc[name])
        else:
            kwargs[name] = getattr(fn, name)
    if doc.get("grid_points") is not None:
        kwargs["grid_points"] = int(doc["grid_points"])
    try:
        return ExperimentSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid experiment spec: {exc}") from None


def load_experiment_specs(path: str) -> list[ExperimentSpec]:
    """Specs from a JSON file holding one spec object or an array of them."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read spec file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"spec file {path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list) or not doc:
        raise DataError(f"spec file {path} must hold a JSON object or nonempty array")
    return [spec_from_dict(entry) for entry in doc]


def _record_row(rec: SeedRecord, include_timing: bool) -> list[str]:
    def fmt(value) -> str:
        return "" if value is None else repr(float(value))

    row = [
        str(rec.seed_index),
        "" if rec.chosen_m is None else str(rec.chosen_m),
        fmt(rec.rss),
        fmt(rec.sigma2_hat),
        fmt(rec.d_sq),
        fmt(rec.d_l1),
    ]
    if include_timing:
        row.append(fmt(rec.wall_time_s))
    row.append("" if rec.error is None else rec.error.replace(",", ";"))
    return row


def report_to_csv(report: ExperimentReport, include_timing: bool = True) -> str:
    """One row per seed plus a median row.

    ``include_timing=False`` drops the wall-time column, making the text a
    pure function of (spec, seed); command-line report files are written in
    that deterministic form.
    """
    header = ["seed", "chosen_m", "rss", "sigma2_hat", "d_sq", "d_l1"]
    if include_timing:
        header.append("wall_time_s")
    header.append("error")
    lines = [",".join(header)]
    for rec in report.per_seed:
        lines.append(",".join(_record_row(rec, include_timing)))
    med = report.medians
    median_row = [
        "median",
        repr(float(med["chosen_m"])),
        repr(float(med["rss"])),
        repr(float(med["sigma2_hat"])),
        repr(float(med["d_sq"])),
        repr(float(med["d_l1"])),
    ]
    if include_timing:
        median_row.append(repr(float(med["wall_time_s"])))
    median_row.append("")
    lines.append(",".join(median_row))
    return "\n".join(lines) + "\n"


def report_to_json(report: ExperimentReport, include_timing: bool = True) -> str:
    def rec_doc(rec: SeedRecord) -> dict:
        doc = {
            "seed_index": rec.seed_index,
            "chosen_m": rec.chosen_m,
            "rss": rec.rss,
            "sigma2_hat": rec.sigma2_hat,
            "d_sq": rec.d_sq,
            "d_l1": rec.d_l1,
            "error": rec.error,
        }
        if include_timing:
            doc["wall_time_s"] = rec.wall_time_s
        return doc

    medians = dict(report.medians)
    if not include_timing:
        medians.pop("wall_time_s", None)
    doc = {
        "spec": spec_to_dict(report.spec),
        "per_seed": [rec_doc(rec) for rec in report.per_seed],
        "medians": medians,
    }
    return json.dumps(doc, indent=2) + "\n"


def write_report(report: ExperimentReport, csv_path: str, json_path: str, include_timing: bool = True) -> None:
    atomic_write_text(csv_path, report_to_csv(report, include_timing))
    atomic_write_text(json_path, report_to_json(report, include_timing))
