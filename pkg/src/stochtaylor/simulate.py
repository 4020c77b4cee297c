"""Point-process simulation, random-sum realizations, and Monte Carlo envelopes.

A realization of the process under a :class:`~stochtaylor.model.GeneralIntensity`
is a point pattern: ``v ~ Poisson(lam)`` events, each assigned to a mixture
component by the weights and drawn from that component's (d+1)-variate normal
over (a, n_1..n_d). The random sum ``sum_j a_j * prod_r (x_r-x0_r)**n_{r,j}``
evaluated over many patterns gives Monte Carlo estimates of the closed-form
mean (:func:`mc_mean`) and pointwise quantile envelopes (:func:`envelope`).

Realization i of any batch uses stream ``rng.child(i)``, so partitioning a
batch across workers reproduces the identical realization set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotSampleableError, NumericRangeError
from .model import ComponentParams, GeneralIntensity, _check_point
from .rng import RngStream

__all__ = [
    "PointPattern",
    "Envelope",
    "is_sampleable",
    "sample_pattern",
    "ste_realization",
    "mc_values",
    "mc_mean",
    "envelope",
    "envelope_to_csv",
]

# Components may carry sum(rho^2) marginally above 1 from roundoff; the
# covariance is treated as positive semidefinite within this slack.
_PSD_TOL = 1e-12


@dataclass(frozen=True)
class PointPattern:
    """Events of one process realization.

    ``events`` is a (v, d+1) float array: column 0 holds the coefficients a,
    columns 1..d the power vectors n. ``v = 0`` (no events) is a legal draw.
    The array is frozen read-only.
    """

    events: np.ndarray
    d: int

    def __post_init__(self) -> None:
        ev = np.asarray(self.events, dtype=float)
        if not isinstance(self.d, int) or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        if ev.ndim != 2 or ev.shape[1] != self.d + 1:
            raise DomainError(
                f"events must be a (v, d+1) array with d={self.d}, got shape {ev.shape}"
            )
        if ev.size and not np.isfinite(ev).all():
            raise DomainError("events must be finite")
        ev = ev.copy()
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)

    @property
    def count(self) -> int:
        return self.events.shape[0]

    @property
    def a(self) -> np.ndarray:
        return self.events[:, 0]

    @property
    def n(self) -> np.ndarray:
        return self.events[:, 1:]


@dataclass(frozen=True)
class Envelope:
    """Pointwise empirical quantile band over shared realizations.

    ``lower``/``upper`` are the alpha/2 and 1-alpha/2 empirical quantiles of
    the realization values at each grid point; ``mean`` is their average.
    All realizations are evaluated across the whole grid, so the band is
    coherent along the grid (functional, not per-point-independent).
    """

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean: np.ndarray
    alpha: float
    n_real: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2:
            raise DomainError(f"grid must be (N, d), got shape {grid.shape}")
        n_points = grid.shape[0]
        arrays = {}
        for name in ("lower", "upper", "mean"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n_points,):
                raise DomainError(f"{name} must have shape ({n_points},), got {arr.shape}")
            arrays[name] = arr
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not isinstance(self.n_real, int) or self.n_real < 1:
            raise DomainError(f"n_real must be a positive integer, got {self.n_real}")
        if np.any(arrays["lower"] > arrays["upper"]):
            raise DomainError("lower must not exceed upper anywhere")
        for name, arr in (("grid", grid), *arrays.items()):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def is_sampleable(comp: ComponentParams) -> bool:
    """Whether the component's (a, n) covariance is positive semidefinite.

    With independent power coordinates the condition reduces to
    ``sum_r rho[r]**2 <= 1`` (checked with 1e-12 slack) plus nonnegative
    standard deviations.
    """
    if comp.sigma_a < 0.0 or any(s < 0.0 for s in comp.sigma_n):
        return False
    return math.fsum(r * r for r in comp.rho) <= 1.0 + _PSD_TOL


def _component_arrays(g: GeneralIntensity):
    """Stacked per-component moment arrays for vectorized event assembly."""
    m = g.m
    d = g.d
    mu_a = np.empty(m)
    sigma_a = np.empty(m)
    mu_n = np.empty((m, d))
    sigma_n = np.empty((m, d))
    rho = np.empty((m, d))
    for j, comp in enumerate(g.components):
        mu_a[j] = comp.mu_a
        sigma_a[j] = comp.sigma_a
        mu_n[j] = comp.mu_n
        sigma_n[j] = comp.sigma_n
        rho[j] = comp.rho
    # Residual scale of the coefficient after conditioning on the powers;
    # clamp tiny negatives allowed by the PSD slack.
    tail = np.sqrt(np.maximum(0.0, 1.0 - (rho**2).sum(axis=1)))
    cum_w = np.cumsum(np.asarray(g.weights, dtype=float))
    return mu_a, sigma_a, mu_n, sigma_n, rho, tail, cum_w


def _require_sampleable(g: GeneralIntensity) -> None:
    for idx, comp in enumerate(g.components):
        if not is_sampleable(comp):
            ssq = math.fsum(r * r for r in comp.rho)
            raise NotSampleableError(
                f"component {idx} is not sampleable: sum of squared correlations "
                f"{ssq:.6g} exceeds 1 (covariance not positive semidefinite)"
            )


def _draw_events(g, arrays, gen: np.random.Generator) -> np.ndarray:
    """One pattern's event matrix; fixed draw order: count, components, normals."""
    mu_a, sigma_a, mu_n, sigma_n, rho, tail, cum_w = arrays
    v = int(gen.poisson(g.lam))
    if g.m > 1:
        # Inverse-CDF component assignment: one uniform per event.
        idx = np.searchsorted(cum_w, gen.random(v), side="right")
        np.clip(idx, 0, g.m - 1, out=idx)
    else:
        idx = np.zeros(v, dtype=np.intp)
    z = gen.standard_normal((v, g.d + 1))
    n = mu_n[idx] + sigma_n[idx] * z[:, 1:]
    resid = (rho[idx] * z[:, 1:]).sum(axis=1) + tail[idx] * z[:, 0]
    a = mu_a[idx] + sigma_a[idx] * resid
    return np.column_stack([a, n]) if v else np.empty((0, g.d + 1))


def sample_pattern(g: GeneralIntensity, rng: RngStream) -> PointPattern:
    """Draw one point pattern: Poisson count, then i.i.d. mixture events.

    Event j samples its component index from the weights, its powers
    n_r ~ Normal(mu_n_r, sigma_n_r^2) independently, and its coefficient
    a ~ Normal(mu_a, sigma_a^2) with Corr(a, n_r) = rho_r. Raises
    NotSampleableError naming the offending component if any covariance is
    not positive semidefinite. Deterministic per (seed, stream_id).
    """
    _require_sampleable(g)
    arrays = _component_arrays(g)
    events = _draw_events(g, arrays, rng.generator())
    return PointPattern(events=events, d=g.d)


def ste_realization(pattern: PointPattern, x, x0) -> float:
    """Random-sum value of one pattern at x: sum_j a_j prod_r (x_r-x0_r)**n_rj.

    Empty patterns evaluate to 0. Requires x strictly above x0; overflow
    raises NumericRangeError.
    """
    x0_t = tuple(float(v) for v in x0)
    delta, _ = _check_point(x, x0_t, pattern.d)
    if pattern.count == 0:
        return 0.0
    with np.errstate(over="ignore"):
        powers = np.prod(np.asarray(delta)[None, :] ** pattern.n, axis=1)
        total = float(pattern.a @ powers)
    if not math.isfinite(total):
        raise NumericRangeError(
            "realization value exceeds the largest finite double; "
            "rescale inputs/outputs to smaller units"
        )
    return total


def mc_values(g: GeneralIntensity, grid, n_real: int, rng: RngStream) -> np.ndarray:
    """Random-sum values of n_real realizations at every grid point.

    Returns an (n_real, n_points) matrix: row i is realization i (drawn from
    stream ``rng.child(i)``) evaluated across the whole grid, so any
    per-point statistic computed from one matrix shares its realizations
    coherently. ``mc_mean`` and ``envelope`` are reductions of this matrix.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.ndim != 2 or grid.shape[1] != g.d:
        raise DomainError(f"grid must be (N, {g.d}), got shape {grid.shape}")
    if grid.shape[0] == 0:
        raise DomainError("grid must contain at least one point")
    if not isinstance(n_real, int) or n_real < 1:
        raise DomainError(f"n_real must be a positive integer, got {n_real}")
    _require_sampleable(g)
    n_points = grid.shape[0]
    log_delta = np.empty_like(grid)
    for i in range(n_points):
        _, ld = _check_point(grid[i], g.x0, g.d)
        log_delta[i] = ld
    arrays = _component_arrays(g)
    values = np.empty((n_real, n_points))
    with np.errstate(over="ignore"):
        for i in range(n_real):
            events = _draw_events(g, arrays, rng.child(i).generator())
            if events.shape[0]:
                values[i] = events[:, 0] @ np.exp(events[:, 1:] @ log_delta.T)
            else:
                values[i] = 0.0
    if not np.isfinite(values).all():
        raise NumericRangeError(
            "a realization value exceeds the largest finite double; "
            "rescale inputs/outputs to smaller units"
        )
    return values


def mc_mean(g: GeneralIntensity, x, n_real: int, rng: RngStream) -> tuple[float, float]:
    """Monte Carlo mean of the random sum at x over n_real realizations.

    Returns (mean, stderr) with stderr the sample standard deviation divided
    by sqrt(n_real). This is the simulation cross-check of the closed-form
    mean: the two agree within a few stderr for any sampleable model.
    """
    if not isinstance(n_real, int) or n_real < 2:
        raise DomainError(f"n_real must be an integer >= 2, got {n_real}")
    grid = np.asarray([list(map(float, np.atleast_1d(x)))], dtype=float)
    values = mc_values(g, grid, n_real, rng)[:, 0]
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_real))
    return mean, stderr


def envelope(g: GeneralIntensity, grid, n_real: int, alpha: float, rng: RngStream) -> Envelope:
    """Pointwise (alpha/2, 1-alpha/2) empirical quantile band at each grid point.

    Quantiles are nearest-rank (inverted CDF) over n_real shared realizations;
    each realization is evaluated across the entire grid. Deterministic per
    (seed, stream_id).
    """
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if not (0.0 < float(alpha) < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    alpha = float(alpha)
    values = mc_values(g, pts, n_real, rng)
    lower = np.quantile(values, alpha / 2.0, axis=0, method="inverted_cdf")
    upper = np.quantile(values, 1.0 - alpha / 2.0, axis=0, method="inverted_cdf")
    mean = values.mean(axis=0)
    return Envelope(grid=pts, lower=lower, upper=upper, mean=mean, alpha=alpha, n_real=n_real)


def envelope_to_csv(env: Envelope) -> str:
    """CSV text with columns x_1..x_d, lower, mean, upper; one row per point."""
    d = env.grid.shape[1]
    header = [f"x_{r + 1}" for r in range(d)] + ["lower", "mean", "upper"]
    lines = [",".join(header)]
    for i in range(env.grid.shape[0]):
        row = [repr(float(v)) for v in env.grid[i]]
        row += [repr(float(env.lower[i])), repr(float(env.mean[i])), repr(float(env.upper[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
