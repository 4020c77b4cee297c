"""Least-squares estimation of mixture models and model-order selection.

For a fixed component count M the K observations are fitted by multi-start
nonlinear least squares on an unconstrained parameter vector (sigma mapped
through a floored exponential, correlation vectors through
z -> z / sqrt(1 + ||z||^2), which keeps sum(rho^2) < 1). Start 0 anchors at
a polynomial-like configuration (powers 0..M-1, coefficients from ordinary
least squares on the implied monomial basis); later starts jitter it with
growing Gaussian perturbations. The evaluation budget ``max_iters`` is
shared across starts, so many starts mean shallow local polish per start.
Model-order selection fits every M = 1..M_max and picks the smallest M
whose RSS lands inside a tie window around the best RSS (raw argmin would
nearly always return M_max, since RSS is nonincreasing in M for a capable
optimizer); the window combines a relative term with the one-standard-error
width of the RSS statistic itself, so orders that only chase noise do not
displace smaller ones.

Everything is deterministic given (data, config including seed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitFailure, NumericRangeError
from .model import ComponentParams, SteModel, evaluate
from .rng import RngStream

__all__ = [
    "Dataset",
    "FitConfig",
    "FitResult",
    "SelectedFit",
    "UnderdeterminedWarning",
    "choose_origin",
    "rss",
    "sigma2_mle",
    "pack_params",
    "unpack_params",
    "objective_value",
    "objective_gradient",
    "fit_fixed_m",
    "select_model",
    "fit_result_to_dict",
    "selected_fit_to_dict",
]

# Transformed-space constants. SIGMA_FLOOR keeps standard deviations positive
# without letting them collapse to exact zero inside the optimizer. _EXP_CLIP
# and _COEFF_CLIP cap the power factor and the coefficient of every term so
# that predictions, residuals, and squared costs stay finite for any
# parameter vector (20 clipped terms leave sum(residual^2) < 1e300); both
# caps sit many orders of magnitude outside any parameter region a usable
# fit can occupy, and derivative paths through a clipped quantity are zeroed.
SIGMA_FLOOR = 1e-8
_EXP_CLIP = 200.0
_COEFF_CLIP = 1e60
# Step-size stopping tolerance: overparameterized component counts produce
# long degenerate valleys where the RSS improvement test alone grinds until
# the evaluation budget; a small-step exit ends those runs early.
_XTOL = 1e-8

# Model selection: RSS ties are called within a relative window plus an
# absolute floor proportional to the data's energy (so noiseless fits, whose
# RSS is indistinguishable from zero at every M, resolve to the smallest M)
# plus a one-standard-error allowance: under Gaussian noise RSS fluctuates
# with standard deviation ~ sqrt(2K) * sigma^2, and sigma^2 is estimated by
# rss_min / K, so RSS gaps below that scale carry no evidence for extra
# components.
_TIE_FLOOR_REL = 1e-8
_TIE_SE_MULT = 0.75

# Multi-start jitter: start s perturbs the anchor by N(0, scale(s)^2) with
# scale growing linearly and capped, balancing local refinement against
# basin exploration.
_JITTER_STEP = 0.25
_JITTER_CAP = 1.0


class UnderdeterminedWarning(UserWarning):
    """Fewer observations than free parameters; the fit is not unique."""


@dataclass(frozen=True)
class Dataset:
    """Observations (X, y): K rows of d coordinates with one response each."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DomainError(f"X must be a (K, d) matrix with K, d >= 1, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DomainError(f"y has length {y.shape[0]} but X has {X.shape[0]} rows")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise DomainError("dataset entries must be finite")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def K(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Optimizer and selection settings.

    ``n_starts`` local optimizations per M; ``max_iters`` total
    function-evaluation budget per model order, split evenly across starts
    (each start gets at least 2 evaluations); ``rel_tol`` relative RSS
    improvement stopping tolerance; ``delta_frac`` origin offset as a
    fraction of the per-coordinate data range; ``select_tol`` relative RSS
    tie window for choosing M; ``seed`` master seed for the start jitter.
    """

    n_starts: int = 20
    max_iters: int = 500
    rel_tol: float = 1e-10
    delta_frac: float = 0.05
    select_tol: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n_starts, int) or self.n_starts < 1:
            raise DomainError(f"n_starts must be a positive integer, got {self.n_starts}")
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise DomainError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not (self.rel_tol > 0.0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if not (self.delta_frac > 0.0):
            raise DomainError(f"delta_frac must be positive, got {self.delta_frac}")
        if self.select_tol < 0.0:
            raise DomainError(f"select_tol must be >= 0, got {self.select_tol}")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class FitResult:
    """Best model found for one fixed M."""

    model: SteModel
    rss: float
    sigma2: float
    n_starts_converged: int
    best_start_index: int
    underdetermined: bool = False


@dataclass(frozen=True)
class SelectedFit:
    """Fits for M = 1..M_max with the tie-window choice.

    ``per_m`` maps each successfully fitted M to its FitResult (so
    ``per_m[chosen_m] is chosen``); M values whose every start failed appear
    in ``failures`` instead.
    """

    per_m: Mapping[int, FitResult]
    chosen_m: int
    chosen: FitResult
    failures: Mapping[int, str]

    def __post_init__(self) -> None:
        if self.chosen_m not in self.per_m or self.per_m[self.chosen_m] is not self.chosen:
            raise DomainError("chosen must be the per_m entry at chosen_m")


def choose_origin(X, delta_frac: float) -> np.ndarray:
    """Expansion origin strictly below the data: min - max(delta_frac*range, 1e-6).

    A zero per-coordinate range falls back to the absolute 1e-6 offset, so
    every shift X[k][r] - x0[r] is strictly positive.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise DomainError(f"X must be a nonempty (K, d) matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DomainError("X must be finite")
    if not (float(delta_frac) > 0.0):
        raise DomainError(f"delta_frac must be positive, got {delta_frac}")
    mins = X.min(axis=0)
    ranges = X.max(axis=0) - mins
    return mins - np.maximum(float(delta_frac) * ranges, 1e-6)


def rss(model: SteModel, data: Dataset) -> float:
    """Residual sum of squares sum_k (y_k - evaluate(model, x_k))**2."""
    total = 0.0
    for k in range(data.K):
        try:
            fk = evaluate(model, data.X[k])
        except DomainError as exc:
            raise DomainError(f"row {k}: {exc}") from None
        except NumericRangeError as exc:
            raise NumericRangeError(f"row {k}: {exc}") from None
        residual = data.y[k] - fk
        total += residual * residual
    return float(total)


def sigma2_mle(rss_value: float, K: int) -> float:
    """Maximum-likelihood residual variance: RSS / K."""
    rss_value = float(rss_value)
    if rss_value < 0.0:
        raise DomainError(f"rss must be >= 0, got {rss_value}")
    if not isinstance(K, int) or K < 1:
        raise DomainError(f"K must be a positive integer, got {K}")
    return rss_value / K


# ---------------------------------------------------------------------------
# Unconstrained parameterization.
#
# Component layout: [mu_a, s_a, mu_n (d), s_n (d), z (d)] with
# sigma = SIGMA_FLOOR + exp(s) and rho = z / sqrt(1 + ||z||^2).
# ---------------------------------------------------------------------------


def params_width(d: int) -> int:
    """Free parameters per component: 3d + 2."""
    return 3 * d + 2


def _split_params(v: np.ndarray, m: int, d: int):
    V = v.reshape(m, params_width(d))
    return (
        V[:, 0],
        V[:, 1],
        V[:, 2 : 2 + d],
        V[:, 2 + d : 2 + 2 * d],
        V[:, 2 + 2 * d :],
    )


def _transform(s_a, s_n, z):
    sigma_a = SIGMA_FLOOR + np.exp(np.minimum(s_a, _EXP_CLIP))
    sigma_n = SIGMA_FLOOR + np.exp(np.minimum(s_n, _EXP_CLIP))
    denom = np.sqrt(1.0 + (z**2).sum(axis=1, keepdims=True))
    rho = z / denom
    return sigma_a, sigma_n, rho


def pack_params(model: SteModel) -> np.ndarray:
    """Unconstrained vector of length M*(3d+2), components in canonical order.

    Inverse of :func:`unpack_params` up to component permutation; standard
    deviations at or below the 1e-8 floor and correlation vectors with
    sum(rho^2) >= 1 are clamped just inside the transform's range.
    """
    d = model.d
    out = np.empty((model.m, params_width(d)))
    for i, comp in enumerate(model.components):
        out[i, 0] = comp.mu_a
        out[i, 1] = math.log(max(comp.sigma_a - SIGMA_FLOOR, 1e-300))
        out[i, 2 : 2 + d] = comp.mu_n
        out[i, 2 + d : 2 + 2 * d] = [
            math.log(max(s - SIGMA_FLOOR, 1e-300)) for s in comp.sigma_n
        ]
        rho = np.asarray(comp.rho)
        ssq = float((rho**2).sum())
        if ssq >= 1.0:
            rho = rho * math.sqrt((1.0 - 1e-12) / ssq)
            ssq = 1.0 - 1e-12
        out[i, 2 + 2 * d :] = rho / math.sqrt(1.0 - ssq)
    return out.reshape(-1)


def unpack_params(v, m: int, d: int, x0) -> SteModel:
    """Model from an unconstrained vector (components canonically re-sorted)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    expected = m * params_width(d)
    if v.shape[0] != expected:
        raise DomainError(
            f"parameter vector has length {v.shape[0]}, expected {expected} "
            f"for M={m}, d={d}"
        )
    mu_a, s_a, mu_n, s_n, z = _split_params(v, m, d)
    sigma_a, sigma_n, rho = _transform(s_a, s_n, z)
    comps = tuple(
        ComponentParams(
            mu_a=float(mu_a[i]),
            sigma_a=float(sigma_a[i]),
            mu_n=tuple(mu_n[i]),
            sigma_n=tuple(sigma_n[i]),
            rho=tuple(rho[i]),
        )
        for i in range(m)
    )
    return SteModel(d=d, components=comps, x0=tuple(float(c) for c in x0), sigma2=0.0)


def _forward(v: np.ndarray, m: int, d: int, log_delta: np.ndarray):
    """Predictions of the transformed parameter vector at precomputed log offsets."""
    mu_a, s_a, mu_n, s_n, z = _split_params(v, m, d)
    sigma_a, sigma_n, rho = _transform(s_a, s_n, z)
    corr = log_delta @ (rho * sigma_n).T
    coeff_raw = mu_a[None, :] + sigma_a[None, :] * corr
    coeff_mask = np.abs(coeff_raw) < _COEFF_CLIP
    coeff = np.clip(coeff_raw, -_COEFF_CLIP, _COEFF_CLIP)
    exponent_sum = log_delta @ mu_n.T + 0.5 * (log_delta**2) @ (sigma_n**2).T
    power_mask = exponent_sum <= _EXP_CLIP
    powers = np.exp(np.where(power_mask, exponent_sum, _EXP_CLIP))
    pred = (coeff * powers).sum(axis=1)
    return pred, (sigma_a, sigma_n, rho, z, corr, coeff, powers, power_mask, coeff_mask)


def _prediction_jacobian(aux, m: int, d: int, log_delta: np.ndarray) -> np.ndarray:
    """d(prediction)/d(parameter vector), shape (K, M*(3d+2)).

    Derivative paths through a clipped power factor or clipped coefficient
    are zeroed (the prediction is locally constant along them).
    """
    sigma_a, sigma_n, rho, z, corr, coeff, powers, power_mask, coeff_mask = aux
    K = log_delta.shape[0]
    width = params_width(d)
    J = np.empty((K, m * width))
    log_sq = log_delta**2
    for i in range(m):
        base = i * width
        P = powers[:, i]
        P_via_coeff = P * coeff_mask[:, i]
        CP_masked = coeff[:, i] * P * power_mask[:, i]
        J[:, base] = P_via_coeff
        J[:, base + 1] = corr[:, i] * P_via_coeff * (sigma_a[i] - SIGMA_FLOOR)
        J[:, base + 2 : base + 2 + d] = CP_masked[:, None] * log_delta
        via_coeff = (sigma_a[i] * rho[i])[None, :] * log_delta * P_via_coeff[:, None]
        via_power = CP_masked[:, None] * (sigma_n[i][None, :] * log_sq)
        J[:, base + 2 + d : base + 2 + 2 * d] = (via_coeff + via_power) * (
            sigma_n[i] - SIGMA_FLOOR
        )[None, :]
        d_rho = (sigma_a[i] * sigma_n[i])[None, :] * log_delta * P_via_coeff[:, None]
        zi = z[i]
        s = math.sqrt(1.0 + float(zi @ zi))
        J[:, base + 2 + 2 * d : base + width] = d_rho / s - np.outer(d_rho @ zi, zi) / s**3
    return J


def _log_offsets(X: np.ndarray, x0: np.ndarray) -> np.ndarray:
    deltas = X - x0[None, :]
    bad = np.nonzero(~(deltas > 0.0).all(axis=1))[0]
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"row {k}: coordinates {X[k].tolist()} not strictly above the origin "
            f"{x0.tolist()}"
        )
    return np.log(deltas)


def objective_value(v, m: int, data: Dataset, x0) -> float:
    """RSS of an unconstrained parameter vector (the optimizer's objective)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    log_delta = _log_offsets(data.X, x0)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != m * params_width(data.d):
        raise DomainError(
            f"parameter vector has length {v.shape[0]}, expected {m * params_width(data.d)}"
        )
    pred, _ = _forward(v, m, data.d, log_delta)
    residual = pred - data.y
    return float(residual @ residual)


def objective_gradient(v, m: int, data: Dataset, x0) -> np.ndarray:
    """Analytic gradient of :func:`objective_value` with respect to v."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    log_delta = _log_offsets(data.X, x0)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != m * params_width(data.d):
        raise DomainError(
            f"parameter vector has length {v.shape[0]}, expected {m * params_width(data.d)}"
        )
    pred, aux = _forward(v, m, data.d, log_delta)
    J = _prediction_jacobian(aux, m, data.d, log_delta)
    return 2.0 * (J.T @ (pred - data.y))


def _taylor_start(y: np.ndarray, m: int, d: int, log_delta: np.ndarray) -> np.ndarray:
    """Polynomial-like anchor: powers 0..M-1 per coordinate, OLS coefficients."""
    powers = np.arange(m, dtype=float)
    basis = np.exp(np.minimum(np.outer(log_delta.sum(axis=1), powers), _EXP_CLIP))
    coeffs, *_ = np.linalg.lstsq(basis, y, rcond=None)
    width = params_width(d)
    V = np.empty((m, width))
    V[:, 0] = coeffs
    V[:, 1] = math.log(0.5 - SIGMA_FLOOR)
    V[:, 2 : 2 + d] = powers[:, None]
    V[:, 2 + d : 2 + 2 * d] = math.log(0.1 - SIGMA_FLOOR)
    V[:, 2 + 2 * d :] = 0.0
    return V.reshape(-1)


def fit_fixed_m(data: Dataset, m: int, cfg: FitConfig, x0) -> FitResult:
    """Minimum-RSS model over cfg.n_starts local optimizations at fixed M.

    Start s >= 1 jitters the polynomial-like anchor using stream
    (cfg.seed, s); the winner is the lowest-RSS start, ties broken by the
    smallest start index, so any parallel execution order gives the same
    result. K < M*(3d+2) triggers UnderdeterminedWarning but still fits.
    """
    if not isinstance(m, int) or m < 1:
        raise DomainError(f"M must be a positive integer, got {m}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != data.d:
        raise DomainError(f"x0 must have length d={data.d}, got {x0.shape[0]}")
    if not np.isfinite(x0).all():
        raise DomainError("x0 must be finite")
    log_delta = _log_offsets(data.X, x0)
    n_params = m * params_width(data.d)
    underdetermined = data.K < n_params
    if underdetermined:
        warnings.warn(
            f"K={data.K} observations for {n_params} free parameters at M={m}; "
            "the fit is underdetermined",
            UnderdeterminedWarning,
            stacklevel=2,
        )

    y = data.y

    def residuals(v: np.ndarray) -> np.ndarray:
        pred, _ = _forward(v, m, data.d, log_delta)
        return pred - y

    def jacobian(v: np.ndarray) -> np.ndarray:
        _, aux = _forward(v, m, data.d, log_delta)
        return _prediction_jacobian(aux, m, data.d, log_delta)

    anchor = _taylor_start(y, m, data.d, log_delta)
    budget = max(2, cfg.max_iters // cfg.n_starts)
    candidates = []
    n_converged = 0
    for s in range(cfg.n_starts):
        if s == 0:
            v_start = anchor
        else:
            gen = RngStream(cfg.seed, s).generator()
            scale = min(_JITTER_STEP * s, _JITTER_CAP)
            v_start = anchor + scale * gen.standard_normal(n_params)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            result = least_squares(
                residuals,
                v_start,
                jac=jacobian,
                method="trf",
                ftol=cfg.rel_tol,
                xtol=_XTOL,
                gtol=None,
                max_nfev=budget,
            )
        cost = 2.0 * float(result.cost)
        if math.isfinite(cost):
            candidates.append((cost, s, result.x))
            if result.status > 0:
                n_converged += 1

    candidates.sort(key=lambda item: (item[0], item[1]))
    for _, start_index, v_best in candidates:
        model = unpack_params(v_best, m, data.d, x0)
        try:
            rss_value = rss(model, data)
        except NumericRangeError:
            continue
        sigma2 = sigma2_mle(rss_value, data.K)
        return FitResult(
            model=replace(model, sigma2=sigma2),
            rss=rss_value,
            sigma2=sigma2,
            n_starts_converged=n_converged,
            best_start_index=start_index,
            underdetermined=underdetermined,
        )
    raise FitFailure(f"all {cfg.n_starts} optimization starts failed for M={m}")


def select_model(data: Dataset, m_max: int, cfg: FitConfig, x0=None) -> SelectedFit:
    """Fit M = 1..M_max and choose the smallest M inside the RSS tie window.

    The window is RSS_M <= (1 + select_tol) * rss_min + floor + se, with
    rss_min the best RSS over all orders, floor = 1e-8 * sum(y^2) (resolves
    near-zero noiseless ties to the smallest M), and
    se = 0.75 * sqrt(2K) * rss_min / K, the one-standard-error width of the
    RSS statistic under the fitted noise level (RSS gaps below it carry no
    evidence for extra components). Pass an explicit ``x0`` to override the
    automatic origin rule.
    """
    if not isinstance(m_max, int) or m_max < 1:
        raise DomainError(f"M_max must be a positive integer, got {m_max}")
    if x0 is None:
        x0 = choose_origin(data.X, cfg.delta_frac)
    per_m: dict[int, FitResult] = {}
    failures: dict[int, str] = {}
    for m in range(1, m_max + 1):
        try:
            per_m[m] = fit_fixed_m(data, m, cfg, x0)
        except FitFailure as exc:
            failures[m] = str(exc)
    if not per_m:
        raise FitFailure(
            f"no model order in 1..{m_max} produced a fit: "
            + "; ".join(f"M={m}: {msg}" for m, msg in failures.items())
        )
    rss_min = min(result.rss for result in per_m.values())
    floor = _TIE_FLOOR_REL * float(data.y @ data.y)
    one_se = _TIE_SE_MULT * math.sqrt(2.0 * data.K) * (rss_min / data.K)
    threshold = (1.0 + cfg.select_tol) * rss_min + floor + one_se
    chosen_m = min(m for m, result in per_m.items() if result.rss <= threshold)
    return SelectedFit(
        per_m=per_m,
        chosen_m=chosen_m,
        chosen=per_m[chosen_m],
        failures=failures,
    )


def fit_result_to_dict(result: FitResult) -> dict:
    from .model import model_to_dict

    return {
        "model": model_to_dict(result.model),
        "rss": result.rss,
        "sigma2": result.sigma2,
        "n_starts_converged": result.n_starts_converged,
        "best_start_index": result.best_start_index,
        "underdetermined": result.underdetermined,
    }


def selected_fit_to_dict(sel: SelectedFit) -> dict:
    """Model document plus fit metadata (chosen M, RSS table, diagnostics)."""
    from .model import model_to_dict

    doc = model_to_dict(sel.chosen.model)
    doc["fit"] = {
        "chosen_m": sel.chosen_m,
        "rss": sel.chosen.rss,
        "sigma2": sel.chosen.sigma2,
        "n_starts_converged": sel.chosen.n_starts_converged,
        "best_start_index": sel.chosen.best_start_index,
        "per_m_rss": {str(m): result.rss for m, result in sorted(sel.per_m.items())},
        "failures": {str(m): msg for m, msg in sorted(sel.failures.items())},
    }
    return doc
