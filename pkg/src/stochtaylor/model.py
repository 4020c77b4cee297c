"""Mixture model types and closed-form evaluation of the mean surface.

The estimator is driven by a Poisson point process whose events are pairs
(a, n) of a coefficient and a d-vector of real powers. Component m of the
mixture draws (a, n) jointly normal with means (mu_a, mu_n), standard
deviations (sigma_a, sigma_n), correlations rho between a and each n_r, and
independent power coordinates. The expected value of the random sum
``sum_j a_j * prod_r (x_r - x0_r)**n_{r,j}`` is available in closed form:
each component contributes

    (mu_a + sigma_a * sum_r rho_r sigma_n_r ln d_r)
        * prod_r d_r ** (mu_n_r + (sigma_n_r**2 / 2) * ln d_r)

with d_r = x_r - x0_r > 0. :func:`evaluate` sums the components of an
:class:`SteModel` (total rate M, uniform weights); :func:`evaluate_general`
scales component m by ``lam * weights[m]`` instead.

Evaluation points are plain float sequences; the strict requirement
x[r] > x0[r] is enforced at every call. Values whose magnitude would exceed
the largest finite double raise :class:`~stochtaylor.errors.NumericRangeError`
(overflow is detected in log-magnitude form internally); the remedy is to
work in rescaled units, recorded in ``SteModel.rescale``.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericRangeError

__all__ = [
    "ComponentParams",
    "SteModel",
    "GeneralIntensity",
    "power_moment",
    "centered_power_moment",
    "eval_component",
    "evaluate",
    "evaluate_general",
    "from_taylor_polynomial",
    "predict_grid",
    "predict_original_units",
    "model_to_dict",
    "model_from_dict",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

# log of the largest finite double; exponents beyond this overflow.
_LOG_MAX = math.log(sys.float_info.max)


def _as_float_tuple(values, name: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} must be a sequence of reals") from exc
    if not all(math.isfinite(v) for v in out):
        raise DomainError(f"{name} must be finite, got {out}")
    return out


def _as_finite_float(value, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"{name} must be a real number") from exc
    if not math.isfinite(out):
        raise DomainError(f"{name} must be finite, got {out}")
    return out


@dataclass(frozen=True)
class ComponentParams:
    """Moments of one mixture component.

    ``mu_a``/``sigma_a`` are the mean and standard deviation of the
    coefficient; ``mu_n``/``sigma_n`` those of the d power coordinates;
    ``rho[r]`` is the correlation between the coefficient and power r.
    Power coordinates are mutually independent.
    """

    mu_a: float
    sigma_a: float
    mu_n: tuple[float, ...]
    sigma_n: tuple[float, ...]
    rho: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu_a", _as_finite_float(self.mu_a, "mu_a"))
        object.__setattr__(self, "sigma_a", _as_finite_float(self.sigma_a, "sigma_a"))
        object.__setattr__(self, "mu_n", _as_float_tuple(self.mu_n, "mu_n"))
        object.__setattr__(self, "sigma_n", _as_float_tuple(self.sigma_n, "sigma_n"))
        object.__setattr__(self, "rho", _as_float_tuple(self.rho, "rho"))
        d = len(self.mu_n)
        if d < 1:
            raise DomainError("mu_n must have at least one entry")
        if len(self.sigma_n) != d or len(self.rho) != d:
            raise DomainError(
                f"mu_n, sigma_n, rho must share length, got {d}, "
                f"{len(self.sigma_n)}, {len(self.rho)}"
            )
        if self.sigma_a < 0.0:
            raise DomainError(f"sigma_a must be >= 0, got {self.sigma_a}")
        if any(s < 0.0 for s in self.sigma_n):
            raise DomainError(f"sigma_n entries must be >= 0, got {self.sigma_n}")
        if any(abs(r) > 1.0 for r in self.rho):
            raise DomainError(f"rho entries must lie in [-1, 1], got {self.rho}")

    @property
    def d(self) -> int:
        return len(self.mu_n)

    def sort_key(self) -> tuple:
        """Canonical component order: by mu_a, ties by lexicographic mu_n."""
        return (self.mu_a,) + self.mu_n


def _sorted_components(components, d: int) -> tuple[ComponentParams, ...]:
    comps = tuple(components)
    if not comps:
        raise DomainError("at least one component is required")
    for i, c in enumerate(comps):
        if not isinstance(c, ComponentParams):
            raise DomainError(f"component {i} is not a ComponentParams")
        if c.d != d:
            raise DomainError(f"component {i} has dimension {c.d}, expected {d}")
    return tuple(sorted(comps, key=ComponentParams.sort_key))


@dataclass(frozen=True)
class SteModel:
    """Fitted mixture model: unit-rate process with one event class per component.

    Components are stored in canonical order (increasing ``mu_a``, ties by
    lexicographic ``mu_n``), which fixes the summation order of
    :func:`evaluate` and makes equal models compare equal. ``sigma2`` is the
    residual variance attached by fitting. ``rescale`` holds the d+1 positive
    divisors that map original data units to the units the model was fitted
    in (inputs first, output last); it is bookkeeping for prediction and does
    not affect :func:`evaluate`.
    """

    d: int
    components: tuple[ComponentParams, ...]
    x0: tuple[float, ...]
    sigma2: float = 0.0
    rescale: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "components", _sorted_components(self.components, self.d))
        object.__setattr__(self, "x0", _as_float_tuple(self.x0, "x0"))
        if len(self.x0) != self.d:
            raise DomainError(f"x0 must have length d={self.d}, got {len(self.x0)}")
        object.__setattr__(self, "sigma2", _as_finite_float(self.sigma2, "sigma2"))
        if self.sigma2 < 0.0:
            raise DomainError(f"sigma2 must be >= 0, got {self.sigma2}")
        rescale = self.rescale
        if rescale is None:
            rescale = (1.0,) * (self.d + 1)
        object.__setattr__(self, "rescale", _as_float_tuple(rescale, "rescale"))
        if len(self.rescale) != self.d + 1:
            raise DomainError(
                f"rescale must have length d+1={self.d + 1}, got {len(self.rescale)}"
            )
        if any(c <= 0.0 for c in self.rescale):
            raise DomainError(f"rescale factors must be positive, got {self.rescale}")

    @property
    def m(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class GeneralIntensity:
    """Mixture intensity with total rate ``lam`` and component weights.

    The expected event count is ``lam``; an event belongs to component m
    with probability ``weights[m]``. Components keep the order given here
    (weights are positional), so build from a model via :meth:`from_model`
    when the canonical order matters.
    """

    lam: float
    weights: tuple[float, ...]
    components: tuple[ComponentParams, ...]
    d: int
    x0: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", _as_finite_float(self.lam, "lam"))
        if self.lam <= 0.0:
            raise DomainError(f"lam must be > 0, got {self.lam}")
        object.__setattr__(self, "weights", _as_float_tuple(self.weights, "weights"))
        if not isinstance(self.d, int) or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        comps = tuple(self.components)
        if not comps:
            raise DomainError("at least one component is required")
        for i, c in enumerate(comps):
            if not isinstance(c, ComponentParams) or c.d != self.d:
                raise DomainError(f"component {i} must be ComponentParams of dimension {self.d}")
        object.__setattr__(self, "components", comps)
        if len(self.weights) != len(comps):
            raise DomainError(
                f"need one weight per component, got {len(self.weights)} "
                f"weights for {len(comps)} components"
            )
        if any(w < 0.0 for w in self.weights):
            raise DomainError(f"weights must be >= 0, got {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1 within 1e-12, got sum {math.fsum(self.weights)}")
        object.__setattr__(self, "x0", _as_float_tuple(self.x0, "x0"))
        if len(self.x0) != self.d:
            raise DomainError(f"x0 must have length d={self.d}, got {len(self.x0)}")

    @classmethod
    def from_model(cls, model: SteModel) -> "GeneralIntensity":
        """Rate-M, uniform-weight intensity of a model.

        ``evaluate_general`` on the result reproduces ``evaluate(model, .)``
        bit for bit whenever ``M * (1.0 / M) == 1.0`` in floating point
        (true for all M < 49 and most others).
        """
        m = model.m
        return cls(
            lam=float(m),
            weights=(1.0 / m,) * m,
            components=model.components,
            d=model.d,
            x0=model.x0,
        )

    @property
    def m(self) -> int:
        return len(self.components)


def power_moment(delta: float, mu: float, sigma: float) -> float:
    """E[delta**n] for n ~ Normal(mu, sigma**2), i.e. delta**(mu + sigma^2/2 * ln delta).

    Requires delta > 0 and sigma >= 0. Always positive.
    """
    delta = _as_finite_float(delta, "delta")
    mu = _as_finite_float(mu, "mu")
    sigma = _as_finite_float(sigma, "sigma")
    if delta <= 0.0:
        raise DomainError(f"delta must be > 0, got {delta}")
    if sigma < 0.0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    log_delta = math.log(delta)
    exponent = mu + 0.5 * sigma * sigma * log_delta
    try:
        return delta**exponent
    except OverflowError:
        raise NumericRangeError(
            f"delta**{exponent} exceeds the largest finite double; "
            "rescale inputs to smaller units"
        ) from None


def centered_power_moment(delta: float, mu: float, sigma: float) -> float:
    """E[(n - mu) * delta**n] for n ~ Normal(mu, sigma**2).

    Equals (sigma**2 * ln delta) * power_moment(delta, mu, sigma).
    """
    pm = power_moment(delta, mu, sigma)
    sigma = float(sigma)
    out = (sigma * sigma * math.log(float(delta))) * pm
    if math.isinf(out):
        raise NumericRangeError(
            "centered power moment exceeds the largest finite double; "
            "rescale inputs to smaller units"
        )
    return out


def _check_point(x, x0: Sequence[float], d: int) -> tuple[list[float], list[float]]:
    """Validate x > x0 strictly; return (delta, log_delta) lists."""
    xs = [float(v) for v in x]
    if len(xs) != d:
        raise DomainError(f"point has {len(xs)} coordinates, expected {d}")
    delta = []
    log_delta = []
    for r in range(d):
        if not math.isfinite(xs[r]):
            raise DomainError(f"coordinate {r} is not finite: {xs[r]}")
        dr = xs[r] - x0[r]
        if dr <= 0.0:
            raise DomainError(
                f"coordinate {r}: x={xs[r]} must lie strictly above the origin {x0[r]}"
            )
        delta.append(dr)
        log_delta.append(math.log(dr))
    return delta, log_delta


def _component_value(comp: ComponentParams, delta: list[float], log_delta: list[float]) -> float:
    """One component's contribution at the point with offsets ``delta``.

    Normal path multiplies per-coordinate powers directly (keeping exact
    cases exact); on intermediate overflow it falls back to the
    log-magnitude + sign form and errors only if the final magnitude
    genuinely exceeds double range.
    """
    corr = 0.0
    for r in range(comp.d):
        corr += comp.rho[r] * comp.sigma_n[r] * log_delta[r]
    coeff = comp.mu_a + comp.sigma_a * corr

    prod = 1.0
    log_prod = 0.0
    overflowed = False
    for r in range(comp.d):
        sn = comp.sigma_n[r]
        exponent = comp.mu_n[r] + 0.5 * sn * sn * log_delta[r]
        log_prod += exponent * log_delta[r]
        if not overflowed:
            try:
                factor = delta[r] ** exponent
            except OverflowError:
                overflowed = True
            else:
                prod *= factor
                if math.isinf(prod):
                    overflowed = True

    if not overflowed:
        value = coeff * prod
        if not math.isinf(value):
            return value

    if coeff == 0.0:
        return 0.0
    log_mag = math.log(abs(coeff)) + log_prod
    if not (log_mag <= _LOG_MAX):  # catches +inf and nan
        raise NumericRangeError(
            f"component value magnitude exp({log_mag:.6g}) exceeds the largest "
            "finite double; rescale inputs/outputs to smaller units"
        )
    return math.copysign(math.exp(log_mag), coeff)


def eval_component(comp: ComponentParams, x, x0) -> float:
    """Closed-form contribution of one component at x (strictly above x0)."""
    x0_t = _as_float_tuple(x0, "x0")
    if len(x0_t) != comp.d:
        raise DomainError(f"x0 must have length {comp.d}, got {len(x0_t)}")
    delta, log_delta = _check_point(x, x0_t, comp.d)
    return _component_value(comp, delta, log_delta)


def evaluate(model: SteModel, x) -> float:
    """Mean of the random sum at x: components summed in canonical order.

    Raises DomainError unless x[r] > x0[r] for every r, and
    NumericRangeError if any term or the total leaves double range.
    """
    delta, log_delta = _check_point(x, model.x0, model.d)
    total = 0.0
    for comp in model.components:
        total += _component_value(comp, delta, log_delta)
    if not math.isfinite(total):
        raise NumericRangeError(
            "model value exceeds the largest finite double; "
            "rescale inputs/outputs to smaller units"
        )
    return total


def evaluate_general(g: GeneralIntensity, x) -> float:
    """Mean under an arbitrary rate and weights: sum of lam*w_m*component_m.

    With ``lam = M`` and uniform weights this reduces to :func:`evaluate`
    on the corresponding model (bit for bit when ``M*(1/M) == 1.0``).
    """
    delta, log_delta = _check_point(x, g.x0, g.d)
    total = 0.0
    for weight, comp in zip(g.weights, g.components):
        scale = g.lam * weight
        total += scale * _component_value(comp, delta, log_delta)
    if not math.isfinite(total):
        raise NumericRangeError(
            "intensity mean exceeds the largest finite double; "
            "rescale inputs/outputs to smaller units"
        )
    return total


def from_taylor_polynomial(coeffs, x0: float) -> SteModel:
    """Degenerate model evaluating the polynomial sum_m coeffs[m]*(x-x0)**m.

    One component per coefficient with mu_a = coeffs[m], mu_n = m and all
    randomness switched off (sigma_a = sigma_n = rho = 0); d = 1.
    """
    coeffs_t = _as_float_tuple(coeffs, "coeffs")
    if not coeffs_t:
        raise DomainError("coeffs must be nonempty")
    x0_f = _as_finite_float(x0, "x0")
    comps = [
        ComponentParams(mu_a=a, sigma_a=0.0, mu_n=(float(m),), sigma_n=(0.0,), rho=(0.0,))
        for m, a in enumerate(coeffs_t)
    ]
    return SteModel(d=1, components=tuple(comps), x0=(x0_f,), sigma2=0.0)


def predict_grid(model: SteModel, grid) -> np.ndarray:
    """Elementwise :func:`evaluate` over an ordered collection of points.

    ``grid`` is an (N, d) array-like (or length-N sequence of points for
    d = 1). Domain errors name the first offending point.
    """
    pts = np.asarray(grid, dtype=float)
    if pts.size == 0:
        return np.empty(0, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != model.d:
        raise DomainError(f"grid must be (N, {model.d}), got shape {pts.shape}")
    out = np.empty(pts.shape[0], dtype=float)
    for i in range(pts.shape[0]):
        try:
            out[i] = evaluate(model, pts[i])
        except DomainError as exc:
            raise DomainError(f"grid point {i}: {exc}") from None
    return out


def predict_original_units(model: SteModel, points) -> np.ndarray:
    """Predictions for points given in original (pre-rescale) units.

    Inputs are divided by ``rescale[:d]`` before evaluation and the values
    multiplied by ``rescale[d]`` after, so callers never hand-scale.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or (pts.size and pts.shape[1] != model.d):
        raise DomainError(f"points must be (N, {model.d}), got shape {pts.shape}")
    scale_in = np.asarray(model.rescale[: model.d], dtype=float)
    scaled = pts / scale_in
    return predict_grid(model, scaled) * model.rescale[model.d]


# ---------------------------------------------------------------------------
# Serialization: versioned JSON with shortest-round-trip float encoding.
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def model_to_dict(model: SteModel) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "d": model.d,
        "x0": list(model.x0),
        "sigma2": model.sigma2,
        "rescale": list(model.rescale),
        "components": [
            {
                "mu_a": c.mu_a,
                "sigma_a": c.sigma_a,
                "mu_n": list(c.mu_n),
                "sigma_n": list(c.sigma_n),
                "rho": list(c.rho),
            }
            for c in model.components
        ],
    }


def model_from_dict(doc: dict) -> SteModel:
    if not isinstance(doc, dict):
        raise DomainError("model document must be a JSON object")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise DomainError(f"unsupported model schema version: {version!r}")
    try:
        comps = tuple(
            ComponentParams(
                mu_a=c["mu_a"],
                sigma_a=c["sigma_a"],
                mu_n=tuple(c["mu_n"]),
                sigma_n=tuple(c["sigma_n"]),
                rho=tuple(c["rho"]),
            )
            for c in doc["components"]
        )
        return SteModel(
            d=int(doc["d"]),
            components=comps,
            x0=tuple(doc["x0"]),
            sigma2=float(doc["sigma2"]),
            rescale=tuple(doc["rescale"]),
        )
    except KeyError as exc:
        raise DomainError(f"model document is missing field {exc.args[0]!r}") from None


def model_to_json(model: SteModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def model_from_json(text: str) -> SteModel:
    return model_from_dict(json.loads(text))


def atomic_write_text(path: str, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def save_model(model: SteModel, path: str) -> None:
    atomic_write_text(path, model_to_json(model))


def load_model(path: str) -> SteModel:
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_json(handle.read())
