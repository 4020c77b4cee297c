"""Shared builders for randomized models used across test modules."""

import math

import numpy as np

from stochtaylor import ComponentParams, GeneralIntensity, RngStream, SteModel


def random_component(gen: np.random.Generator, d: int, sampleable: bool = True) -> ComponentParams:
    """A finite random component; sampleable keeps sum(rho^2) strictly below 1."""
    rho_raw = gen.uniform(-1.0, 1.0, d)
    norm = math.sqrt(float((rho_raw**2).sum()))
    if sampleable and norm > 0.0:
        rho_raw = rho_raw / max(1.0, 1.05 * norm)
    return ComponentParams(
        mu_a=float(gen.uniform(-2.0, 2.0)),
        sigma_a=float(gen.uniform(0.0, 0.8)),
        mu_n=tuple(gen.uniform(-1.0, 1.5, d)),
        sigma_n=tuple(gen.uniform(0.0, 0.5, d)),
        rho=tuple(rho_raw),
    )


def random_model(seed: int, d: int, m: int) -> SteModel:
    gen = RngStream(seed, 0).generator()
    comps = tuple(random_component(gen, d) for _ in range(m))
    return SteModel(
        d=d,
        components=comps,
        x0=tuple(gen.uniform(-0.5, 0.5, d)),
        sigma2=float(gen.uniform(0.0, 1.0)),
    )


def random_intensity(seed: int, d: int, m: int) -> GeneralIntensity:
    """Sampleable mixture with non-uniform weights and a non-integer rate."""
    gen = RngStream(seed, 0).generator()
    comps = tuple(random_component(gen, d) for _ in range(m))
    w = gen.uniform(0.2, 1.0, m)
    w = w / w.sum()
    weights = tuple(float(v) for v in w[:-1])
    weights = weights + (1.0 - math.fsum(weights),)
    return GeneralIntensity(
        lam=float(gen.uniform(0.5, 4.0)),
        weights=weights,
        components=comps,
        d=d,
        x0=(0.0,) * d,
    )
