"""Noise models, target densities and the supersmooth class A(alpha, r, L).

A density ``f`` belongs to ``A(alpha, r, L)`` when
``int |Phi^f(u)|^2 exp(2 alpha |u|^r) du <= 2 pi L``.  Noise models carry the
envelope constants ``b_min |u|^gamma e^{-beta|u|^s} <= |Phi^eps(u)| <=
b_max |u|^gamma' e^{-beta|u|^s}`` valid for ``|u| >= u0``, and optionally the
derivative envelope ``B |u|^gamma1 e^{-beta|u|^s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np

from .fourier_grid import (
    ContractError,
    DivergenceError,
    Grid,
    GriddedFunction,
    FREQUENCY,
    inverse_transform,
    quadrature,
)

__all__ = [
    "NoiseModel",
    "SmoothnessClass",
    "TargetDensity",
    "EnvelopeReport",
    "MembershipReport",
    "gaussian_noise",
    "stable_noise",
    "no_noise",
    "noise_from_spec",
    "cf_envelope_check",
    "class_membership",
    "sup_density_bound",
    "stable_density",
    "stable_tail_fit",
    "symmetric_stable_sample",
    "make_target",
    "target_from_spec",
]

CF = Callable[[np.ndarray], np.ndarray]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def symmetric_stable_sample(index: float, scale: float, count: int, seed) -> np.ndarray:
    """Chambers-Mallows-Stuck draws with characteristic function ``exp(-|scale u|^index)``."""
    if not 0 < index <= 2:
        raise ContractError(f"stable index must lie in (0, 2], got {index}")
    rng = _rng(seed)
    v = rng.uniform(-math.pi / 2, math.pi / 2, size=count)
    w = rng.exponential(1.0, size=count)
    if index == 1.0:
        x = np.tan(v)
    else:
        x = (
            np.sin(index * v)
            / np.cos(v) ** (1.0 / index)
            * (np.cos((1.0 - index) * v) / w) ** ((1.0 - index) / index)
        )
    return scale * x


@dataclass(frozen=True)
class SmoothnessClass:
    alpha: float
    r: float
    L: float

    def __post_init__(self):
        for name in ("alpha", "r", "L"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ContractError(f"class.{name} must be a positive finite number, got {value!r}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "r": self.r, "L": self.L}


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: str
    params: dict
    cf: CF
    sampler: Callable[[int, Any], np.ndarray]
    beta: float
    s: float
    gamma: float = 0.0
    gamma_prime: float = 0.0
    b_min: float = 1.0
    b_max: float = 1.0
    u0: float = 1.0
    nd_B: Optional[float] = None
    nd_gamma1: Optional[float] = None
    log_abs_cf: Optional[CF] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind != "none" and not self.beta > 0:
            raise ContractError(f"noise beta must be positive, got {self.beta}")
        if not 0 < self.s <= 2:
            raise ContractError(f"noise exponent s must lie in (0, 2], got {self.s}")
        if not (self.b_min > 0 and self.b_max > 0 and self.u0 > 0):
            raise ContractError("b_min, b_max and u0 must be positive")

    def log_modulus(self, u) -> np.ndarray:
        """``log |Phi^eps(u)|`` without underflow for the built-in models."""
        u = np.asarray(u, dtype=float)
        if self.log_abs_cf is not None:
            return np.asarray(self.log_abs_cf(u), dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.cf(u)))

    def sample(self, count: int, seed) -> np.ndarray:
        return self.sampler(count, seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def gaussian_noise(sigma: float) -> NoiseModel:
    if not sigma > 0:
        raise ContractError(f"noise.sigma must be positive, got {sigma}")
    beta = sigma**2 / 2.0
    return NoiseModel(
        kind="gaussian",
        params={"sigma": sigma},
        cf=lambda u: np.exp(-beta * np.asarray(u, dtype=float) ** 2) + 0j,
        sampler=lambda count, seed: _rng(seed).normal(0.0, sigma, size=count),
        beta=beta,
        s=2.0,
        log_abs_cf=lambda u: -beta * np.asarray(u, dtype=float) ** 2,
    )


def stable_noise(s: float, c: float = 1.0) -> NoiseModel:
    """Symmetric stable noise with ``Phi^eps(u) = exp(-|c u|^s)``; ``s = 1`` is Cauchy."""
    if not 0 < s <= 2:
        raise ContractError(f"noise.s must lie in (0, 2], got {s}")
    if not c > 0:
        raise ContractError(f"noise.c must be positive, got {c}")
    return NoiseModel(
        kind="stable",
        params={"s": s, "c": c},
        cf=lambda u: np.exp(-np.abs(c * np.asarray(u, dtype=float)) ** s) + 0j,
        sampler=lambda count, seed: symmetric_stable_sample(s, c, count, seed),
        beta=c**s,
        s=s,
        log_abs_cf=lambda u: -np.abs(c * np.asarray(u, dtype=float)) ** s,
    )


def no_noise() -> NoiseModel:
    """Degenerate ``Phi^eps = 1``; the estimator becomes the sinc-kernel estimator."""
    return NoiseModel(
        kind="none",
        params={},
        cf=lambda u: np.ones_like(np.asarray(u, dtype=float)) + 0j,
        sampler=lambda count, seed: np.zeros(count),
        beta=0.0,
        s=2.0,
        log_abs_cf=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
    )


def noise_from_spec(spec: dict) -> NoiseModel:
    kind = spec.get("kind")
    if kind == "gaussian":
        model = gaussian_noise(float(spec["sigma"]))
    elif kind == "stable":
        model = stable_noise(float(spec["s"]), float(spec.get("c", 1.0)))
    elif kind == "cauchy":
        model = stable_noise(1.0, float(spec.get("scale", 1.0)))
    elif kind == "none":
        model = no_noise()
    else:
        raise ContractError(f"noise.kind: unknown noise kind {kind!r}")
    extra = {k: spec[k] for k in ("nd_B", "nd_gamma1", "u0") if k in spec}
    if extra:
        model = replace(model, **extra)
    return model


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    worst_ratio: float
    worst_u: float
    nd_checked: bool
    nd_worst_ratio: float = math.nan


def cf_envelope_check(m: NoiseModel, u_lo: float, u_hi: float, n_test: int = 200) -> EnvelopeReport:
    """Check the two-sided envelope (and the derivative envelope when set) at log-spaced points.

    ``worst_ratio`` is the largest of ``lower/|Phi|`` and ``|Phi|/upper``; it
    is 1 when an envelope is attained and exceeds 1 on violation.
    """
    if u_lo < m.u0:
        raise ContractError(f"u_lo={u_lo} lies below the envelope threshold u0={m.u0}")
    if not u_hi > u_lo:
        raise ContractError("need u_hi > u_lo")
    u = np.geomspace(u_lo, u_hi, n_test)
    log_mod = m.log_modulus(u)
    if np.any(~np.isfinite(log_mod)):
        bad = u[~np.isfinite(log_mod)][0]
        raise ContractError(f"Phi^eps vanishes at u={bad}; the kernel is undefined there")
    decay = -m.beta * u**m.s
    log_lower = math.log(m.b_min) + m.gamma * np.log(u) + decay
    log_upper = math.log(m.b_max) + m.gamma_prime * np.log(u) + decay
    excess = np.maximum(log_lower - log_mod, log_mod - log_upper)
    i = int(np.argmax(excess))
    worst = math.exp(excess[i])
    passed = bool(excess[i] <= 1e-12)

    nd_checked = m.nd_B is not None and m.nd_gamma1 is not None
    nd_worst = math.nan
    if nd_checked:
        step = 1e-4 * u
        plus, mid, minus = m.cf(u + step), m.cf(u), m.cf(u - step)
        d1 = np.abs((plus - minus) / (2 * step))
        d2 = np.abs((plus - 2 * mid + minus) / step**2)
        env = m.nd_B * u**m.nd_gamma1 * np.exp(decay)
        nd_ratio = np.maximum(d1, d2) / env
        nd_worst = float(np.max(nd_ratio))
        passed = passed and nd_worst <= 1.0
    return EnvelopeReport(passed, worst, float(u[i]), nd_checked, nd_worst)


@dataclass(frozen=True)
class MembershipReport:
    integral: float
    bound: float
    passed: bool
    diagnostic: str = ""


def class_membership(cf: CF, cls: SmoothnessClass, tol: float = 1e-9, points=()) -> MembershipReport:
    """Weighted spectral energy ``int |Phi|^2 exp(2 alpha |u|^r) du`` against ``2 pi L``.

    The cf is assumed to have even modulus (true for any real density), so
    the integral is twice the half-line value.
    """
    bound = 2.0 * math.pi * cls.L

    def integrand(u):
        with np.errstate(divide="ignore"):
            log_mod = np.log(np.abs(cf(u)))
        return np.exp(2.0 * log_mod + 2.0 * cls.alpha * np.abs(u) ** cls.r)

    try:
        integral = 2.0 * quadrature(integrand, 0.0, math.inf, tol=1e-12, points=points)
    except DivergenceError as exc:
        return MembershipReport(math.inf, bound, False, f"weighted energy diverges: {exc}")
    return MembershipReport(integral, bound, integral <= bound * (1.0 + tol))


def sup_density_bound(cls: SmoothnessClass) -> float:
    """Uniform bound ``L + C(r, alpha)/pi`` on every density of the class."""
    c = quadrature(lambda u: np.exp(-2.0 * cls.alpha * u**cls.r), 0.0, math.inf, tol=1e-13)
    return cls.L + c / math.pi


def stable_density(r: float, x: float, grid: Optional[Grid] = None) -> float:
    """Density at ``x`` of the symmetric stable law with cf ``exp(-|t|^r)``.

    Evaluated as the inversion integral ``(1/pi) int_0^inf cos(t x) e^{-t^r} dt``.
    ``grid`` bounds the admissible ``|x|``.
    """
    if not 0 < r <= 2:
        raise ContractError(f"stable index must lie in (0, 2], got {r}")
    if grid is not None and abs(x) > grid.x_max:
        raise ContractError(f"|x|={abs(x)} lies beyond the grid half-width {grid.x_max}; use a larger grid")
    x = abs(float(x))
    width = min(1.0, math.pi / x) if x > 0 else 1.0
    value = quadrature(
        lambda t: np.cos(t * x) * np.exp(-(t**r)),
        0.0,
        math.inf,
        tol=1e-14,
        max_panels=200_000,
        first_width=width,
    )
    return max(value / math.pi, 0.0)


def stable_tail_fit(r: float, xs) -> tuple[float, float]:
    """Log-log regression of the stable density over ``xs``: returns (slope, c1).

    ``c1`` is the largest constant with ``p(x) >= c1 x^{-r-1}`` on ``xs``.
    """
    xs = np.asarray(xs, dtype=float)
    p = np.array([stable_density(r, x) for x in xs])
    slope = float(np.polyfit(np.log(xs), np.log(p), 1)[0])
    c1 = float(np.min(p * xs ** (r + 1)))
    return slope, c1


@dataclass(frozen=True, eq=False)
class TargetDensity:
    kind: str
    params: dict
    cf: CF
    density: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[int, Any], np.ndarray]
    declared_class: SmoothnessClass
    membership: MembershipReport

    def sample(self, count: int, seed) -> np.ndarray:
        return self.sampler(count, seed)

    def grid_density(self, grid: Grid) -> GriddedFunction:
        """Density on ``grid`` obtained by inverting the sampled cf."""
        return inverse_transform(GriddedFunction(grid, self.cf(grid.u), FREQUENCY))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def _target_parts(kind: str, params: dict):
    if kind == "cauchy":
        scale = float(params.get("scale", 1.0))
        if not scale > 0:
            raise ContractError("target.scale must be positive")
        return (
            {"scale": scale},
            lambda u: np.exp(-scale * np.abs(np.asarray(u, dtype=float))) + 0j,
            lambda x: scale / (math.pi * (scale**2 + np.asarray(x, dtype=float) ** 2)),
            lambda count, seed: symmetric_stable_sample(1.0, scale, count, seed),
        )
    if kind == "gaussian":
        sigma = float(params.get("sigma", 1.0))
        if not sigma > 0:
            raise ContractError("target.sigma must be positive")
        return (
            {"sigma": sigma},
            lambda u: np.exp(-0.5 * sigma**2 * np.asarray(u, dtype=float) ** 2) + 0j,
            lambda x: np.exp(-0.5 * (np.asarray(x, dtype=float) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi)),
            lambda count, seed: _rng(seed).normal(0.0, sigma, size=count),
        )
    if kind == "stable":
        index = float(params["r"])
        c0 = float(params.get("c0", 1.0))
        if not 0 < index <= 2:
            raise ContractError("target.r must lie in (0, 2]")
        if not c0 > 0:
            raise ContractError("target.c0 must be positive")

        def density(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.array([stable_density(index, xi / c0) / c0 for xi in x])

        return (
            {"r": index, "c0": c0},
            lambda u: np.exp(-np.abs(c0 * np.asarray(u, dtype=float)) ** index) + 0j,
            density,
            lambda count, seed: symmetric_stable_sample(index, c0, count, seed),
        )
    raise ContractError(f"target.kind: unknown target kind {kind!r}")


def make_target(kind: str, cls: SmoothnessClass, **params) -> TargetDensity:
    """Bundle cf, density and sampler; reject targets outside ``cls``."""
    clean, cf, density, sampler = _target_parts(kind, params)
    report = class_membership(cf, cls)
    if not report.passed:
        raise ContractError(
            f"{kind} target is not in A({cls.alpha}, {cls.r}, {cls.L}): "
            f"weighted energy {report.integral:.6g} exceeds 2*pi*L = {report.bound:.6g}"
            + (f" ({report.diagnostic})" if report.diagnostic else "")
        )
    return TargetDensity(kind, clean, cf, density, sampler, cls, report)


def target_from_spec(spec: dict, cls: SmoothnessClass) -> TargetDensity:
    params = {k: v for k, v in spec.items() if k != "kind"}
    return make_target(spec.get("kind"), cls, **params)
