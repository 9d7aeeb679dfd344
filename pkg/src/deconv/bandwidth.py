"""Bandwidth equations and the sharp rates they induce.

``h*`` solves ``2 beta / h^s + 2 alpha / h^r = log n - (log log n)^2`` and
``h+`` the same equation with ``+ (log log n)^2``.  Both are found by
bisection in ``y = 1/h`` where the left-hand side is strictly increasing.
The adaptive bandwidths use the noise parameters only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .fourier_grid import ContractError
from .models import NoiseModel, SmoothnessClass

__all__ = [
    "Equation",
    "Bandwidth",
    "RateValue",
    "BandwidthError",
    "solve_hstar",
    "solve_hplus",
    "adaptive_bandwidth",
    "adaptive_bandwidth_critical",
    "critical_inflation",
    "rates",
    "rates_at",
    "bandwidth_asymptotics_check",
]

MAX_BISECTIONS = 200


class BandwidthError(ContractError):
    pass


class Equation(str, enum.Enum):
    HSTAR = "HSTAR"
    HPLUS = "HPLUS"
    ADAPTIVE = "ADAPTIVE"
    ADAPTIVE_CRITICAL = "ADAPTIVE_CRITICAL"
    FIXED = "FIXED"


@dataclass(frozen=True)
class Bandwidth:
    h: float
    equation: Equation
    residual: float
    n: int

    def to_dict(self) -> dict:
        return {"h": self.h, "equation": self.equation.value, "residual": self.residual, "n": self.n}


def _lhs(y: float, cls: SmoothnessClass, noise: NoiseModel) -> float:
    return 2.0 * noise.beta * y**noise.s + 2.0 * cls.alpha * y**cls.r


def _check_regime(cls: SmoothnessClass, noise: NoiseModel) -> None:
    if not cls.r < noise.s:
        raise BandwidthError(f"need r < s (dominating bias), got r={cls.r}, s={noise.s}")
    if not noise.beta > 0:
        raise BandwidthError("bandwidth equations need beta > 0")


def _solve(cls: SmoothnessClass, noise: NoiseModel, n: int, rhs: float, equation: Equation) -> Bandwidth:
    lo = 1.0
    hi = max(math.log(n), 10.0) * (1.0 / (2.0 * noise.beta)) ** (1.0 / noise.s) * 4.0
    if _lhs(lo, cls, noise) >= rhs:
        raise BandwidthError(
            f"n={n} too small: {equation.value} has no root with h < 1 "
            f"(left side at h=1 is {_lhs(lo, cls, noise):.6g} >= {rhs:.6g})"
        )
    while _lhs(hi, cls, noise) < rhs:
        hi *= 2.0
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _lhs(mid, cls, noise) < rhs:
            lo = mid
        else:
            hi = mid
    # residual signs differ across the final bracket, so the root is unique inside it
    f_lo, f_hi = _lhs(lo, cls, noise) - rhs, _lhs(hi, cls, noise) - rhs
    y = lo if abs(f_lo) <= abs(f_hi) else hi
    return Bandwidth(1.0 / y, equation, _lhs(y, cls, noise) - rhs, int(n))


def solve_hstar(cls: SmoothnessClass, noise: NoiseModel, n: int) -> Bandwidth:
    _check_regime(cls, noise)
    if n < 3:
        raise BandwidthError(f"n too small: need n >= 3, got {n}")
    log_n = math.log(n)
    rhs = log_n - math.log(log_n) ** 2
    if rhs <= 0:
        raise BandwidthError(f"n too small: log n - (log log n)^2 = {rhs:.4g} <= 0")
    return _solve(cls, noise, n, rhs, Equation.HSTAR)


def solve_hplus(cls: SmoothnessClass, noise: NoiseModel, n: int) -> Bandwidth:
    _check_regime(cls, noise)
    if n < 3:
        raise BandwidthError(f"n too small: need n >= 3, got {n}")
    log_n = math.log(n)
    return _solve(cls, noise, n, log_n + math.log(log_n) ** 2, Equation.HPLUS)


def adaptive_bandwidth(noise: NoiseModel, n: int) -> Bandwidth:
    """``(log n/(2 beta) - sqrt(log n/(2 beta)))^{-1/s}``; free of (alpha, r, L)."""
    if not noise.beta > 0:
        raise BandwidthError("adaptive bandwidth needs beta > 0")
    t = math.log(n) / (2.0 * noise.beta) if n > 1 else 0.0
    if not t > 1.0:
        raise BandwidthError(f"n too small for adaptation: log n/(2 beta) = {t:.4g} <= 1")
    return Bandwidth((t - math.sqrt(t)) ** (-1.0 / noise.s), Equation.ADAPTIVE, 0.0, int(n))


def adaptive_bandwidth_critical(noise: NoiseModel, n: int, A: float, alpha0: float) -> Bandwidth:
    """Adaptive bandwidth for the boundary case ``r = s/2`` with ``alpha <= alpha0 < A``."""
    if not alpha0 > 0:
        raise BandwidthError(f"alpha0 must be positive, got {alpha0}")
    if not A > alpha0:
        raise BandwidthError(f"need A > alpha0, got A={A}, alpha0={alpha0}")
    t = math.log(n) / (2.0 * noise.beta) if n > 1 else 0.0
    if not t > (A / noise.beta) ** 2:
        raise BandwidthError(
            f"n too small: log n/(2 beta) = {t:.4g} must exceed (A/beta)^2 = {(A / noise.beta) ** 2:.4g}"
        )
    base = t - (A / noise.beta) * math.sqrt(t)
    return Bandwidth(base ** (-1.0 / noise.s), Equation.ADAPTIVE_CRITICAL, 0.0, int(n))


def critical_inflation(alpha: float, A: float, beta: float) -> float:
    """Risk inflation ``exp(alpha A/beta - alpha^2/beta)`` of the boundary-case adaptive rule."""
    return math.exp(alpha * A / beta - alpha**2 / beta)


@dataclass(frozen=True)
class RateValue:
    pointwise: float
    l2: float
    h_used: Bandwidth
    pointwise_closed_form: Optional[float] = None
    l2_closed_form: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"pointwise": self.pointwise, "l2": self.l2, "h_used": self.h_used.to_dict()}
        if self.l2_closed_form is not None:
            out["pointwise_closed_form"] = self.pointwise_closed_form
            out["l2_closed_form"] = self.l2_closed_form
        return out


def rates_at(cls: SmoothnessClass, h: float) -> tuple[float, float]:
    """(pointwise, l2) rate expressions evaluated at an arbitrary bandwidth."""
    bias_exp = math.exp(-2.0 * cls.alpha / h**cls.r)
    l2 = cls.L * bias_exp
    pointwise = cls.L / (2.0 * math.pi * cls.alpha * cls.r) * h ** (cls.r - 1.0) * bias_exp
    return pointwise, l2


def rates(cls: SmoothnessClass, noise: NoiseModel, n: int) -> RateValue:
    h = solve_hstar(cls, noise, n)
    pointwise, l2 = rates_at(cls, h.h)
    pw_cf = l2_cf = None
    ratio = cls.r / noise.s
    if ratio <= 0.5 + 1e-12:
        t = math.log(n) / (2.0 * noise.beta)
        prefactor = cls.L / (2.0 * math.pi * cls.alpha * cls.r) * t ** ((1.0 - cls.r) / noise.s)
        if abs(ratio - 0.5) <= 1e-12:
            exponent = -2.0 * cls.alpha * math.sqrt(t) + cls.alpha**2 / noise.beta
        else:
            exponent = -2.0 * cls.alpha * t**ratio
        pw_cf = prefactor * math.exp(exponent)
        l2_cf = cls.L * math.exp(exponent)
    return RateValue(pointwise, l2, h, pw_cf, l2_cf)


@dataclass(frozen=True)
class AsymptoticsRow:
    n: int
    h_star: float
    h_plus: float
    hstar_scaled: float  # h* (log n / 2 beta)^{1/s}, tends to 1
    hplus_scaled: float
    bias_ratio_a0: float  # h+ vs h* bias exponents with a = 0, tends to 1
    bias_ratio_ar: float  # same with a = r - 1
    variance_over_bias: float  # (h*^a / n) e^{2 beta/h*^s} / e^{-2 alpha/h*^r}, a = 0; tends to 0


def bandwidth_asymptotics_check(cls: SmoothnessClass, noise: NoiseModel, n_sweep: Sequence[int]) -> dict:
    """Track the limit relations between h*, h+ and the bias/variance exponents along ``n_sweep``."""
    rows = []
    for n in n_sweep:
        hs = solve_hstar(cls, noise, n).h
        hp = solve_hplus(cls, noise, n).h
        scale = (math.log(n) / (2.0 * noise.beta)) ** (1.0 / noise.s)
        log_bias_s = -2.0 * cls.alpha / hs**cls.r
        log_bias_p = -2.0 * cls.alpha / hp**cls.r
        a = cls.r - 1.0
        rows.append(
            AsymptoticsRow(
                n=int(n),
                h_star=hs,
                h_plus=hp,
                hstar_scaled=hs * scale,
                hplus_scaled=hp * scale,
                bias_ratio_a0=math.exp(log_bias_p - log_bias_s),
                bias_ratio_ar=(hp / hs) ** a * math.exp(log_bias_p - log_bias_s),
                variance_over_bias=math.exp(2.0 * noise.beta / hs**noise.s - math.log(n) - log_bias_s),
            )
        )

    def trend(values):
        diffs = [b - a for a, b in zip(values[:-1], values[1:])]
        if all(d > 0 for d in diffs):
            return "increasing"
        if all(d < 0 for d in diffs):
            return "decreasing"
        return "mixed"

    return {
        "rows": rows,
        "trends": {
            "hstar_scaled": trend([abs(r.hstar_scaled - 1) for r in rows]),
            "bias_ratio_a0": trend([r.bias_ratio_a0 for r in rows]),
            "bias_ratio_ar": trend([r.bias_ratio_ar for r in rows]),
            "variance_over_bias": trend([r.variance_over_bias for r in rows]),
        },
    }
