"""Closed-form bias and variance bounds and the assembled risk report.

Bounds carrying an implicit ``(1 + o(1))`` factor are returned at face value;
comparisons against simulation use an explicit multiplicative slack.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .bandwidth import rates_at, solve_hstar
from .fourier_grid import ContractError
from .models import NoiseModel, SmoothnessClass, sup_density_bound

__all__ = [
    "DEFAULT_SLACK",
    "RiskReport",
    "BiasDominationError",
    "bias_bound_pointwise",
    "bias_bound_l2",
    "variance_bound_pointwise",
    "variance_bound_l2",
    "assemble_report",
    "within_slack",
]

DEFAULT_SLACK = 1.5
LOSSES = ("pointwise", "l2")


class BiasDominationError(RuntimeError):
    """At the optimal bandwidth the variance bound failed to be small against the bias."""


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ContractError(f"{name} must be positive and finite, got {value!r}")


def bias_bound_pointwise(cls: SmoothnessClass, h: float) -> float:
    """``(L/(2 pi alpha r)) h^{r-1} exp(-2 alpha/h^r)``."""
    _positive("h", h)
    return rates_at(cls, h)[0]


def bias_bound_l2(cls: SmoothnessClass, h: float) -> float:
    """``L exp(-2 alpha/h^r)``; holds for every ``h``, not only asymptotically."""
    _positive("h", h)
    return rates_at(cls, h)[1]


def _variance_core(noise: NoiseModel, h: float, n: int) -> float:
    _positive("h", h)
    if not n >= 1:
        raise ContractError(f"n must be >= 1, got {n}")
    if not noise.beta > 0:
        raise ContractError("variance bounds need beta > 0")
    b, s = noise.beta, noise.s
    log_value = (
        (s + 2.0 * noise.gamma - 1.0) * math.log(h)
        - math.log(2.0 * math.pi * b * s * noise.b_min**2 * n)
        + 2.0 * b / h**s
    )
    return math.exp(log_value)


def variance_bound_pointwise(noise: NoiseModel, f_star: float, h: float, n: int) -> float:
    _positive("f_star", f_star)
    factor = min(f_star, 4.0 / (noise.beta * noise.s) * h ** (noise.s - 1.0))
    return factor * _variance_core(noise, h, n)


def variance_bound_l2(noise: NoiseModel, h: float, n: int) -> float:
    return _variance_core(noise, h, n)


@dataclass(frozen=True)
class RiskReport:
    bias_sq_bound: float
    variance_bound: float
    total_bound: float
    rate_phi: float
    loss: str
    h: float
    n: int
    at_hstar: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def assemble_report(
    cls: SmoothnessClass,
    noise: NoiseModel,
    n: int,
    h: Optional[float] = None,
    loss: str = "l2",
) -> RiskReport:
    """Bias and variance bounds at ``h`` (default ``h*``) plus the matching rate.

    At ``h = h*`` with ``n >= 1e6`` the variance bound must be below a tenth of
    the bias bound; otherwise :class:`BiasDominationError` is raised.
    """
    if loss not in LOSSES:
        raise ContractError(f"loss must be one of {LOSSES}, got {loss!r}")
    h_star = solve_hstar(cls, noise, n).h
    if h is None:
        h = h_star
    at_hstar = abs(h - h_star) <= 1e-12 * h_star
    if loss == "pointwise":
        bias = bias_bound_pointwise(cls, h)
        var = variance_bound_pointwise(noise, sup_density_bound(cls), h, n)
        rate = rates_at(cls, h_star)[0]
    else:
        bias = bias_bound_l2(cls, h)
        var = variance_bound_l2(noise, h, n)
        rate = rates_at(cls, h_star)[1]
    if at_hstar and n >= 10**6 and not var < 0.1 * bias:
        raise BiasDominationError(
            f"variance bound {var:.4g} is not below 0.1 x bias bound {bias:.4g} at h*={h:.6g}, n={n}"
        )
    return RiskReport(bias, var, bias + var, rate, loss, float(h), int(n), at_hstar)


def within_slack(empirical: float, bound: float, slack: float = DEFAULT_SLACK) -> bool:
    """``empirical <= slack * bound``."""
    return empirical <= slack * bound
