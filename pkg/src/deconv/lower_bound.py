"""Two-point lower-bound construction and its numerical certificate.

A smooth bump ``Phi^G`` placed just above the cutoff ``1/h+`` defines a
spectral perturbation ``Phi^H``.  The densities with cfs ``Phi_0 +/- Phi^H``
are well separated in the loss yet their noisy versions are close in
chi-square, which yields a minimax risk floor through a two-point bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .bandwidth import rates, solve_hplus
from .fourier_grid import (
    FREQUENCY,
    SPACE,
    ContractError,
    Grid,
    GriddedFunction,
    inverse_transform,
    quadrature,
)
from .models import NoiseModel, SmoothnessClass, TargetDensity, class_membership, make_target

__all__ = [
    "PhiG",
    "TwoPointPair",
    "PairRejected",
    "SeparationReport",
    "Chi2Report",
    "build_phi_g",
    "perturbation_pointwise",
    "perturbation_l2",
    "perturbation_cf",
    "build_pair",
    "replace_pair",
    "weighted_energy",
    "bracket_factor",
    "separation",
    "chi2_divergence",
    "two_point_risk_bound",
    "lower_bound_certificate",
    "lower_bound_sweep",
    "pair_grid",
    "DEFAULTS",
]

KINDS = ("pointwise", "l2")
DEFAULTS = {"pointwise": {"delta": 0.1, "D": 2.0}, "l2": {"delta": 0.25, "D": 2.0}}
DEFAULT_C0 = 3.0
POSITIVITY_TOL = 1e-8
MASS_TOL = 1e-5
DENSITY_FLOOR = 1e-300


def pair_grid() -> Grid:
    return Grid(2**16, 1024.0)


# CDF of the sum of five U(0, 1) variables: the integral of the quartic cardinal B-spline.
_SUM5_CDF = BSpline.basis_element(np.arange(6.0), extrapolate=False).antiderivative()


def _bump_cdf(z: np.ndarray, delta: float) -> np.ndarray:
    """CDF of ``(delta/2) W`` where ``W`` has the rescaled quartic-spline density on (-1, 1)."""
    s = (5.0 * (2.0 * np.asarray(z, dtype=float) / delta) + 5.0) / 2.0
    out = np.nan_to_num(_SUM5_CDF(np.clip(s, 0.0, 5.0)), nan=0.0)
    return np.where(s <= 0.0, 0.0, np.where(s >= 5.0, 1.0, out))


@dataclass(frozen=True, eq=False)
class PhiG:
    """Smoothed indicator: 1 on ``[2 delta, D - 2 delta]``, 0 off ``(delta, D - delta)``."""

    delta: float
    D: float
    values: GriddedFunction

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        upper = _bump_cdf(v - 1.5 * self.delta, self.delta)
        lower = _bump_cdf(v - self.D + 1.5 * self.delta, self.delta)
        return np.clip(upper - lower, 0.0, 1.0)

    def smoothness_witness(self) -> float:
        """``max |4th difference| / spacing^4``, a bounded proxy for the fourth derivative."""
        g = self.values.real
        d4 = g[4:] - 4 * g[3:-1] + 6 * g[2:-2] - 4 * g[1:-3] + g[:-4]
        return float(np.max(np.abs(d4)) / self.values.grid.spacing**4)


def build_phi_g(delta: float, D: float, grid: Optional[Grid] = None) -> PhiG:
    if not delta > 0:
        raise ContractError(f"delta must be positive, got {delta}")
    if not D > 4 * delta:
        raise ContractError(f"need D > 4 delta, got D={D}, delta={delta}")
    grid = Grid(2**12, 2.0 * D) if grid is None else grid
    shell = PhiG(delta, D, GriddedFunction(grid, np.zeros(grid.n_points), SPACE))
    return PhiG(delta, D, GriddedFunction(grid, shell(grid.x), SPACE))


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise ContractError(f"kind must be one of {KINDS}, got {kind!r}")


def perturbation_cf(cls: SmoothnessClass, h: float, phig: PhiG, kind: str) -> Callable[[np.ndarray], np.ndarray]:
    """``u -> Phi^H(u, h)`` for the pointwise or l2 construction."""
    _check_kind(kind)
    if not h > 0:
        raise ContractError(f"h must be positive, got {h}")
    a, r, L = cls.alpha, cls.r, cls.L
    cut = h ** (-r)
    if kind == "pointwise":
        log_amp = 0.5 * math.log(2 * math.pi * a * r * L) + 0.5 * (1 - r) * math.log(h) + a * cut
        decay = 2.0 * a
    else:
        if not phig.delta < 1:
            raise ContractError(f"the l2 construction needs delta < 1, got {phig.delta}")
        d = phig.delta ** -0.5
        log_amp = 0.5 * math.log(2 * math.pi * a * r * L * (d - 1)) + 0.5 * (1 - r) * math.log(h) + (d - 1) * a * cut
        decay = a * d

    def cf(u):
        ur = np.abs(np.asarray(u, dtype=float)) ** r
        bump = phig(ur - cut)
        out = np.zeros(ur.shape)
        live = bump > 0
        out[live] = np.exp(log_amp - decay * ur[live]) * bump[live]
        return out + 0j

    return cf


def _support_edges(cls: SmoothnessClass, h: float, phig: PhiG) -> tuple[float, float]:
    cut = h ** (-cls.r)
    lo = (cut + phig.delta) ** (1.0 / cls.r)
    hi = (cut + phig.D - phig.delta) ** (1.0 / cls.r)
    return lo, hi


def _gridded(cls, h, phig, grid, kind) -> GriddedFunction:
    lo, hi = _support_edges(cls, h, phig)
    if hi >= grid.u_max:
        raise ContractError(
            f"perturbation support reaches |u|={hi:.4g} beyond the grid extent {grid.u_max:.4g}; "
            "use a finer space grid"
        )
    return GriddedFunction(grid, perturbation_cf(cls, h, phig, kind)(grid.u), FREQUENCY)


def perturbation_pointwise(cls: SmoothnessClass, h: float, phig: PhiG, grid: Optional[Grid] = None) -> GriddedFunction:
    return _gridded(cls, h, phig, pair_grid() if grid is None else grid, "pointwise")


def perturbation_l2(cls: SmoothnessClass, h: float, phig: PhiG, grid: Optional[Grid] = None) -> GriddedFunction:
    return _gridded(cls, h, phig, pair_grid() if grid is None else grid, "l2")


class PairRejected(ContractError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True, eq=False)
class TwoPointPair:
    f0: TargetDensity
    perturbation_cf: GriddedFunction
    f1_cf: GriddedFunction
    f2_cf: GriddedFunction
    f1: GriddedFunction
    f2: GriddedFunction
    kind: str
    h: float
    phig: PhiG
    perturbation: Callable = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.f1.grid

    @property
    def support(self) -> tuple[float, float]:
        return self.diagnostics["support"]

    def swapped(self) -> "TwoPointPair":
        """Same pair with the perturbation sign reversed."""
        neg = self.perturbation
        return replace_pair(self, lambda u: -neg(u))


def replace_pair(pair: TwoPointPair, perturbation: Callable) -> TwoPointPair:
    """Rebuild ``pair`` around another perturbation cf without re-validating."""
    grid = pair.grid
    ph = GriddedFunction(grid, perturbation(grid.u), FREQUENCY)
    phi0 = GriddedFunction(grid, pair.f0.cf(grid.u), FREQUENCY)
    f1_cf, f2_cf = phi0 + ph, phi0 - ph
    f1 = GriddedFunction(grid, inverse_transform(f1_cf).real, SPACE)
    f2 = GriddedFunction(grid, inverse_transform(f2_cf).real, SPACE)
    return TwoPointPair(pair.f0, ph, f1_cf, f2_cf, f1, f2, pair.kind, pair.h, pair.phig, perturbation, dict(pair.diagnostics))


def _center(cls: SmoothnessClass, c0: float) -> TargetDensity:
    if cls.r <= 1:
        return make_target("cauchy", cls, scale=c0)
    if cls.r < 2:
        return make_target("stable", cls, r=cls.r, c0=c0)
    raise ContractError(f"the two-point construction needs 0 < r < 2, got r={cls.r}")


def build_pair(
    cls: SmoothnessClass,
    noise: NoiseModel,
    n: int,
    kind: str = "pointwise",
    delta: Optional[float] = None,
    D: Optional[float] = None,
    c0: float = DEFAULT_C0,
    grid: Optional[Grid] = None,
) -> TwoPointPair:
    """Densities ``f1, f2`` with cfs ``Phi_0 +/- Phi^H(., h+)``, validated on the grid.

    Raises :class:`PairRejected` when either density dips below zero, loses
    mass, or leaves the class.
    """
    _check_kind(kind)
    delta = DEFAULTS[kind]["delta"] if delta is None else delta
    D = DEFAULTS[kind]["D"] if D is None else D
    grid = pair_grid() if grid is None else grid
    a, r = cls.alpha, cls.r
    if not c0 > max(a ** (1.0 / r), a):
        raise ContractError(f"c0 must exceed max(alpha^(1/r), alpha) = {max(a ** (1.0 / r), a):.4g}, got {c0}")
    f0 = _center(cls, c0)
    h = solve_hplus(cls, noise, n).h
    phig = build_phi_g(delta, D)
    pert = perturbation_cf(cls, h, phig, kind)
    lo, hi = _support_edges(cls, h, phig)
    ph = _gridded(cls, h, phig, grid, kind)
    phi0 = GriddedFunction(grid, f0.cf(grid.u), FREQUENCY)
    f1_cf, f2_cf = phi0 + ph, phi0 - ph
    f1 = GriddedFunction(grid, inverse_transform(f1_cf).real, SPACE)
    f2 = GriddedFunction(grid, inverse_transform(f2_cf).real, SPACE)

    shrink = 1.0 - math.exp(-a * delta / 2.0)
    center_margin = class_membership(f0.cf, SmoothnessClass(a, r, shrink**2 * cls.L))
    diagnostics = {
        "h_plus": h,
        "support": (lo, hi),
        "center_energy": center_margin.integral,
        "center_shrunk_bound": center_margin.bound,
        "center_in_shrunk_class": center_margin.passed,
    }
    for name, dens, cf in (("f1", f1, lambda u: f0.cf(u) + pert(u)), ("f2", f2, lambda u: f0.cf(u) - pert(u))):
        values = dens.real
        i = int(np.argmin(values))
        mass = dens.integral().real
        diagnostics[f"{name}_min"] = float(values[i])
        diagnostics[f"{name}_mass"] = mass
        if values[i] < -POSITIVITY_TOL:
            raise PairRejected(
                f"n too small or c0 too small: {name} reaches {values[i]:.3g} at x={grid.x[i]:.6g}",
                diagnostics,
            )
        if abs(mass - 1.0) > MASS_TOL:
            raise PairRejected(f"{name} integrates to {mass:.8g} on the grid", diagnostics)
        member = class_membership(cf, cls, points=(lo, hi))
        diagnostics[f"{name}_energy"] = member.integral
        if not member.passed:
            raise PairRejected(
                f"{name} leaves A({a}, {r}, {cls.L}): weighted energy {member.integral:.6g} > {member.bound:.6g}",
                diagnostics,
            )
    return TwoPointPair(f0, ph, f1_cf, f2_cf, f1, f2, kind, h, phig, pert, diagnostics)


def weighted_energy(pair: TwoPointPair, cls: SmoothnessClass) -> float:
    """``int |Phi^H|^2 exp(2 alpha |u|^r) du`` by quadrature over the support."""
    lo, hi = pair.support
    half = quadrature(
        lambda u: np.abs(pair.perturbation(u)) ** 2 * np.exp(2 * cls.alpha * u**cls.r),
        lo, hi, tol=1e-300, rtol=1e-11,
    )
    return 2.0 * half


def bracket_factor(kind: str, alpha: float, delta: float, D: float) -> float:
    """Limit ratio of half the separation to the rate (pointwise) or its analogue (l2)."""
    if kind == "pointwise":
        return math.exp(-4 * alpha * delta) - math.exp(-2 * alpha * (D - 2 * delta))
    root = math.sqrt(delta)
    inner = (1 - root) * (math.exp(-4 * alpha * root) - math.exp(-2 * alpha * (D - 2 * delta) / root))
    return math.sqrt(inner)


@dataclass(frozen=True)
class SeparationReport:
    measured: float
    theoretical_floor: float
    bracket: float
    rate: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def separation(pair: TwoPointPair, cls: SmoothnessClass, noise: NoiseModel, n: int, slack: float = 0.2) -> SeparationReport:
    """Distance between ``f1`` and ``f2`` against ``2 rate x bracket``.

    Pointwise: ``|f1(0) - f2(0)| = (2/pi) |int_0^inf Phi^H|``.  l2:
    ``||f1 - f2||_2 = 2 sqrt((1/pi) int_0^inf |Phi^H|^2)``.  Both by quadrature.
    """
    lo, hi = pair.support
    rate = rates(cls, noise, n)
    bracket = bracket_factor(pair.kind, cls.alpha, pair.phig.delta, pair.phig.D)
    if pair.kind == "pointwise":
        integral = quadrature(lambda u: pair.perturbation(u).real, lo, hi, tol=1e-300, rtol=1e-12)
        measured = abs(2.0 * integral / math.pi)
        phi = math.sqrt(rate.pointwise)
    else:
        energy = quadrature(lambda u: np.abs(pair.perturbation(u)) ** 2, lo, hi, tol=1e-300, rtol=1e-12)
        measured = 2.0 * math.sqrt(energy / math.pi)
        phi = math.sqrt(rate.l2)
    floor = 2.0 * phi * bracket
    return SeparationReport(measured, floor, bracket, phi, measured >= floor * (1.0 - slack))


@dataclass(frozen=True)
class Chi2Report:
    chi2: float
    n_chi2: float
    t_n1: float
    t_n1_parseval: float
    t_n2: float
    chi2_product: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def chi2_divergence(pair: TwoPointPair, noise: NoiseModel, n: int) -> Chi2Report:
    """Chi-square distance between the noisy densities, plus the ``T_n`` diagnostics.

    ``f_j^Y`` come from inverting ``Phi_j * Phi^eps``; the difference is
    inverted directly from ``2 Phi^H Phi^eps`` to avoid cancellation.
    ``chi2_product`` is the exact n-sample value ``(1 + chi2)^n - 1``.
    """
    grid = pair.grid
    eps_cf = noise.cf(grid.u)
    f1y = inverse_transform(pair.f1_cf * eps_cf).real
    hy_spec = pair.perturbation_cf * eps_cf
    hy = inverse_transform(hy_spec).real
    if np.any(f1y <= 0):
        i = int(np.argmin(f1y))
        raise PairRejected(
            f"noisy f1 is not positive at x={grid.x[i]:.6g} (value {f1y[i]:.3g})",
            {"f1y_min": float(f1y[i])},
        )
    dx = grid.spacing
    chi2 = float(np.sum((2.0 * hy) ** 2 / np.maximum(f1y, DENSITY_FLOOR)) * dx)
    t_n1 = n * float(np.sum(hy**2) * dx)
    lo, hi = pair.support
    t_n1_parseval = n / math.pi * quadrature(
        lambda u: np.abs(pair.perturbation(u) * noise.cf(u)) ** 2, lo, hi, tol=1e-300, rtol=1e-12
    )
    t_n2 = n * float(np.sum(grid.x**4 * hy**2) * dx)
    product = math.expm1(n * math.log1p(chi2))
    return Chi2Report(chi2, n * chi2, t_n1, t_n1_parseval, t_n2, product)


def two_point_risk_bound(psi: float, gamma0: float) -> float:
    """``psi (1 - gamma0)(1 - sqrt(gamma0))``: risk floor when the n-sample chi-square is at most ``gamma0^2``."""
    if not psi > 0:
        raise ContractError(f"psi must be positive, got {psi}")
    if not 0 < gamma0 < 1:
        raise ContractError(f"gamma0 must lie in (0, 1), got {gamma0}")
    return psi * (1.0 - gamma0) * (1.0 - math.sqrt(gamma0))


def lower_bound_certificate(
    cls: SmoothnessClass,
    noise: NoiseModel,
    n: int,
    kind: str = "pointwise",
    delta: Optional[float] = None,
    D: Optional[float] = None,
    c0: float = DEFAULT_C0,
    slack: float = 0.2,
) -> dict:
    """Chain pair construction, separation, chi-square and the two-point bound.

    Never raises on a stage failure; the report names the failing stage.
    """
    report: dict = {"n": int(n), "kind": kind, "ok": False}
    stage = "build_pair"
    try:
        pair = build_pair(cls, noise, n, kind, delta, D, c0)
        report["pair"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in pair.diagnostics.items()}
        stage = "separation"
        sep = separation(pair, cls, noise, n, slack)
        report["separation"] = sep.to_dict()
        stage = "chi2_divergence"
        chi = chi2_divergence(pair, noise, n)
        report["chi2"] = chi.to_dict()
        stage = "two_point_risk_bound"
        gamma0 = math.sqrt(chi.chi2_product)
        psi = sep.measured / 2.0
        floor = two_point_risk_bound(psi, gamma0)
    except (ContractError, RuntimeError) as exc:
        report["failed_stage"] = stage
        report["error"] = str(exc)
        if isinstance(exc, PairRejected):
            report["diagnostics"] = exc.diagnostics
        return report
    report.update(
        ok=True,
        gamma0=gamma0,
        psi=psi,
        certified_floor=floor,
        rate=sep.rate,
        floor_over_rate=floor / sep.rate,
    )
    return report


def lower_bound_sweep(
    cls: SmoothnessClass,
    noise: NoiseModel,
    n_list: Sequence[int],
    kind: str = "pointwise",
    delta: Optional[float] = None,
    D: Optional[float] = None,
    c0: float = DEFAULT_C0,
    threads: int = 1,
) -> dict:
    """Certificates along ``n_list``; rows keep the input order for any thread count."""

    def one(n):
        return lower_bound_certificate(cls, noise, n, kind, delta, D, c0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, n_list))
    else:
        reports = [one(n) for n in n_list]
    rows = []
    for rep in reports:
        if rep["ok"]:
            rows.append({
                "n": rep["n"],
                "separation": rep["separation"]["measured"],
                "n_chi2": rep["chi2"]["n_chi2"],
                "certified_floor": rep["certified_floor"],
                "phi_n": rep["rate"],
            })
    positive = [rep["n"] for rep in reports if rep.get("failed_stage") != "build_pair"]
    return {
        "reports": reports,
        "rows": rows,
        "smallest_valid_n": min(positive) if positive else None,
    }
