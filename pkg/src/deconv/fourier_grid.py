"""Uniform grids, the continuous Fourier transform pair on them, and quadrature.

Sign convention: ``Phi(u) = int g(x) exp(i x u) dx`` and
``g(x) = (1/2pi) int Phi(u) exp(-i u x) du``.

A :class:`Grid` with ``n_points = N`` and half-width ``x_max = X`` samples
space at ``x_k = -X + k dx`` (``dx = 2X/N``) and frequency at
``u_j = -U + j du`` with ``U = pi/dx`` and ``du = pi/X``.  Both transforms
are Riemann sums on these nodes evaluated with one FFT each, so the pair is
an exact inverse up to rounding.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ContractError",
    "QuadratureError",
    "DivergenceError",
    "Grid",
    "GriddedFunction",
    "SPACE",
    "FREQUENCY",
    "forward_transform",
    "inverse_transform",
    "quadrature",
    "tail_integral_asymptotic",
    "head_integral_asymptotic",
]

SPACE = "space"
FREQUENCY = "frequency"


class ContractError(ValueError):
    """An operation received a value violating its documented precondition."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of panels; ``estimate`` holds the best value."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class DivergenceError(QuadratureError):
    """Contributions of successive truncation panels grow instead of decaying."""


@dataclass(frozen=True)
class Grid:
    n_points: int = 2**14
    x_max: float = 64.0

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ContractError(f"n_points must be a power of two >= 8, got {n!r}")
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ContractError(f"x_max must be positive and finite, got {self.x_max!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.x_max / self.n_points

    @property
    def freq_spacing(self) -> float:
        return math.pi / self.x_max

    @property
    def u_max(self) -> float:
        """Half-width of the dual frequency grid, ``pi / spacing``."""
        return math.pi / self.spacing

    @property
    def x(self) -> np.ndarray:
        return -self.x_max + self.spacing * np.arange(self.n_points)

    @property
    def u(self) -> np.ndarray:
        return -self.u_max + self.freq_spacing * np.arange(self.n_points)

    def nodes(self, domain: str) -> np.ndarray:
        return self.x if domain == SPACE else self.u

    def step(self, domain: str) -> float:
        return self.spacing if domain == SPACE else self.freq_spacing

    def sample(self, func: Callable[[np.ndarray], np.ndarray], domain: str = SPACE) -> "GriddedFunction":
        return GriddedFunction(self, np.asarray(func(self.nodes(domain)), dtype=complex), domain)


@dataclass(frozen=True, eq=False)
class GriddedFunction:
    grid: Grid
    values: np.ndarray
    domain: str = SPACE

    def __post_init__(self):
        if self.domain not in (SPACE, FREQUENCY):
            raise ContractError(f"domain must be {SPACE!r} or {FREQUENCY!r}, got {self.domain!r}")
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise ContractError(
                f"values have shape {values.shape}, grid needs ({self.grid.n_points},)"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes(self.domain)

    @property
    def step(self) -> float:
        return self.grid.step(self.domain)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.step)

    def norm_sq(self) -> float:
        """Riemann-sum squared L2 norm on the grid."""
        return float(np.sum(np.abs(self.values) ** 2) * self.step)

    def __add__(self, other: "GriddedFunction") -> "GriddedFunction":
        _check_compatible(self, other)
        return GriddedFunction(self.grid, self.values + other.values, self.domain)

    def __sub__(self, other: "GriddedFunction") -> "GriddedFunction":
        _check_compatible(self, other)
        return GriddedFunction(self.grid, self.values - other.values, self.domain)

    def __mul__(self, other):
        if isinstance(other, GriddedFunction):
            _check_compatible(self, other)
            other = other.values
        return GriddedFunction(self.grid, self.values * other, self.domain)

    __rmul__ = __mul__


def _check_compatible(a: GriddedFunction, b: GriddedFunction) -> None:
    if a.grid != b.grid or a.domain != b.domain:
        raise ContractError("gridded functions live on different grids or domains")


def _alternating(n: int) -> np.ndarray:
    signs = np.ones(n)
    signs[1::2] = -1.0
    return signs


def forward_transform(g: GriddedFunction) -> GriddedFunction:
    """Samples of ``int g(x) exp(i x u) dx`` on the dual frequency grid."""
    if g.domain != SPACE:
        raise ContractError(f"forward_transform expects a {SPACE} function, got {g.domain}")
    n = g.grid.n_points
    signs = _alternating(n)
    out = g.grid.spacing * n * signs * np.fft.ifft(signs * g.values)
    return GriddedFunction(g.grid, out, FREQUENCY)


def inverse_transform(g: GriddedFunction) -> GriddedFunction:
    """Samples of ``(1/2pi) int Phi(u) exp(-i u x) du`` on the space grid."""
    if g.domain != FREQUENCY:
        raise ContractError(f"inverse_transform expects a {FREQUENCY} function, got {g.domain}")
    signs = _alternating(g.grid.n_points)
    out = g.grid.freq_spacing / (2.0 * math.pi) * signs * np.fft.fft(signs * g.values)
    return GriddedFunction(g.grid, out, SPACE)


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * _NODES), dtype=float)
    if vals.shape != (15,):
        vals = np.broadcast_to(vals, (15,))
    if not np.all(np.isfinite(vals)):
        raise QuadratureError(f"non-finite integrand on [{a}, {b}]", math.nan, math.inf)
    k = half * float(_KRONROD @ vals)
    g = half * float(_GAUSS @ vals)
    return k, abs(k - g)


def _adaptive(f, edges, tol: float, max_panels: int, rtol: float = 0.0) -> tuple[float, float]:
    heap = []
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, e = _gk15(f, a, b)
        heapq.heappush(heap, (-e, a, b, val))
        total += val
        err += e
    panels = len(heap)
    while err > max(tol, rtol * abs(total)) and heap:
        if panels >= max_panels:
            raise QuadratureError("panel budget exhausted", total, err)
        neg_e, a, b, val = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            # panel collapsed to machine resolution; accept what we have
            heapq.heappush(heap, (neg_e, a, b, val))
            break
        v1, e1 = _gk15(f, a, mid)
        v2, e2 = _gk15(f, mid, b)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, a, mid, v1))
        heapq.heappush(heap, (-e2, mid, b, v2))
        panels += 1
    # recompute from the panels to shed accumulated rounding in the running sums
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return total, err


def quadrature(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    points=(),
    max_panels: int = 4000,
    first_width: float = 1.0,
    rtol: float = 0.0,
) -> float:
    """Adaptive Gauss-Kronrod estimate of ``int_a^b f``.

    ``f`` must accept a numpy array.  ``b`` may be ``inf``; the half line is
    then covered by panels of doubling width starting at ``first_width``,
    stopping once two consecutive panels contribute less than ``tol/4``.
    Growing panel contributions raise :class:`DivergenceError`.  ``points``
    are breakpoints (kinks, support edges).  With ``rtol > 0`` a finite range
    also stops once the error estimate is below ``rtol * |estimate|``.
    """
    if not tol > 0:
        raise ContractError("tol must be positive")
    if not a < b:
        raise ContractError(f"need a < b, got a={a}, b={b}")
    if math.isinf(a):
        raise ContractError("lower limit must be finite")
    if math.isfinite(b):
        edges = sorted({a, b, *(p for p in points if a < p < b)})
        total, err = _adaptive(f, edges, tol, max_panels, rtol)
        return total

    inner = sorted(p for p in points if p > a)
    total = 0.0
    start = a
    if inner:
        edges = [a, *inner]
        total, _ = _adaptive(f, edges, tol / 2, max_panels, rtol)
        start = inner[-1]
    width = first_width
    history: list[float] = []
    quiet = 0
    for _ in range(200):
        val, _ = _adaptive(f, [start, start + width], max(tol, rtol * abs(total)) / 8, max_panels, rtol)
        total += val
        history.append(abs(val))
        if abs(val) < max(tol, rtol * abs(total)) / 4:
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
        if len(history) >= 4 and history[-1] > history[-2] > history[-3] > history[-4] > tol:
            raise DivergenceError("integral diverges: truncation panels keep growing", total, history[-1])
        start += width
        width *= 2.0
        if not math.isfinite(start + width):
            break
    raise DivergenceError("no decay detected before the float range ran out", total, history[-1])


def tail_integral_asymptotic(A: float, alpha: float, r: float, v: float) -> float:
    """Leading term of ``int_v^inf u^A exp(-alpha u^r) du`` as ``v`` grows."""
    if not v > 0:
        raise ContractError("v must be positive")
    return v ** (A + 1 - r) * math.exp(-alpha * v**r) / (alpha * r)


def head_integral_asymptotic(B: float, beta: float, s: float, v: float) -> float:
    """Leading term of ``int_0^v u^B exp(beta u^s) du`` as ``v`` grows."""
    if not v > 0:
        raise ContractError("v must be positive")
    return v ** (B + 1 - s) * math.exp(beta * v**s) / (beta * s)
