"""Deconvolution kernel, the kernel density estimator, and exact bias/variance functionals.

The kernel has Fourier transform ``Phi^K(u) = I(|u| <= 1) / Phi^eps(u/h)`` and the
estimator is ``f_n(x) = (1/(n h)) sum_i K((x - Y_i)/h)``.  In the frequency
domain this is ``Phi^K(u h) * empirical_cf(u)``, which is how it is computed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fourier_grid import (
    FREQUENCY,
    SPACE,
    ContractError,
    Grid,
    GriddedFunction,
    inverse_transform,
    quadrature,
)
from .models import NoiseModel

__all__ = [
    "DeconvKernel",
    "DensityEstimate",
    "EstimatorOverflowError",
    "kernel_grid",
    "cutoff_weights",
    "build_kernel",
    "kernel_value",
    "kernel_l2_norm_sq",
    "empirical_cf",
    "empirical_cf_progression",
    "estimate_density",
    "estimate_density_direct",
    "exact_bias_l2",
    "exact_bias_pointwise",
    "variance_functional_l2",
]

log = logging.getLogger(__name__)

EXP_LIMIT = 700.0
IMAG_TOLERANCE = 1e-6
_CHUNK = 4096


class EstimatorOverflowError(ContractError):
    """The amplification ``1/|Phi^eps|`` at the cutoff leaves the double range."""


def kernel_grid(n_points: int = 2**16, cut_nodes: int = 2**14) -> Grid:
    """Grid on the kernel's own scale whose cut ``|u| = 1`` falls halfway between nodes.

    Frequency nodes are integer multiples of ``du``; choosing ``du = 1/(cut_nodes + 1/2)``
    turns every grid sum over ``|u| <= 1`` into a midpoint rule.
    """
    grid = Grid(n_points, math.pi * (cut_nodes + 0.5))
    if grid.u_max <= 1.0:
        raise ContractError("kernel grid must extend beyond |u| = 1; raise n_points or lower cut_nodes")
    return grid


def cutoff_weights(u: np.ndarray, cut: float, du: float) -> np.ndarray:
    """Quadrature weights for ``int_{-cut}^{cut}`` on nodes spaced ``du``.

    Interior nodes get 1 and the last node inside gets ``1/2 + (cut - |u|)/du``,
    which makes the rule second order in ``du`` wherever the cut falls.
    """
    t = (cut - np.abs(np.asarray(u, dtype=float))) / du
    # snap rounding noise so a cut sitting on a node is classified consistently
    near = np.rint(t)
    t = np.where(np.abs(t - near) < 1e-9, near, t)
    return np.where(t >= 1.0, 1.0, np.where(t >= 0.0, 0.5 + t, 0.0))


def _check_amplification(noise: NoiseModel, h: float) -> None:
    if not h > 0:
        raise ContractError(f"bandwidth h must be positive, got {h}")
    if noise.beta == 0:
        return
    exponent = 2.0 * noise.beta / h**noise.s
    limit = EXP_LIMIT - math.log(1.0 / noise.b_min)
    if exponent > limit:
        h_min = (2.0 * noise.beta / limit) ** (1.0 / noise.s)
        raise EstimatorOverflowError(
            f"h={h:.6g} amplifies by exp({exponent:.4g}) beyond double range; use h > {h_min:.6g}"
        )
    if noise.beta / h**noise.s - math.log(noise.b_min) > -math.log(np.finfo(float).eps * 1e3):
        warnings.warn(
            f"kernel amplification exp({noise.beta / h**noise.s:.4g}) at h={h:.6g} "
            "exceeds 1/(1e3 eps); rounding in the empirical cf is magnified",
            RuntimeWarning,
            stacklevel=3,
        )


def _inverse_cf(noise: NoiseModel, u: np.ndarray) -> np.ndarray:
    """``1/Phi^eps(u)`` computed from the log modulus and the phase."""
    log_mod = noise.log_modulus(u)
    if np.any(~np.isfinite(log_mod)):
        bad = np.asarray(u)[~np.isfinite(log_mod)][0]
        raise ContractError(f"Phi^eps vanishes at u={bad:.6g}; the kernel is undefined")
    values = noise.cf(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(np.abs(values) > 0, values / np.abs(values), 1.0)
    return np.exp(-log_mod) * np.conj(phase)


@dataclass(frozen=True, eq=False)
class DeconvKernel:
    h: float
    noise: NoiseModel
    phi_k: GriddedFunction
    k_space: GriddedFunction
    l2_norm_sq: float

    @property
    def grid(self) -> Grid:
        return self.phi_k.grid

    @property
    def grid_l2_norm_sq(self) -> float:
        return self.k_space.norm_sq()

    @property
    def imag_ratio(self) -> float:
        """sup |Im K| / sup |Re K| on the grid."""
        return float(np.max(np.abs(self.k_space.values.imag)) / np.max(np.abs(self.k_space.values.real)))


def kernel_l2_norm_sq(noise: NoiseModel, h: float) -> float:
    """``(h/2pi) int_{|u| <= 1/h} |Phi^eps(u)|^{-2} du`` by adaptive quadrature."""
    _check_amplification(noise, h)
    cut = 1.0 / h
    half = quadrature(
        lambda u: np.exp(-2.0 * noise.log_modulus(u)), 0.0, cut, tol=1e-300, rtol=1e-13
    )
    return h / math.pi * half


def build_kernel(noise: NoiseModel, h: float, grid: Optional[Grid] = None) -> DeconvKernel:
    grid = kernel_grid() if grid is None else grid
    if grid.u_max <= 1.0:
        raise ContractError(f"grid frequency extent {grid.u_max:.4g} must exceed the cut at 1")
    _check_amplification(noise, h)
    u = grid.u
    inside = np.abs(u) <= 1.0
    values = np.zeros(grid.n_points, dtype=complex)
    values[inside] = _inverse_cf(noise, u[inside] / h)
    phi_k = GriddedFunction(grid, values, FREQUENCY)
    k_space = inverse_transform(phi_k)
    kernel = DeconvKernel(h, noise, phi_k, k_space, kernel_l2_norm_sq(noise, h))
    ratio = kernel.imag_ratio
    if ratio > 1e-8:
        log.warning("kernel at h=%.6g has imaginary part %.3g of its real sup", h, ratio)
    return kernel


def kernel_value(noise: NoiseModel, h: float, t, nodes: Optional[int] = None) -> np.ndarray:
    """Continuous ``K(t) = (1/2pi) int_{-1}^{1} e^{-ivt} / Phi^eps(v/h) dv`` by Gauss-Legendre.

    Independent of any grid; used to check the gridded kernel.
    """
    _check_amplification(noise, h)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if nodes is None:
        nodes = 200 + int(2 * np.max(np.abs(t)))
    x, w = np.polynomial.legendre.leggauss(nodes)
    v = np.concatenate([0.5 * (x - 1.0), 0.5 * (x + 1.0)])
    wv = 0.5 * np.concatenate([w, w])
    inv = _inverse_cf(noise, v / h)
    return (np.exp(-1j * np.outer(t, v)) @ (wv * inv)).real / (2.0 * math.pi)


def empirical_cf(samples: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``(1/n) sum_j exp(i u Y_j)``, accumulated over sample chunks in a fixed order."""
    samples = np.asarray(samples, dtype=float)
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape, dtype=complex)
    for start in range(0, samples.size, _CHUNK):
        block = samples[start : start + _CHUNK]
        total += np.exp(1j * np.outer(u, block)).sum(axis=1)
    return total / samples.size


def empirical_cf_progression(samples: np.ndarray, du: float, k_min: int, count: int) -> np.ndarray:
    """Empirical cf at ``u = (k_min + k) du`` for ``k < count`` via powers of ``exp(i du Y)``.

    One complex multiply per frequency and sample instead of an exponential;
    rounding grows like ``count * eps``.
    """
    samples = np.asarray(samples, dtype=float)
    total = np.zeros(count, dtype=complex)
    for start in range(0, samples.size, _CHUNK):
        block = samples[start : start + _CHUNK]
        step = np.exp(1j * du * block)
        power = np.exp(1j * (k_min * du) * block)
        for k in range(count):
            total[k] += power.sum()
            power *= step
    return total / samples.size


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    values: GriddedFunction
    h: float
    n_samples: int
    spectrum: GriddedFunction
    imag_residue: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.values.grid

    def integral(self) -> float:
        return self.values.integral().real

    def at(self, x) -> np.ndarray:
        """Evaluate at arbitrary points by summing the stored spectrum."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        keep = self.spectrum.values != 0
        u = self.spectrum.nodes[keep]
        coef = self.spectrum.values[keep]
        du = self.spectrum.step
        return (np.exp(-1j * np.outer(x, u)) * coef).sum(axis=1).real * du / (2.0 * math.pi)


def _estimator_weights(noise: NoiseModel, h: float, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero-weight frequency indices and the factor ``w(u) Phi^K(u h)`` there."""
    _check_amplification(noise, h)
    cut = 1.0 / h
    if grid.u_max <= cut:
        raise ContractError(f"grid frequency extent {grid.u_max:.4g} must exceed the cut 1/h = {cut:.4g}")
    u = grid.u
    w = cutoff_weights(u, cut, grid.freq_spacing)
    idx = np.nonzero(w)[0]
    return idx, w[idx] * _inverse_cf(noise, u[idx])


def estimate_density(samples, noise: NoiseModel, h: float, grid: Optional[Grid] = None) -> DensityEstimate:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ContractError("need at least one sample")
    grid = Grid() if grid is None else grid
    idx, factor = _estimator_weights(noise, h, grid)
    # the empirical cf is Hermitian: evaluate at u >= 0 and mirror (u_{N-j} = -u_j)
    half = idx[idx >= grid.n_points // 2]
    ecf = np.zeros(grid.n_points, dtype=complex)
    # half is a contiguous run of grid indices, so u is an arithmetic progression there
    ecf[half] = empirical_cf_progression(samples, grid.freq_spacing, int(half[0]) - grid.n_points // 2, half.size)
    ecf[grid.n_points - half[half > grid.n_points // 2]] = np.conj(ecf[half[half > grid.n_points // 2]])
    spectrum = np.zeros(grid.n_points, dtype=complex)
    spectrum[idx] = factor * ecf[idx]
    spec = GriddedFunction(grid, spectrum, FREQUENCY)
    raw = inverse_transform(spec).values
    sup = float(np.max(np.abs(raw.real)))
    residue = float(np.max(np.abs(raw.imag)))
    log.debug("estimate at h=%.6g: imaginary residue %.3g (real sup %.3g)", h, residue, sup)
    if residue > IMAG_TOLERANCE * max(sup, np.finfo(float).tiny):
        raise ContractError(f"imaginary residue {residue:.3g} exceeds {IMAG_TOLERANCE:g} of the real sup {sup:.3g}")
    values = GriddedFunction(grid, raw.real, SPACE)
    return DensityEstimate(values, h, int(samples.size), spec, residue)


def estimate_density_direct(samples, noise: NoiseModel, h: float, grid: Optional[Grid] = None, x=None) -> np.ndarray:
    """Brute-force ``(1/(n h)) sum_i K((x - Y_i)/h)`` with the same discretized kernel.

    The kernel is evaluated sample by sample as a trigonometric sum.  Cost is
    O(n * len(x) * frequencies); a test oracle only.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ContractError("need at least one sample")
    grid = Grid() if grid is None else grid
    x = grid.x if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    idx, factor = _estimator_weights(noise, h, grid)
    u = grid.u[idx]
    v = u * h  # kernel-scale frequencies
    dv = grid.freq_spacing * h
    out = np.zeros(x.size)
    for y in samples:
        t = (x - y) / h
        k = (np.exp(-1j * np.outer(t, v)) @ factor).real * dv / (2.0 * math.pi)
        out += k
    return out / (samples.size * h)


def exact_bias_l2(target_cf: Callable, h: float) -> float:
    """``(1/2pi) int_{|u h| > 1} |Phi^X(u)|^2 du``: the exact squared l2 bias."""
    if not h > 0:
        raise ContractError(f"bandwidth h must be positive, got {h}")
    tail = quadrature(
        lambda u: np.abs(target_cf(u)) ** 2, 1.0 / h, math.inf, tol=1e-300, rtol=1e-12,
        max_panels=100_000, first_width=max(1.0, 1.0 / h),
    )
    return tail / math.pi


def exact_bias_pointwise(target_cf: Callable, h: float, x: float) -> float:
    """``-(1/2pi) int_{|u h| > 1} Phi^X(u) e^{-iux} du``: the exact bias at ``x``."""
    if not h > 0:
        raise ContractError(f"bandwidth h must be positive, got {h}")
    x = float(x)
    width = min(1.0, math.pi / abs(x)) if x else 1.0
    tail = quadrature(
        lambda u: (target_cf(u) * np.exp(-1j * u * x)).real, 1.0 / h, math.inf,
        tol=1e-300, rtol=1e-12, max_panels=200_000, first_width=width,
    )
    return -tail / math.pi


def variance_functional_l2(noise: NoiseModel, h: float, n: int) -> float:
    """``||K||_2^2 / (n h)``, the finite-n envelope of the integrated variance."""
    if not n >= 1:
        raise ContractError(f"n must be >= 1, got {n}")
    return kernel_l2_norm_sq(noise, h) / (n * h)
