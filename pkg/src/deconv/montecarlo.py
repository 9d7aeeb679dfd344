"""Seeded simulation of the estimator's risk at a fixed target density.

Replication ``k`` draws from ``SeedSequence(master_seed, spawn_key=(k,))`` so
results do not depend on how replications are spread over threads.  The
truth is the target density periodized onto the grid, the same way the
estimator sees the data, so grid sums give the l2 error directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bandwidth import (
    Equation,
    adaptive_bandwidth,
    adaptive_bandwidth_critical,
    critical_inflation,
    rates,
    solve_hstar,
)
from .estimator import estimate_density
from .fourier_grid import ContractError, Grid, quadrature
from .models import SmoothnessClass, noise_from_spec, target_from_spec
from .risk_bounds import bias_bound_l2

__all__ = [
    "ExperimentConfig",
    "RiskValue",
    "EmpiricalRisk",
    "replication_seed",
    "draw_replication",
    "resolve_bandwidth",
    "run_experiment",
    "run_paired",
    "rate_sweep",
    "superefficiency_demo",
    "adaptive_comparison",
]

RULES = tuple(e.value for e in Equation if e is not Equation.HPLUS)


@dataclass(frozen=True)
class ExperimentConfig:
    target: dict
    noise: dict
    cls: SmoothnessClass
    n: int
    replications: int = 100
    bandwidth_rule: str = "HSTAR"
    rule_params: dict = field(default_factory=dict)
    eval_points: tuple = (0.0,)
    master_seed: int = 0
    grid_points: int = 2**12
    grid_half_width: float = 256.0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 3):
            raise ContractError(f"n must be an integer >= 3, got {self.n!r}")
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ContractError(f"replications must be an integer >= 1, got {self.replications!r}")
        if self.bandwidth_rule not in RULES:
            raise ContractError(f"bandwidth_rule must be one of {RULES}, got {self.bandwidth_rule!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ContractError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "eval_points", tuple(float(x) for x in self.eval_points))
        if any(abs(x) >= self.grid_half_width for x in self.eval_points):
            raise ContractError("eval_points must lie inside the grid")

    @property
    def grid(self) -> Grid:
        return Grid(int(self.grid_points), float(self.grid_half_width))

    def with_(self, **changes) -> "ExperimentConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cls"] = self.cls.to_dict()
        out["eval_points"] = list(self.eval_points)
        return out


def replication_seed(master_seed: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(k),))


def draw_replication(config: ExperimentConfig, k: int, target=None, noise=None) -> np.ndarray:
    """Observations ``Y = X + eps`` of replication ``k``."""
    target = target_from_spec(config.target, config.cls) if target is None else target
    noise = noise_from_spec(config.noise) if noise is None else noise
    rng = np.random.default_rng(replication_seed(config.master_seed, k))
    x = target.sample(config.n, rng)
    eps = noise.sample(config.n, rng)
    return x + eps


def resolve_bandwidth(config: ExperimentConfig, noise=None) -> float:
    noise = noise_from_spec(config.noise) if noise is None else noise
    rule, params = config.bandwidth_rule, config.rule_params
    if rule == "HSTAR":
        return solve_hstar(config.cls, noise, config.n).h
    if rule == "ADAPTIVE":
        return adaptive_bandwidth(noise, config.n).h
    if rule == "ADAPTIVE_CRITICAL":
        if "A" not in params:
            raise ContractError("rule_params.A is required for ADAPTIVE_CRITICAL")
        return adaptive_bandwidth_critical(
            noise, config.n, float(params["A"]), float(params.get("alpha0", config.cls.alpha))
        ).h
    if "h" not in params:
        raise ContractError("rule_params.h is required for FIXED")
    h = float(params["h"])
    if not h > 0:
        raise ContractError(f"rule_params.h must be positive, got {h}")
    return h


@dataclass(frozen=True)
class RiskValue:
    value: float
    se: float


@dataclass(frozen=True)
class EmpiricalRisk:
    """Risk of the estimator at one fixed in-class density (not the class maximum)."""

    h: float
    n: int
    replications: int
    l2: RiskValue
    bias_sq_l2: RiskValue
    var_l2: RiskValue
    pointwise: tuple  # one dict per eval point: x, mse, se, bias_sq, bias_sq_se, var, var_se
    decomposition_residual: float
    truncation_mass: float
    label: str = "fixed-density risk"

    def pointwise_at(self, x: float) -> dict:
        for row in self.pointwise:
            if row["x"] == x:
                return row
        raise KeyError(x)

    def to_dict(self) -> dict:
        return asdict(self)


def _jackknife_se(values: np.ndarray) -> float:
    m = values.size
    if m < 2:
        return math.nan
    return float(math.sqrt((m - 1) / m * np.sum((values - values.mean()) ** 2)))


def _decompose(estimates: np.ndarray, truth: np.ndarray, weight: float):
    """MSE, bias^2 and variance of the columns of ``estimates`` with jackknife errors.

    ``weight`` multiplies the sums over columns (grid spacing for l2, 1 for a point).
    """
    R = estimates.shape[0]
    sq = np.sum((estimates - truth) ** 2, axis=1) * weight
    mse = float(sq.mean())
    mse_se = float(sq.std(ddof=1) / math.sqrt(R)) if R > 1 else math.nan
    mean = estimates.mean(axis=0)
    bias_sq = float(np.sum((mean - truth) ** 2) * weight)
    var = float(np.sum(np.mean((estimates - mean) ** 2, axis=0)) * weight)
    bias_se = var_se = math.nan
    if R > 1:
        loo_mean = (R * mean - estimates) / (R - 1)
        loo_bias = np.sum((loo_mean - truth) ** 2, axis=1) * weight
        second = np.sum(estimates**2, axis=0)
        loo_second = (second - estimates**2) / (R - 1)
        loo_var = np.sum(loo_second - loo_mean**2, axis=1) * weight
        bias_se, var_se = _jackknife_se(loo_bias), _jackknife_se(loo_var)
    return mse, mse_se, bias_sq, bias_se, var, var_se


def _tail_mass(target, x_max: float) -> float:
    """``P(|X| > x_max)`` from ``(2/pi) int_0^inf Phi(u) sin(u a)/u du``."""
    inside = quadrature(
        lambda u: target.cf(u).real * np.sinc(u * x_max / math.pi) * x_max,
        0.0, math.inf, tol=1e-9, max_panels=200_000, first_width=math.pi / x_max,
    )
    return max(0.0, 1.0 - 2.0 * inside / math.pi)


def run_paired(config: ExperimentConfig, bandwidths: dict, threads: int = 1) -> dict:
    """Risks for several bandwidths computed on the same replications.

    Returns ``{name: EmpiricalRisk}``; every arm sees identical observations.
    """
    target = target_from_spec(config.target, config.cls)
    noise = noise_from_spec(config.noise)
    grid = config.grid
    names = list(bandwidths)
    points = np.array(config.eval_points)

    def one(k):
        y = draw_replication(config, k, target, noise)
        out = []
        for name in names:
            est = estimate_density(y, noise, bandwidths[name], grid)
            out.append((est.values.real.copy(), est.at(points)))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(config.replications)))
    else:
        results = [one(k) for k in range(config.replications)]

    truth_grid = target.grid_density(grid).real
    du = grid.freq_spacing
    u = grid.u
    truth_pts = (np.exp(-1j * np.outer(points, u)) * target.cf(u)).sum(axis=1).real * du / (2 * math.pi)
    tail = _tail_mass(target, grid.x_max)
    report = {}
    for a, name in enumerate(names):
        F = np.stack([res[a][0] for res in results])
        P = np.stack([res[a][1] for res in results])
        mse, mse_se, b2, b2_se, var, var_se = _decompose(F, truth_grid, grid.spacing)
        rows = []
        for j, x in enumerate(points):
            pm, pm_se, pb, pb_se, pv, pv_se = _decompose(P[:, [j]], truth_pts[j], 1.0)
            rows.append({"x": float(x), "mse": pm, "se": pm_se, "bias_sq": pb, "bias_sq_se": pb_se, "var": pv, "var_se": pv_se})
        report[name] = EmpiricalRisk(
            h=float(bandwidths[name]),
            n=int(config.n),
            replications=int(config.replications),
            l2=RiskValue(mse, mse_se),
            bias_sq_l2=RiskValue(b2, b2_se),
            var_l2=RiskValue(var, var_se),
            pointwise=tuple(rows),
            decomposition_residual=abs(b2 + var - mse),
            truncation_mass=tail,
        )
    return report


def run_experiment(config: ExperimentConfig, threads: int = 1) -> EmpiricalRisk:
    h = resolve_bandwidth(config)
    return run_paired(config, {"main": h}, threads)["main"]


def _sweep_rows(config_base: ExperimentConfig, n_list: Sequence[int], threads: int) -> list:
    noise = noise_from_spec(config_base.noise)
    rows = []
    for n in n_list:
        cfg = config_base.with_(n=int(n))
        risk = run_experiment(cfg, threads)
        rate = rates(cfg.cls, noise, int(n)).l2
        rows.append({
            "n": int(n),
            "risk": risk.l2.value,
            "rate": rate,
            "ratio": risk.l2.value / rate,
            "mc_se": risk.l2.se,
            "bias_sq": risk.bias_sq_l2.value,
            "bias_bound": bias_bound_l2(cfg.cls, risk.h),
            "h": risk.h,
        })
    return rows


def rate_sweep(config_base: ExperimentConfig, n_list: Sequence[int], slack: float = 2.0, threads: int = 1) -> dict:
    """Empirical l2 risk against the l2 rate along ``n_list``.

    ``checks`` records whether every ratio is at most ``slack`` and whether
    the risk decreases by more than two combined standard errors at each step.
    ``slope`` regresses log risk on ``-2 alpha (log n / 2 beta)^{r/s}``.
    """
    noise = noise_from_spec(config_base.noise)
    rows = _sweep_rows(config_base, n_list, threads)
    cls = config_base.cls
    decreasing = all(
        a["risk"] - b["risk"] > 2.0 * math.hypot(a["mc_se"], b["mc_se"]) for a, b in zip(rows[:-1], rows[1:])
    )
    slope = math.nan
    if len(rows) >= 2:
        xs = [-2 * cls.alpha * (math.log(r["n"]) / (2 * noise.beta)) ** (cls.r / noise.s) for r in rows]
        slope = float(np.polyfit(xs, [math.log(r["risk"]) for r in rows], 1)[0])
    return {
        "rows": rows,
        "slope": slope,
        "checks": {"ratios_bounded": all(r["ratio"] <= slack for r in rows), "risk_decreasing": decreasing},
    }


def superefficiency_demo(config_base: ExperimentConfig, n_list: Sequence[int], threads: int = 1) -> dict:
    """Fixed-density risk over the class rate along ``n_list`` for a strictly interior target."""
    target = target_from_spec(config_base.target, config_base.cls)
    if not target.membership.integral < target.membership.bound:
        raise ContractError(
            f"target must lie strictly inside the class: energy {target.membership.integral:.6g} "
            f">= {target.membership.bound:.6g}"
        )
    rows = _sweep_rows(config_base, n_list, threads)
    for r in rows:
        r["ratio_se"] = r["mc_se"] / r["rate"]
    decreasing = all(
        a["ratio"] - b["ratio"] > 2.0 * math.hypot(a["ratio_se"], b["ratio_se"]) for a, b in zip(rows[:-1], rows[1:])
    )
    return {
        "rows": rows,
        "energy_margin": target.membership.bound - target.membership.integral,
        "checks": {"ratio_decreasing": decreasing, "ratio_positive": all(r["ratio"] > 0 for r in rows)},
    }


def adaptive_comparison(config_base: ExperimentConfig, n: int, slack: float = 0.5, threads: int = 1) -> dict:
    """Oracle ``h*`` against the adaptive bandwidth on shared samples.

    With ``r < s/2`` the adaptive arm should lose at most a factor ``1 + slack``.
    With ``r = s/2`` the boundary-case rule is added (``rule_params.A``) and
    its risk ratio is reported next to ``exp(alpha A/beta - alpha^2/beta)``.
    """
    cfg = config_base.with_(n=int(n))
    noise = noise_from_spec(cfg.noise)
    cls = cfg.cls
    ratio = cls.r / noise.s
    arms = {"hstar": solve_hstar(cls, noise, cfg.n).h}
    if ratio < 0.5 - 1e-12:
        arms["adaptive"] = adaptive_bandwidth(noise, cfg.n).h
        compare = "adaptive"
    elif abs(ratio - 0.5) <= 1e-12:
        if "A" not in cfg.rule_params:
            raise ContractError("rule_params.A is required when r = s/2")
        A = float(cfg.rule_params["A"])
        alpha0 = float(cfg.rule_params.get("alpha0", cls.alpha))
        arms["adaptive_critical"] = adaptive_bandwidth_critical(noise, cfg.n, A, alpha0).h
        compare = "adaptive_critical"
    else:
        raise ContractError(f"adaptive comparison needs r <= s/2, got r={cls.r}, s={noise.s}")
    risks = run_paired(cfg, arms, threads)
    x0 = cfg.eval_points[0]
    l2_ratio = risks[compare].l2.value / risks["hstar"].l2.value
    pw_ratio = risks[compare].pointwise_at(x0)["mse"] / risks["hstar"].pointwise_at(x0)["mse"]
    out = {
        "n": int(n),
        "bandwidths": arms,
        "risks": {k: v.to_dict() for k, v in risks.items()},
        "l2_ratio": l2_ratio,
        "pointwise_ratio": pw_ratio,
        "pointwise_x": x0,
    }
    if compare == "adaptive":
        out["checks"] = {"l2_within": l2_ratio <= 1 + slack, "pointwise_within": pw_ratio <= 1 + slack}
    else:
        out["theoretical_inflation"] = critical_inflation(cls.alpha, A, noise.beta)
    return out
