import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deconv.bandwidth import rates, solve_hstar
from deconv.fourier_grid import ContractError
from deconv.estimator import EstimatorOverflowError
from deconv.models import SmoothnessClass, gaussian_noise
from deconv.montecarlo import (
    ExperimentConfig,
    adaptive_comparison,
    draw_replication,
    rate_sweep,
    replication_seed,
    resolve_bandwidth,
    run_experiment,
    run_paired,
    superefficiency_demo,
)

CAUCHY_CLASS = SmoothnessClass(0.5, 1.0, 1 / math.pi)
G1 = gaussian_noise(1.0)
BASE = ExperimentConfig(
    target={"kind": "cauchy", "scale": 1.0},
    noise={"kind": "gaussian", "sigma": 1.0},
    cls=CAUCHY_CLASS,
    n=2000,
    replications=12,
    eval_points=(0.0, 1.5),
    master_seed=9,
)


def test_config_validation():
    with pytest.raises(ContractError):
        BASE.with_(n=2)
    with pytest.raises(ContractError):
        BASE.with_(replications=0)
    with pytest.raises(ContractError):
        BASE.with_(bandwidth_rule="HPLUS")
    with pytest.raises(ContractError):
        BASE.with_(eval_points=(300.0,))
    with pytest.raises(ContractError):
        BASE.with_(master_seed=2**64)


def test_resolve_bandwidth_rules():
    assert resolve_bandwidth(BASE) == solve_hstar(CAUCHY_CLASS, G1, BASE.n).h
    assert resolve_bandwidth(BASE.with_(bandwidth_rule="FIXED", rule_params={"h": 0.7})) == 0.7
    with pytest.raises(ContractError):
        resolve_bandwidth(BASE.with_(bandwidth_rule="FIXED"))
    with pytest.raises(ContractError):
        resolve_bandwidth(BASE.with_(bandwidth_rule="ADAPTIVE_CRITICAL"))


def test_replication_streams_are_independent_of_order():
    a = draw_replication(BASE, 5)
    draw_replication(BASE, 3)
    b = draw_replication(BASE, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draw_replication(BASE, 6))
    assert replication_seed(9, 5).spawn_key == (5,)


@settings(max_examples=10)
@given(st.integers(0, 2**63), st.integers(0, 1000))
def test_seed_derivation_is_pure(master, k):
    x = np.random.default_rng(replication_seed(master, k)).random(3)
    y = np.random.default_rng(replication_seed(master, k)).random(3)
    assert np.array_equal(x, y)


def test_same_seed_is_bitwise_identical_across_threads():
    a = run_experiment(BASE, threads=1)
    b = run_experiment(BASE, threads=4)
    assert a == b


def test_decomposition_identity():
    risk = run_experiment(BASE)
    assert risk.decomposition_residual < 1e-10
    assert risk.bias_sq_l2.value + risk.var_l2.value == pytest.approx(risk.l2.value, abs=1e-12)
    for row in risk.pointwise:
        assert row["bias_sq"] + row["var"] == pytest.approx(row["mse"], abs=1e-12)
    assert risk.pointwise_at(1.5)["x"] == 1.5
    assert risk.truncation_mass == pytest.approx(2 / math.pi * math.atan(1 / 256.0), rel=1e-4)


def test_paired_arms_see_same_samples():
    h = resolve_bandwidth(BASE)
    out = run_paired(BASE, {"a": h, "b": h})
    assert out["a"].l2 == out["b"].l2


def test_noiseless_sinc_estimator_is_accurate():
    cfg = BASE.with_(noise={"kind": "none"}, n=10**5, replications=5, bandwidth_rule="FIXED", rule_params={"h": 0.2})
    assert run_experiment(cfg).l2.value < 1e-3


def test_overflow_guard_aborts():
    cfg = BASE.with_(bandwidth_rule="FIXED", rule_params={"h": 0.02}, replications=1)
    with pytest.raises(EstimatorOverflowError):
        run_experiment(cfg)


def test_rate_column_matches_rates():
    out = rate_sweep(BASE.with_(replications=4), [10**3, 10**4])
    for row in out["rows"]:
        assert row["rate"] == rates(CAUCHY_CLASS, G1, row["n"]).l2
    assert set(out["checks"]) == {"ratios_bounded", "risk_decreasing"}


def test_rate_sweep_cauchy_ratios_bounded():
    out = rate_sweep(BASE.with_(replications=20), [10**3, 10**4, 10**5])
    assert out["checks"]["ratios_bounded"]
    assert out["checks"]["risk_decreasing"]


@pytest.mark.slow
def test_rate_sweep_slope_near_one_for_boundary_class():
    # a target on the class boundary keeps the risk at the class rate
    cls = SmoothnessClass(0.9, 1.0, 10.001 / (2 * math.pi))
    cfg = BASE.with_(cls=cls, replications=20, master_seed=3)
    out = rate_sweep(cfg, [10**3, 10**4, 10**5, 10**6], threads=4)
    assert abs(out["slope"] - 1) < 0.35


def test_superefficiency_requires_interior_target():
    with pytest.raises(ContractError, match="strictly inside"):
        superefficiency_demo(BASE, [10**3])


def test_adaptive_comparison_regime_checks():
    with pytest.raises(ContractError, match="r <= s/2"):
        adaptive_comparison(BASE.with_(cls=SmoothnessClass(0.3, 1.5, 5.0)), 10**4)
    with pytest.raises(ContractError, match="rule_params.A"):
        adaptive_comparison(BASE, 10**4)


def test_adaptive_comparison_boundary_case_reports_inflation():
    cfg = BASE.with_(replications=4, rule_params={"A": 1.2, "alpha0": 0.5})
    out = adaptive_comparison(cfg, 10**4)
    assert set(out["bandwidths"]) == {"hstar", "adaptive_critical"}
    assert out["theoretical_inflation"] == pytest.approx(math.exp(1.2 - 0.5), rel=1e-14)
    assert out["l2_ratio"] > 0
