import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deconv.bandwidth import rates, solve_hplus
from deconv.fourier_grid import ContractError, Grid
from deconv.lower_bound import (
    PairRejected,
    bracket_factor,
    build_pair,
    build_phi_g,
    chi2_divergence,
    lower_bound_certificate,
    lower_bound_sweep,
    perturbation_cf,
    perturbation_l2,
    perturbation_pointwise,
    replace_pair,
    separation,
    two_point_risk_bound,
    weighted_energy,
)
from deconv.models import SmoothnessClass, gaussian_noise

from oracles import smoothed_indicator

CLS = SmoothnessClass(0.5, 1.0, 1 / math.pi)
G1 = gaussian_noise(1.0)


@pytest.fixture(scope="module")
def pair():
    return build_pair(CLS, G1, 10**6, c0=10.0)


@pytest.fixture(scope="module")
def pair_l2():
    return build_pair(CLS, G1, 10**6, kind="l2", c0=10.0)


def test_phi_g_plateau_and_support():
    g = build_phi_g(0.5, 4.0)
    assert float(g(2.0)) == 1.0
    assert float(g(0.4)) == 0.0 and float(g(0.0)) == 0.0
    assert float(g(3.6)) == 0.0


@pytest.mark.parametrize("u", [0.6, 0.75, 0.9, 1.2, 2.5, 3.2, 3.4])
def test_phi_g_matches_irwin_hall_convolution(u):
    assert float(build_phi_g(0.5, 4.0)(u)) == pytest.approx(smoothed_indicator(u, 0.5, 4.0), abs=1e-14)


def test_phi_g_sandwich_on_grid():
    g = build_phi_g(0.5, 4.0)
    u = g.values.grid.x
    v = g.values.real
    lower = ((u >= 1.0) & (u <= 3.0)).astype(float)
    upper = ((u >= 0.5) & (u <= 3.5)).astype(float)
    assert np.sum(v < lower) == 0
    assert np.sum(v > upper) == 0


def test_phi_g_monotone_on_ramps():
    g = build_phi_g(0.5, 4.0)
    up = g(np.linspace(0.5, 1.0, 500))
    down = g(np.linspace(3.0, 3.5, 500))
    assert np.all(np.diff(up) >= 0)
    assert np.all(np.diff(down) <= 0)


def test_phi_g_fourth_difference_is_bounded():
    coarse = build_phi_g(0.5, 4.0).smoothness_witness()
    fine = build_phi_g(0.5, 4.0, Grid(2**14, 8.0)).smoothness_witness()
    assert fine == pytest.approx(coarse, rel=0.05)


def test_phi_g_parameter_errors():
    with pytest.raises(ContractError):
        build_phi_g(0.5, 2.0)
    with pytest.raises(ContractError):
        build_phi_g(0.0, 2.0)


def test_perturbation_vanishes_at_origin():
    for kind, g in (("pointwise", build_phi_g(0.1, 2.0)), ("l2", build_phi_g(0.25, 2.0))):
        for h in (0.2, 0.3):
            assert perturbation_cf(CLS, h, g, kind)(np.array([0.0]))[0] == 0


def test_perturbation_plateau_value(pair):
    h = pair.h
    u = 1 / h + 0.2
    expected = math.sqrt(2 * math.pi * 0.5 * CLS.L) * math.exp(-0.5 / h) * math.exp(-4 * 0.5 * 0.1)
    assert pair.perturbation(np.array([u]))[0].real == pytest.approx(expected, rel=1e-13)


def test_weighted_energy_pointwise(pair):
    budget = 2 * math.pi * CLS.L * math.exp(-2 * 0.5 * 0.1)
    assert weighted_energy(pair, CLS) <= budget * 1.2


def test_weighted_energy_l2(pair_l2):
    d = 0.25**-0.5
    budget = 2 * math.pi * CLS.L * math.exp(-2 * 0.5 * (d - 1) * 0.25)
    assert weighted_energy(pair_l2, CLS) <= budget * 1.2


def test_l2_construction_needs_small_delta():
    with pytest.raises(ContractError):
        perturbation_cf(CLS, 0.3, build_phi_g(1.0, 5.0), "l2")


def test_gridded_perturbations_vanish_at_origin():
    g = build_phi_g(0.1, 2.0)
    h = solve_hplus(CLS, G1, 10**6).h
    for gp in (perturbation_pointwise(CLS, h, g), perturbation_l2(CLS, h, build_phi_g(0.25, 2.0))):
        assert gp.values[gp.grid.n_points // 2] == 0


def test_pair_cf_identities(pair):
    mid = pair.grid.n_points // 2
    phi0 = pair.f0.cf(pair.grid.u)
    assert np.allclose((pair.f1_cf + pair.f2_cf).values, 2 * phi0, rtol=0, atol=1e-16)
    assert pair.f1_cf.values[mid] == 1 and pair.f2_cf.values[mid] == 1


def test_pair_validity(pair):
    for f in (pair.f1, pair.f2):
        assert np.min(f.real) >= 0
        assert f.integral().real == pytest.approx(1.0, abs=1e-5)
    assert pair.diagnostics["f1_energy"] <= 2 * math.pi * CLS.L


def test_default_pair_rejected_at_1e6():
    # golden outcome: the default center is too narrow for positivity at this n
    with pytest.raises(PairRejected, match="n too small or c0 too small") as info:
        build_pair(CLS, G1, 10**6)
    assert info.value.diagnostics["f1_min"] == pytest.approx(-3.2e-4, rel=0.01)


def test_c0_lower_limit():
    with pytest.raises(ContractError, match="c0"):
        build_pair(CLS, G1, 10**6, c0=0.4)


def test_bracket_factors():
    assert bracket_factor("pointwise", 0.5, 0.1, 2.0) == pytest.approx(math.exp(-0.2) - math.exp(-1.8), rel=1e-15)
    assert bracket_factor("pointwise", 0.5, 0.1, 2.0) == pytest.approx(0.65343, abs=1e-5)
    assert bracket_factor("l2", 0.5, 0.25, 2.0) == pytest.approx(math.sqrt(0.5 * (math.exp(-1) - math.exp(-3))), rel=1e-14)
    assert bracket_factor("l2", 0.5, 0.25, 2.0) == pytest.approx(0.398806, abs=1e-6)


def test_identical_pair_has_zero_separation_and_chi2(pair):
    zero = replace_pair(pair, lambda u: np.zeros(np.shape(u)) + 0j)
    assert separation(zero, CLS, G1, 10**6).measured == 0
    rep = chi2_divergence(zero, G1, 10**6)
    assert rep.chi2 == 0 and rep.n_chi2 == 0


def test_swapped_pair_has_same_separation(pair):
    a = separation(pair, CLS, G1, 10**6).measured
    b = separation(pair.swapped(), CLS, G1, 10**6).measured
    assert a == pytest.approx(b, rel=1e-12)


def test_separation_matches_grid_difference(pair):
    sep = separation(pair, CLS, G1, 10**6)
    mid = pair.grid.n_points // 2
    grid_gap = abs(pair.f1.real[mid] - pair.f2.real[mid])
    assert sep.measured == pytest.approx(grid_gap, rel=1e-6)


def test_tn1_parseval_routes_agree(pair):
    rep = chi2_divergence(pair, G1, 10**6)
    assert rep.t_n1 == pytest.approx(rep.t_n1_parseval, rel=1e-6)


def test_chi2_product_is_exact_tensorization(pair):
    rep = chi2_divergence(pair, G1, 10**6)
    assert rep.chi2_product == pytest.approx((1 + rep.chi2) ** 10**6 - 1, rel=1e-6)
    assert rep.chi2_product >= rep.n_chi2


def test_two_point_bound():
    assert two_point_risk_bound(1.0, 0.25) == 0.375
    assert two_point_risk_bound(2.0, 0.09) == pytest.approx(1.274, rel=1e-14)
    assert two_point_risk_bound(1.0, 1e-12) == pytest.approx(1.0, abs=1e-5)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ContractError):
            two_point_risk_bound(1.0, bad)


@given(st.floats(1e-6, 0.999), st.floats(1e-6, 0.999))
def test_two_point_bound_decreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    assert two_point_risk_bound(1.0, hi) <= two_point_risk_bound(1.0, lo)


def test_two_point_bound_near_psi_for_tiny_gamma():
    assert two_point_risk_bound(3.0, 1e-4) >= 0.98 * 3.0


@pytest.mark.xfail(strict=True, reason="gamma0 = sqrt(n chi2) = 0.01 leaves factor 0.99 * 0.9 = 0.891")
def test_two_point_bound_within_two_percent_once_n_chi2_below_1e4():
    assert two_point_risk_bound(3.0, math.sqrt(0.99e-4)) >= 0.98 * 3.0


def test_certificate_reports_failing_stage():
    rep = lower_bound_certificate(CLS, G1, 10**6)
    assert not rep["ok"]
    assert rep["failed_stage"] == "build_pair"
    assert "diagnostics" in rep


def test_certificate_consistency():
    for n in (10**6, 10**8, 10**12):
        rep = lower_bound_certificate(CLS, G1, n, c0=10.0)
        assert rep["ok"]
        assert rep["certified_floor"] <= rep["rate"]
        assert rep["rate"] == pytest.approx(math.sqrt(rates(CLS, G1, n).pointwise), rel=1e-14)


def test_floor_ratio_increases_towards_bracket():
    ratios = [lower_bound_certificate(CLS, G1, n, c0=10.0)["floor_over_rate"] for n in (10**6, 10**8, 10**12)]
    assert ratios[0] < ratios[1] < ratios[2] < 0.65343


def test_sweep_reports_smallest_valid_n():
    out = lower_bound_sweep(CLS, G1, [10**4, 10**8, 10**12], threads=2)
    assert out["smallest_valid_n"] == 10**12
    assert [r["n"] for r in out["rows"]] == [10**12]
    assert [r["n"] for r in out["reports"]] == [10**4, 10**8, 10**12]


def test_n_chi2_decreasing_with_wide_center():
    values = [chi2_divergence(build_pair(CLS, G1, n, c0=10.0), G1, n).n_chi2 for n in (10**6, 10**8, 10**12)]
    assert values[0] > values[1] > values[2]
