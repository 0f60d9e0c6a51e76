from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracle_values import BOUND_POINTS, CONSTRUCTORS, HOEFFDING_100_100_01, ONE_MINUS_TWO_H2_005

from gbb84.sampling_bounds import (
    ProtocolParams,
    Variant,
    asymptotic_threshold,
    bound_bb84,
    bound_bb84_info_z,
    bound_efficient,
    bound_modified_efficient,
    code_failure_bound,
    h2,
    hoeffding_basis_count_bounds,
    hoeffding_partition_bound,
    info_z_curve,
    max_key_rate,
    mc_partition_tail,
    min_redundancy_fraction,
    nudge_eps,
    params_unchecked,
    rate_table_rows,
    security_bound,
    wilson_interval,
)


def bb84(n=10000, r=3500, m=2000, p_a=0.05, eps_sec=0.02, eps_rel=0.02, **kw):
    return ProtocolParams.bb84(n, r, m, p_a, eps_sec, eps_rel, **kw)


# -- entropy and Hoeffding pieces -------------------------------------------------------------


def test_h2_examples():
    assert h2(0.5) == 1.0
    assert h2(0.0) == 0.0 and h2(1.0) == 0.0
    assert h2(0.11) == pytest.approx(0.49991, abs=1e-4)
    with pytest.raises(ValueError):
        h2(1.5)


@given(st.floats(0.0, 1.0))
def test_h2_symmetric_and_bounded(x):
    assert 0.0 <= h2(x) <= 1.0
    assert h2(x) == pytest.approx(h2(1.0 - x), abs=1e-12)


def test_hoeffding_partition_examples():
    n, eps = 400, 0.05
    assert hoeffding_partition_bound(n, n, eps) == pytest.approx(math.exp(-0.5 * n * eps * eps), rel=1e-15)
    assert hoeffding_partition_bound(10, 30, 0.0) == 1.0
    assert hoeffding_partition_bound(100, 100, 0.1) == pytest.approx(HOEFFDING_100_100_01, rel=1e-14)
    with pytest.raises(ValueError):
        hoeffding_partition_bound(0, 5, 0.1)


def test_basis_count_bounds_examples():
    a, b = hoeffding_basis_count_bounds(64, 0.5)
    assert a == b == pytest.approx(math.exp(-64 / 8), rel=1e-15)
    assert hoeffding_basis_count_bounds(0, 0.3) == (1.0, 1.0)
    a, b = hoeffding_basis_count_bounds(100, 0.3)
    assert a == pytest.approx(math.exp(-24.5), rel=1e-14)
    assert b == pytest.approx(math.exp(-4.5), rel=1e-14)
    with pytest.raises(ValueError):
        hoeffding_basis_count_bounds(10, 0.7)


def test_wilson_interval_basics():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.07
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert hi - 0.5 == pytest.approx(0.5 - lo)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_partition_tail_all_zero_string(rng):
    est = mc_partition_tail(20, 20, 0.2, 0.2, 2000, rng, weights=[0])
    assert est.estimate == 0.0


def test_partition_tail_all_one_string(rng):
    est = mc_partition_tail(20, 20, 0.2, 0.2, 2000, rng, weights=[40])
    assert est.estimate == 0.0


def test_partition_tail_sweep_below_bound(rng):
    est = mc_partition_tail(20, 20, 0.2, 0.2, 20_000, rng)
    assert est.bound == pytest.approx(math.exp(-0.4), rel=1e-14)
    assert est.within_bound
    assert 0 <= est.weight <= 40


# -- parameter validation -------------------------------------------------------------------


def test_variant_parse():
    assert Variant.parse("BB84_info_z") is Variant.BB84_INFO_Z
    with pytest.raises(ValueError):
        Variant.parse("b92")


def test_integrality_is_enforced_and_nudged():
    with pytest.raises(ValueError, match="not an integer"):
        bb84(n=1000, r=300, m=100, p_a=0.05, eps_sec=0.0205, eps_rel=0.02)
    eps = nudge_eps(1000, 0.05, 0.0205)
    assert eps >= 0.0205
    assert 1000 * (0.05 + eps) == pytest.approx(71)
    p = params_unchecked(variant="bb84", N=2000, n=1000, r=300, m=100, p_a=0.05, eps_sec=0.0205, eps_rel=0.02)
    assert p.nudged().with_(check_integrality=True).eps_sec == pytest.approx(eps)


@pytest.mark.parametrize(
    "build",
    [
        lambda: bb84(r=6000, m=5000),  # r + m > n
        lambda: bb84(p_a=0.49, eps_sec=0.02),  # threshold + eps > 1/2
        lambda: ProtocolParams.efficient(100, 40, 10, 0.5, 30, 10, 0.05, 0.05, 0.05),  # n_z >= pN/2
        lambda: ProtocolParams.modified_efficient(10, 0, 5, 5, 2, 2, 0.1, 0.1, 0.1),  # t_x = 0
        lambda: ProtocolParams.bb84_info_z(100, 0, 50, 30, 10, 0.05, 0.05, 0.05, 0.05),  # n_z = 0
    ],
)
def test_invalid_params_rejected(build):
    with pytest.raises(ValueError):
        build()


# -- bound formulas --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "variant,idx", [(v, i) for v, pts in BOUND_POINTS.items() for i in range(len(pts))]
)
def test_bounds_match_independent_evaluation(variant, idx):
    kwargs, expected = BOUND_POINTS[variant][idx]
    params = CONSTRUCTORS[variant](**kwargs)
    assert security_bound(params).total == pytest.approx(expected, rel=1e-12)


def test_bound_structure_and_key_rate():
    b = bound_bb84(bb84())
    rel = sum(v for _, v in b.reliability_terms)
    sec = sum(v for _, v in b.secrecy_terms_under_radical)
    assert b.total == pytest.approx(rel + 2 * 2000 * math.sqrt(sec), rel=1e-15)
    assert b.key_rate == 0.2
    assert [lbl for lbl, _ in b.reliability_terms] == ["hoeffding_rel", "code_rel"]


def test_dropping_m_factor_is_labelled_option():
    p = bb84()
    with_m = security_bound(p)
    without = security_bound(p, include_m_factor=False)
    assert with_m.secrecy == pytest.approx(p.m * without.secrecy, rel=1e-15)


def test_zero_exponent_code_term_is_one():
    # n(p_az + eps_rel) = 110 and r chosen so that the code exponent is exactly zero
    n = 1000
    params = params_unchecked(variant="bb84", N=2 * n, n=n, r=0, m=0, p_a=0.09, eps_sec=0.02, eps_rel=0.02)
    assert code_failure_bound(n, 0.0, 0) == 1.0
    b = bound_bb84(params)
    # with r = 0 the code term is 2^{n H2(0.11)}, finite and huge but not overflowing
    assert math.isfinite(b.log_reliability_terms[1][1])


@pytest.mark.parametrize("variant", list(BOUND_POINTS))
def test_m_zero_leaves_reliability_only(variant):
    kwargs, _ = BOUND_POINTS[variant][0]
    params = CONSTRUCTORS[variant](**{**kwargs, "m": 0})
    b = security_bound(params)
    assert b.secrecy == 0.0
    assert b.total == b.reliability


@pytest.mark.parametrize(
    "p_a,eps,rf,mf,n",
    [(0.05, 0.02, 0.35, 0.2, 10000), (0.03, 0.02, 0.3, 0.3, 2000), (0.02, 0.01, 0.25, 0.5, 50000),
     (0.1, 0.05, 0.7, 0.05, 4000), (0.01, 0.01, 0.2, 0.6, 1000)],
)
def test_bb84_is_info_z_with_equal_sizes(p_a, eps, rf, mf, n):
    r, m = int(rf * n), int(mf * n)
    plain = bound_bb84(bb84(n=n, r=r, m=m, p_a=p_a, eps_sec=eps, eps_rel=eps))
    info = bound_bb84_info_z(ProtocolParams.bb84_info_z(n, n, n, r, m, p_a, p_a, eps, eps))
    assert plain.total == pytest.approx(info.total, rel=1e-13)


def test_efficient_symmetric_terms_pair_up():
    kwargs, _ = BOUND_POINTS["efficient"][0]
    b = bound_efficient(ProtocolParams.efficient(**kwargs))
    rel = dict(b.reliability_terms)
    sec = dict(b.secrecy_terms_under_radical)
    assert rel["basis_count_z"] == rel["basis_count_x"]
    assert rel["hoeffding_rel_z"] == rel["hoeffding_rel_x"]
    assert sec["hoeffding_sec_z"] == sec["hoeffding_sec_x"]


def test_modified_symmetric_terms_pair_up():
    kwargs, _ = BOUND_POINTS["modified-efficient"][0]
    b = bound_modified_efficient(ProtocolParams.modified_efficient(**kwargs))
    rel = dict(b.reliability_terms)
    sec = dict(b.secrecy_terms_under_radical)
    assert rel["hoeffding_rel_z"] == rel["hoeffding_rel_x"]
    assert sec["hoeffding_sec_z"] == sec["hoeffding_sec_x"]


def test_wrong_variant_rejected():
    with pytest.raises(ValueError):
        bound_efficient(bb84())


def test_large_blocks_do_not_overflow():
    p = bb84(n=10_000_000, r=3_500_000, m=2_000_000)
    b = security_bound(p)
    assert all(math.isfinite(lv) for _, lv in b.log_reliability_terms + b.log_secrecy_terms)
    assert b.secrecy_terms_under_radical[0][1] == 0.0  # underflows, log kept alongside


# Points where the bound is meaningful (total < 1). With m/n held fixed the 2m
# prefactor grows linearly in n, so below this regime the total can rise with n.
MEANINGFUL = {
    "bb84": dict(n=1_000_000, r=450_000, m=100_000, p_a=0.05, eps_sec=0.02, eps_rel=0.02),
    "bb84-info-z": dict(n=1_000_000, n_z=500_000, n_x=500_000, r=450_000, m=100_000, p_az=0.05, p_ax=0.05,
                        eps_sec=0.02, eps_rel=0.02),
    "efficient": dict(n=1_000_000, n_z=400_000, n_x=400_000, p=0.5, r=480_000, m=20_000, p_a=0.01,
                      eps_sec=0.08, eps_rel=0.08),
    "modified-efficient": dict(t_z=500_000, t_x=500_000, n_z=500_000, n_x=500_000, r=450_000, m=100_000,
                               p_a=0.05, eps_sec=0.02, eps_rel=0.02),
}


@pytest.mark.parametrize("variant", list(MEANINGFUL))
def test_bound_monotone_in_n_m_and_threshold(variant):
    kwargs = MEANINGFUL[variant]
    base = CONSTRUCTORS[variant](**kwargs)
    b0 = security_bound(base).total
    assert b0 < 1

    for factor in (2, 3, 5):
        scaled = {k: (v * factor if isinstance(v, int) else v) for k, v in kwargs.items()}
        assert security_bound(CONSTRUCTORS[variant](**scaled)).total <= b0

    for extra in (1, 1000, 10_000):
        assert security_bound(base.with_(m=base.m + extra)).total >= b0

    field = "p_ax" if variant == "bb84-info-z" else "p_a"
    for bump in (0.001, 0.01, 0.02):
        bumped = base.with_(**{field: getattr(base, field) + bump}, check_integrality=False)
        assert security_bound(bumped).total >= b0


# -- asymptotics --------------------------------------------------------------------------


def test_asymptotic_threshold_bb84():
    root = asymptotic_threshold("bb84")
    assert root == pytest.approx(0.110028, abs=1e-4)
    assert abs(2 * h2(root) - 1) <= 1e-8
    for v in ("efficient", "modified-efficient"):
        assert asymptotic_threshold(v) == root


def test_asymptotic_threshold_info_z():
    root = asymptotic_threshold("bb84")
    assert asymptotic_threshold("bb84-info-z", p_az=root) == pytest.approx(root, abs=1e-9)
    assert asymptotic_threshold("bb84-info-z", p_az=0.0) == 0.5
    with pytest.raises(ValueError):
        asymptotic_threshold("bb84-info-z")


def test_curve_points_lie_on_boundary():
    pts = info_z_curve(51)
    assert pts[0] == (0.0, 0.5)
    assert pts[-1][0] == 0.5 and pts[-1][1] == pytest.approx(0.0, abs=1e-9)
    for a, x in pts:
        assert h2(a) + h2(x) == pytest.approx(1.0, abs=1e-9)


def test_max_key_rate_examples():
    assert max_key_rate("bb84", 0.0, 0.0, 0.0) == 1.0
    assert max_key_rate("bb84", 0.11, 0.0, 0.0) == pytest.approx(0.0, abs=2e-4)
    assert max_key_rate("bb84", 0.05, 0.0, 0.0) == pytest.approx(ONE_MINUS_TWO_H2_005, abs=1e-12)
    assert max_key_rate("bb84", 0.3, 0.0, 0.0) == 0.0
    assert max_key_rate("bb84-info-z", (0.0, 0.11), 0.0, 0.0) == pytest.approx(1 - h2(0.11))


def test_min_redundancy_and_rate_table():
    p = bb84()
    frac = min_redundancy_fraction(p)
    assert frac > h2(0.07) and frac - 1e-3 <= h2(0.07)
    rows = rate_table_rows(p, [0.4, 0.5], [0.1, 0.2, 0.6])
    assert {(r["r_over_n"], r["m_over_n"]) for r in rows} == {(0.4, 0.1), (0.4, 0.2), (0.4, 0.6), (0.5, 0.1), (0.5, 0.2)}
    assert set(rows[0]) == {"n", "p_a", "eps_sec", "eps_rel", "r_over_n", "m_over_n", "total_bound", "key_rate"}
    again = security_bound(p.with_(r=4000, m=1000)).total
    assert rows[0]["total_bound"] == again


def test_basis_count_bounds_against_bernoulli(rng):
    N, p = 200, 0.3
    ones = rng.binomial(N, 1 - p, size=100_000)
    frac_b = np.mean(ones <= (1 - p) * N / 2)
    frac_bbar = np.mean(N - ones <= p * N / 2)
    bb, bbar = hoeffding_basis_count_bounds(N, p)
    assert frac_b <= bb + 1e-3 and frac_bbar <= bbar + 1e-3
