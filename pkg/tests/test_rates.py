"""Rate-function construction, structural-condition scans, prefix sums."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zrp import ConfigError, build_family, check_conditions
from zrp.rates import RateFunction, load_user_table


def brute_force_conditions(c_vals, k0):
    """O(cap^2) oracle for the increment sup and the pairwise gap min."""
    c = np.asarray(c_vals, dtype=float)
    cap = len(c) - 1
    a1 = max(abs(c[k + 1] - c[k]) for k in range(cap))
    gaps = [
        c[k] - c[j]
        for j in range(cap + 1)
        for k in range(j + k0, cap + 1)
    ]
    a2 = min(gaps) if gaps else np.inf
    A0 = max(max(c[k] / k, k / c[k]) for k in range(1, cap + 1))
    return a1, a2, A0


def test_log_c_factorial_identity_rate():
    c = build_family("linear")
    # c(k)! = k!, so F(5) = log 120.
    assert c.log_c_factorial(5) == pytest.approx(math.log(120.0), abs=1e-13)
    assert c.log_c_factorial(0) == 0.0


def test_log_c_factorial_scaled_rate():
    c = build_family("scaled_linear", (2.0,))
    # c(k)! = 2^k k!; at k = 3 that is 2*4*6 = 48.
    assert c.log_c_factorial(3) == pytest.approx(math.log(48.0), abs=1e-13)


def test_linear_constants():
    c = build_family("linear", scan_cap=100)
    assert c.a1 == pytest.approx(1.0)
    assert c.k0 == 1
    assert c.a2 == pytest.approx(1.0)
    assert c.A0 == pytest.approx(1.0)


def test_parity_perturbed_constants_match_brute_force():
    c = build_family("parity_perturbed", (0.5,), scan_cap=2000)
    a1, a2, A0 = brute_force_conditions(c.values(400), k0=2)
    assert c.a1 == pytest.approx(a1) == pytest.approx(1.5)
    assert c.k0 == 2
    # Same-parity pairs at distance 2 give exactly 2; nothing smaller exists.
    assert c.a2 == pytest.approx(a2) == pytest.approx(2.0)
    assert c.A0 == pytest.approx(A0) == pytest.approx(1.5)


def test_parity_perturbed_values():
    c = build_family("parity_perturbed", (0.5,))
    assert list(c.values(5)) == [0.0, 1.5, 2.0, 3.5, 4.0, 5.5]


def test_pure_exclusion_rejected():
    # c(k) = 1{k>0} has bounded increments but no uniform increase.
    with pytest.raises(ConfigError):
        build_family("user_table", (1.0,) * 64)


def test_condition_report_for_exclusion_table():
    rate = RateFunction("user_table", (1.0,) * 64, table=(0.0,) + (1.0,) * 64)
    rep = check_conditions(rate, scan_cap=64)
    assert rep.lg_holds
    assert rep.measured_a1 == pytest.approx(1.0)
    assert not rep.m_holds


def test_user_table_zero_entry_rejected():
    with pytest.raises(ConfigError):
        build_family("user_table", (0.0, 1.0, 2.0))


def test_user_table_k0_search():
    # A table that dips every third entry: needs k0 > 1.
    vals = tuple(k - 0.9 * (k % 3 == 0) for k in range(1, 200))
    c = build_family("user_table", vals)
    rep = check_conditions(c)
    assert rep.m_holds
    a1, a2, _ = brute_force_conditions(c.values(60), k0=rep.k0)
    assert rep.measured_a2 == pytest.approx(min(a2, gap_tail(vals, rep.k0)))


def gap_tail(vals, k0):
    c = np.concatenate([[0.0], np.asarray(vals)])
    return min(
        c[k] - c[j]
        for j in range(len(c))
        for k in range(j + k0, len(c))
    )


def test_user_table_cannot_extend():
    c = build_family("user_table", tuple(float(k) for k in range(1, 50)))
    with pytest.raises(ConfigError):
        c.c(50)


def test_h_values():
    c = build_family("parity_perturbed", (0.5,))
    assert c.h(0) == pytest.approx(1.0 / 1.5)
    assert c.h(1) == pytest.approx(2.0 / 2.0)
    hv = c.h_values(10)
    assert hv[0] == pytest.approx(1.0 / 1.5)
    # h is bounded by A0 for every near-linear rate.
    assert np.all(hv <= c.A0 + 1e-12)


def test_unknown_family_rejected():
    with pytest.raises(ConfigError):
        build_family("quadratic")


def test_negative_slope_rejected():
    with pytest.raises(ConfigError):
        build_family("linear", (-1.0,))


def test_cache_extension_consistency():
    c = build_family("parity_perturbed", (0.25,))
    f_small = c.log_c_factorial(10)
    c.ensure(5000)
    # Extension must not disturb previously computed prefix sums.
    assert c.log_c_factorial(10) == f_small
    direct = float(np.sum(np.log(c.values(5000)[1:])))
    assert c.log_c_factorial(5000) == pytest.approx(direct, rel=1e-13)


def test_load_user_table(tmp_path):
    p = tmp_path / "table.txt"
    p.write_text("# rates\n1.0\n2.0\n3.0\n4.0\n5.0\n6.0\n7.0\n8.0\n")
    c = load_user_table(p)
    assert c.c(3) == 3.0
    assert c.cached_cap == 8


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(min_value=0.1, max_value=8.0), k=st.integers(min_value=1, max_value=60))
def test_prefix_sum_additivity(lam, k):
    c = build_family("scaled_linear", (lam,), scan_cap=200)
    # F(k) - F(k-1) = log c(k) exactly by construction.
    assert c.log_c_factorial(k) - c.log_c_factorial(k - 1) == pytest.approx(
        math.log(lam * k), abs=1e-10
    )


@settings(max_examples=20, deadline=None)
@given(b=st.floats(min_value=0.0, max_value=0.9))
def test_parity_constants_formula(b):
    c = build_family("parity_perturbed", (b,), scan_cap=500)
    a1, a2, A0 = brute_force_conditions(c.values(50), k0=2)
    assert c.a1 == pytest.approx(a1, abs=1e-12)
    assert c.a2 == pytest.approx(a2, abs=1e-12)
    assert c.A0 == pytest.approx(A0, abs=1e-12)
