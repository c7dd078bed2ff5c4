"""State enumeration, generators, gaps, entropy ascent, count chains."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eig

from zrp import build_family
from zrp.errors import CapExceededError
from zrp.gamma import gamma_canonical, gamma_product
from zrp.spectral import (
    BirthDeathChain,
    bd_dirichlet,
    bd_from_gamma,
    bd_lsi_exact,
    bd_lsi_scan,
    build_generator,
    cmr_bound,
    compare_dom,
    dirichlet,
    entropy,
    enumerate_states,
    lsi_estimate,
    spectral_gap,
)


def brute_cmr(g):
    """Direct linear-arithmetic evaluation of the Hardy-type criterion."""
    g = np.asarray(g, dtype=float)
    N = len(g) - 1
    Nbar = math.ceil(N / 2)
    B0m = 0.0
    for n in range(Nbar):
        head = g[: n + 1].sum()
        inv = sum(1.0 / min(g[k], g[k + 1]) for k in range(n, Nbar))
        if 0 < head < 1:
            B0m = max(B0m, head * math.log(1.0 / head) * inv)
    B0p = 0.0
    for n in range(Nbar + 1, N + 1):
        tail = g[n:].sum()
        inv = sum(1.0 / min(g[k], g[k - 1]) for k in range(Nbar + 1, n + 1))
        if 0 < tail < 1:
            B0p = max(B0p, tail * math.log(1.0 / tail) * inv)
    return B0m, B0p


class TestEnumeration:
    def test_two_site_order(self):
        sp = enumerate_states(2, 1, 3)
        assert sp.size == 4
        assert [tuple(s) for s in sp.states] == [(3, 0), (2, 1), (1, 2), (0, 3)]

    def test_counts(self):
        assert enumerate_states(3, 1, 2).size == 6
        assert enumerate_states(2, 2, 2).size == 10

    def test_rank_unrank_inverse(self):
        sp = enumerate_states(3, 1, 4)
        for r in range(sp.size):
            eta = sp.unrank(r)
            assert sp.rank(eta) == r
            assert tuple(eta) == tuple(sp.states[r])

    def test_cap(self):
        with pytest.raises(CapExceededError):
            enumerate_states(6, 2, 30, cap=1000)

    def test_neighbor_pairs_2d(self):
        sp = enumerate_states(2, 2, 1)
        # 4 sites in a square: each has 2 neighbors, 8 ordered pairs.
        assert len(sp.neighbor_pairs) == 8


class TestGenerator:
    def test_row_sums_vanish(self):
        c = build_family("parity_perturbed", (0.5,))
        gen = build_generator(enumerate_states(3, 1, 4), c)
        rs = np.asarray(gen.Q.sum(axis=1)).ravel()
        assert np.max(np.abs(rs)) < 1e-12

    def test_detailed_balance(self):
        for fam, params in (("linear", ()), ("parity_perturbed", (0.5,))):
            c = build_family(fam, params)
            gen = build_generator(enumerate_states(3, 1, 5), c)
            assert gen.detailed_balance_residual() < 1e-12

    def test_stationarity(self):
        c = build_family("scaled_linear", (2.0,))
        gen = build_generator(enumerate_states(2, 2, 3), c)
        # pi Q = 0 for the canonical law.
        resid = gen.pi @ gen.Q.toarray()
        assert np.max(np.abs(resid)) < 1e-12

    def test_dirichlet_two_state_value(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(2, 1, 1), c)
        f = np.array([1.0, 0.0])
        # Two transitions of rate 1 and weight 1/2 with the 1/2 prefactor.
        assert dirichlet(gen, f) == pytest.approx(0.5, abs=1e-14)

    def test_dirichlet_equals_generator_route(self):
        c = build_family("parity_perturbed", (0.5,))
        gen = build_generator(enumerate_states(3, 1, 4), c)
        rng = np.random.default_rng(7)
        for _ in range(5):
            f = rng.standard_normal(gen.space.size)
            g = rng.standard_normal(gen.space.size)
            via_form = dirichlet(gen, f, g)
            via_gen = -float(gen.pi @ (f * (gen.Q @ g)))
            assert via_form == pytest.approx(via_gen, abs=1e-10)


class TestEntropy:
    def test_two_point_value(self):
        lw = np.log(np.array([0.5, 0.5]))
        assert entropy(lw, np.array([2.0, 0.0])) == pytest.approx(math.log(2.0))

    def test_nonnegative_and_homogeneous(self):
        rng = np.random.default_rng(3)
        lw = np.log(rng.dirichlet(np.ones(6)))
        f = rng.uniform(0.1, 4.0, size=6)
        e = entropy(lw, f)
        assert e >= 0.0
        assert entropy(lw, 3.0 * f) == pytest.approx(3.0 * e, rel=1e-12)

    def test_constant_has_zero_entropy(self):
        lw = np.log(np.ones(4) / 4)
        assert entropy(lw, np.full(4, 2.5)) == pytest.approx(0.0, abs=1e-15)


class TestSpectralGap:
    def test_two_site_single_particle(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(2, 1, 1), c)
        assert spectral_gap(gen) == pytest.approx(2.0, abs=1e-10)

    def test_two_site_any_N(self):
        c = build_family("linear")
        for N in range(1, 11):
            gen = build_generator(enumerate_states(2, 1, N), c)
            assert spectral_gap(gen) == pytest.approx(2.0, abs=1e-8)

    def test_three_site_walk(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(3, 1, 1), c)
        assert spectral_gap(gen) == pytest.approx(2.0 * (1.0 - math.cos(math.pi / 3)), abs=1e-10)

    def test_rate_scaling(self):
        c2 = build_family("scaled_linear", (2.0,))
        gen = build_generator(enumerate_states(3, 1, 3), c2)
        c1 = build_family("linear")
        gen1 = build_generator(enumerate_states(3, 1, 3), c1)
        assert spectral_gap(gen) == pytest.approx(2.0 * spectral_gap(gen1), rel=1e-9)

    def test_matches_nonsymmetric_eig(self):
        c = build_family("parity_perturbed", (0.5,))
        gen = build_generator(enumerate_states(3, 1, 3), c)
        vals = eig(gen.Q.toarray(), left=False, right=False)
        real = np.sort(-vals.real)
        assert spectral_gap(gen) == pytest.approx(float(real[1]), abs=1e-9)

    def test_sparse_path_agrees_with_dense(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(3, 1, 40), c)  # 861 states
        dense = spectral_gap(gen)
        sparse = spectral_gap(gen, dense_cap=10)
        assert sparse == pytest.approx(dense, rel=1e-7)

    def test_poincare_inequality(self):
        c = build_family("parity_perturbed", (0.5,))
        gen = build_generator(enumerate_states(3, 1, 4), c)
        gap = spectral_gap(gen)
        rng = np.random.default_rng(11)
        for _ in range(20):
            f = rng.standard_normal(gen.space.size)
            var = float(np.sum(gen.pi * f * f) - np.sum(gen.pi * f) ** 2)
            assert gap * var <= dirichlet(gen, f) + 1e-10


class TestLsi:
    def test_two_point_matches_dense_scan(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(2, 1, 1), c)
        est = lsi_estimate(gen, restarts=8, seed=1)
        chain = bd_from_gamma(gamma_product(c, 1, 1, 1))
        oracle = bd_lsi_scan(chain)
        assert est.s_lower == pytest.approx(oracle, abs=1e-6)
        assert est.converged

    def test_rothaus_floor(self):
        c = build_family("parity_perturbed", (0.5,))
        gen = build_generator(enumerate_states(2, 1, 6), c)
        est = lsi_estimate(gen, restarts=8, seed=0)
        gap = spectral_gap(gen)
        assert est.s_lower >= 2.0 / gap - 1e-6

    def test_lower_bound_is_attained_ratio(self):
        c = build_family("linear")
        gen = build_generator(enumerate_states(3, 1, 3), c)
        est = lsi_estimate(gen, restarts=6, seed=2)
        f = est.argmax_f**2
        e = entropy(gen.log_pi, f)
        d = dirichlet(gen, np.abs(est.argmax_f))
        assert e / d == pytest.approx(est.s_lower, rel=1e-8)


class TestBirthDeath:
    def test_metropolis_rates_binomial(self):
        c = build_family("linear")
        chain = bd_from_gamma(gamma_product(c, 1, 1, 2))
        assert np.exp(chain.loga[0]) == pytest.approx(1.0)
        assert np.exp(chain.loga[1]) == pytest.approx(0.5)
        assert np.exp(chain.logb[0]) == pytest.approx(0.5)  # b(1)
        assert np.exp(chain.logb[1]) == pytest.approx(1.0)  # b(2)

    def test_reversibility_exact(self):
        c = build_family("parity_perturbed", (0.5,))
        chain = bd_from_gamma(gamma_product(c, 2, 2, 16))
        assert chain.reversibility_residual() == 0.0

    def test_dirichlet_two_level(self):
        chain = BirthDeathChain(
            1, np.log([0.5, 0.5]), np.array([0.0]), np.array([0.0])
        )
        assert bd_dirichlet(chain, np.array([0.0, 1.0])) == pytest.approx(0.5)

    def test_dirichlet_matches_generator_quadratic_form(self):
        c = build_family("parity_perturbed", (0.5,))
        chain = bd_from_gamma(gamma_product(c, 1, 1, 12))
        rng = np.random.default_rng(5)
        phi = rng.standard_normal(13)
        A = chain.generator()
        quad = -float(chain.g @ (phi * (A @ phi)))
        assert bd_dirichlet(chain, phi) == pytest.approx(quad, abs=1e-12)

    def test_stationary_under_generator(self):
        c = build_family("linear")
        chain = bd_from_gamma(gamma_product(c, 1, 1, 9))
        resid = chain.g @ chain.generator()
        assert np.max(np.abs(resid)) < 1e-14


class TestHardyCriterion:
    def test_binomial_two_levels(self):
        c = build_family("linear")
        hb = cmr_bound(gamma_product(c, 1, 1, 2))
        assert hb.B0_plus == pytest.approx(math.log(4.0), abs=1e-12)
        assert hb.B0_minus == pytest.approx(math.log(4.0), abs=1e-12)

    def test_uniform_single_step(self):
        c = build_family("linear")
        hb = cmr_bound(gamma_product(c, 1, 1, 1))
        assert hb.B0 == pytest.approx(math.log(2.0), abs=1e-12)

    def test_matches_linear_arithmetic_oracle(self):
        c = build_family("parity_perturbed", (0.5,))
        for N in (7, 20, 41):
            g = gamma_product(c, 1, 1, N)
            hb = cmr_bound(g)
            om, op = brute_cmr(g.g)
            assert hb.B0_minus == pytest.approx(om, rel=1e-10)
            assert hb.B0_plus == pytest.approx(op, rel=1e-10)

    def test_large_N_no_overflow(self):
        c = build_family("parity_perturbed", (0.5,))
        g = gamma_canonical(c, 1, 1, 2000)
        hb = cmr_bound(g)
        assert np.isfinite(hb.B0)
        # B0 grows linearly with N; the scaled value stays order one.
        assert 0.05 < hb.B0 / 2000.0 < 20.0

    def test_binomial_scaling(self):
        c = build_family("linear")
        ratios = []
        for N in (50, 100, 200, 400):
            hb = cmr_bound(gamma_canonical(c, 1, 1, N))
            ratios.append(hb.B0 / N)
        assert max(ratios) / min(ratios) < 2.0


class TestBdLsi:
    def test_two_level_matches_scan(self):
        c = build_family("linear")
        chain = bd_from_gamma(gamma_product(c, 1, 1, 1))
        est = bd_lsi_exact(chain, restarts=8, seed=3)
        assert est.s_lower == pytest.approx(bd_lsi_scan(chain), abs=1e-6)

    def test_hardy_comparison_finite(self):
        c = build_family("parity_perturbed", (0.5,))
        for N in (8, 24, 60):
            g = gamma_product(c, 1, 1, N)
            est = bd_lsi_exact(bd_from_gamma(g), restarts=8, seed=0)
            hb = cmr_bound(g)
            ratio = est.s_lower / hb.B0
            assert 0.0 < ratio < 10.0


class TestDomination:
    def test_identity_rate_bounded_by_two(self):
        c = build_family("linear")
        for N in (1, 2, 5, 20, 101):
            fit = compare_dom(c, N)
            expect = N / math.ceil((N + 1) / 2)
            assert fit.B0 == pytest.approx(expect, rel=1e-12)
            assert fit.B0 <= 2.0

    def test_single_particle(self):
        c = build_family("scaled_linear", (2.0,))
        assert compare_dom(c, 1).B0 == pytest.approx(1.0 / 2.0)

    def test_domination_inequality_holds(self):
        c = build_family("parity_perturbed", (0.5,))
        N = 15
        fit = compare_dom(c, N)
        g = gamma_product(c, 1, 1, N).g
        cv = c.values(N + 1)
        # N * min(g(n), g(n-1)) <= B * g(n) * c(n) with equality at the binding n.
        slack = [fit.B0 * g[n] * cv[n] - N * min(g[n], g[n - 1]) for n in range(1, N + 1)]
        assert min(slack) >= -1e-12 * N
        assert min(slack) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(
    L=st.integers(min_value=2, max_value=4),
    N=st.integers(min_value=1, max_value=5),
)
def test_rank_unrank_property(L, N):
    sp = enumerate_states(L, 1, N)
    rng = np.random.default_rng(L * 100 + N)
    for r in rng.integers(0, sp.size, size=5):
        assert sp.rank(sp.unrank(int(r))) == int(r)


@settings(max_examples=10, deadline=None)
@given(N=st.integers(min_value=2, max_value=30))
def test_cmr_against_oracle_property(N):
    c = build_family("linear")
    g = gamma_canonical(c, 1, 1, N)
    hb = cmr_bound(g)
    om, op = brute_cmr(g.g)
    assert hb.B0 == pytest.approx(max(om, op), rel=1e-9)
