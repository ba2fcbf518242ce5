import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rwanon import closed_form as cf
from rwanon.closed_form import RRGContext
from rwanon.designer import (EXACT, DesignParams, design_basic, design_side_info, golden_section,
                             induced_posterior, likelihoods, mean_iteration_time, optimize_kappa,
                             side_info_lower_end)
from rwanon.distributions import DistanceDistribution, entropy
from rwanon.errors import DegenerateNormalizer, DomainError, InvalidParameters


def test_defaults_and_validation():
    p = DesignParams()
    assert (p.delta, p.ell_min, p.ell_max, p.kappa, p.delta_prime) == (5, 2, 6, 634.0, 0.3)
    assert p.d == 4
    for bad in ({"delta": 0}, {"ell_min": 1}, {"ell_max": 1}, {"kappa": 6}, {"delta_prime": 1.0}):
        with pytest.raises(InvalidParameters):
            DesignParams(**bad)
    with pytest.raises(InvalidParameters):
        p.check_graph(5)


def test_basic_design_flattens_posterior(ctx):
    p = design_basic(ctx, 5, 2, 6)
    w = induced_posterior(ctx, p, 5)
    np.testing.assert_allclose(w.mass, 0.2, atol=1e-12)
    lik = likelihoods(ctx, p.ells, 5)
    np.testing.assert_allclose(p.mass * lik / (p.mass * lik).sum(), 0.2, atol=1e-12)


def test_side_info_design_shape(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6)
    # far distances are favoured: the likelihood per source shrinks with the shell size
    assert np.all(np.diff(p.mass) > 0)
    assert p.mass[-1] / p.mass[-2] == pytest.approx(3.0, rel=0.02)
    assert mean_iteration_time(ctx, p) == pytest.approx(
        sum(m * cf.fht_mean(ctx, int(l)) for l, m in zip(p.ells, p.mass)))


def test_exact_design_flattens_exact_posterior(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6, mode=EXACT)
    w = induced_posterior(ctx, p, 5, 634, exact=True)
    np.testing.assert_allclose(w.mass, 0.2, atol=1e-12)


def test_domain_errors(ctx):
    with pytest.raises(DomainError):
        design_side_info(ctx, 5, 6, 2, 6)
    p = design_side_info(ctx, 5, 634, 2, 6)
    with pytest.raises(DomainError):
        induced_posterior(ctx, p, 5, 6)
    with pytest.raises(InvalidParameters):
        design_basic(ctx, 5, 1, 6)
    with pytest.raises(InvalidParameters):
        likelihoods(ctx, [2], 5, mode="bogus")


def test_degenerate_normaliser(ctx):
    p = DistanceDistribution.from_weights(2, [1.0, 0.0])
    lik_zero = [lambda ell: math.inf]  # an infinite shell makes every likelihood vanish
    with pytest.raises(DegenerateNormalizer):
        induced_posterior(ctx, p, 5, shells=lik_zero[0])


def test_point_mass_support_warns(ctx, caplog):
    with caplog.at_level(logging.WARNING):
        p = design_side_info(ctx, 5, 634, 3, 3)
    assert "degenerate support" in caplog.text
    assert p.mass.tolist() == [1.0]
    assert entropy(induced_posterior(ctx, p, 5, 200)) == 0.0


def test_shell_arguments_agree(ctx):
    tree = [0, 4, 12, 36, 108, 324, 972]
    a = design_side_info(ctx, 5, 634, 2, 6)
    b = design_side_info(ctx, 5, 634, 2, 6, shells=tree)
    c = design_side_info(ctx, 5, 634, 2, 6, shells=lambda ell: 4 * 3 ** (ell - 1))
    np.testing.assert_allclose(a.mass, b.mass, rtol=1e-14)
    np.testing.assert_allclose(a.mass, c.mass, rtol=1e-14)


def test_golden_section_parabola():
    assert golden_section(lambda x: (x - 3.7) ** 2, 0, 10, 1e-8) == pytest.approx(3.7, abs=1e-7)


def test_lower_end(ctx):
    t1 = side_info_lower_end(ctx, 0.3, 2)
    # P(T_FR >= t1 | T_FR >= 4) = 0.7 under the return-time tail
    assert cf.frt_conditional_tail(ctx, t1, 2) == pytest.approx(
        0.7 ** ((ctx.n) / (ctx.n - 2)), rel=1e-12)
    assert t1 == pytest.approx(164.5037, abs=1e-3)


def test_optimize_kappa_balances_endpoints(ctx):
    k = optimize_kappa(ctx, 5, 0.3, 2, 6)
    assert 6 < k.kappa < 100 * ctx.n
    assert k.t2 == math.inf
    assert k.gap_t1 == pytest.approx(k.gap_t2, abs=1e-6)
    # any other design point does worse at one of the endpoints
    for kappa in (k.kappa * 0.8, k.kappa * 1.25, 634.0):
        p = design_side_info(ctx, 5, kappa, 2, 6)
        worst = max(abs(math.log(5) - entropy(induced_posterior(ctx, p, 5, kp))) for kp in (k.t1, None))
        assert worst >= k.objective - 1e-9


def test_optimize_kappa_symmetric(ctx):
    k = optimize_kappa(ctx, 5, 0.3, 2, 6, split="symmetric")
    assert k.t1 < k.kappa < k.t2
    with pytest.raises(InvalidParameters):
        optimize_kappa(ctx, 5, 0.3, 2, 6, split="other")


@settings(max_examples=40, deadline=None)
@given(kappa=st.floats(20, 30_000), delta=st.integers(1, 20), ell_min=st.integers(2, 4),
       width=st.integers(1, 4))
def test_property_design_point_posterior_uniform(kappa, delta, ell_min, width):
    ctx = RRGContext(300, 4)
    ell_max = ell_min + width
    p = design_side_info(ctx, delta, kappa, ell_min, ell_max)
    w = induced_posterior(ctx, p, delta, kappa)
    np.testing.assert_allclose(w.mass, 1.0 / (width + 1), atol=1e-12)
    assert entropy(w) == pytest.approx(math.log(width + 1), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(kappa=st.floats(50, 5000), kappa_obs=st.floats(7, 1e6))
def test_property_posterior_is_distribution(kappa, kappa_obs):
    ctx = RRGContext(300, 4)
    p = design_side_info(ctx, 5, kappa, 2, 6)
    w = induced_posterior(ctx, p, 5, kappa_obs)
    assert abs(w.mass.sum() - 1) < 1e-12
    assert 0 <= entropy(w) <= math.log(5) + 1e-12


def test_side_info_design_large_kappa_limit(ctx):
    a = design_basic(ctx, 5, 2, 6)
    b = design_side_info(ctx, 5, 1e12, 2, 6)
    np.testing.assert_allclose(a.mass, b.mass, atol=1e-9)


def test_basic_design_product_constant(ctx):
    p = design_basic(ctx, 5, 2, 6)
    prod = p.mass * likelihoods(ctx, p.ells, 5)
    np.testing.assert_allclose(prod / prod[0], 1.0, rtol=1e-12)


def test_posterior_scale_invariance(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6)
    w1 = induced_posterior(ctx, p, 5, 400)
    # scaling every shell size rescales every likelihood by the same factor
    w2 = induced_posterior(ctx, p, 5, 400, shells=lambda ell: 7.5 * 4 * 3 ** (ell - 1))
    np.testing.assert_allclose(w1.mass, w2.mass, rtol=1e-12)


def test_exact_and_relaxed_posteriors_close(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6)
    from rwanon.distributions import total_variation
    for kp in (165, 300, 634, 1900, None):
        a = induced_posterior(ctx, p, 5, kp)
        b = induced_posterior(ctx, p, 5, kp, exact=True)
        assert total_variation(a, b) < 0.05


def test_uniform_baseline_below_design(ctx):
    u = DistanceDistribution.uniform(2, 6)
    for kp in (200, 634, None):
        assert entropy(induced_posterior(ctx, u, 5, kp)) < math.log(5) - 0.5


def test_mean_iteration_time_monotone(ctx):
    means = [cf.fht_mean(ctx, ell) for ell in range(2, 9)]
    assert all(b > a for a, b in zip(means, means[1:]))
    assert mean_iteration_time(ctx, DistanceDistribution.point_mass(2)) == cf.fht_mean(ctx, 2)
