import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rwanon.closed_form import RRGContext
from rwanon.designer import DesignParams, design_side_info, induced_posterior
from rwanon.distributions import DistanceDistribution, entropy, nats_to_bits, total_variation
from rwanon.errors import InvalidParameters, SupportMismatch
from rwanon.graph import generate_rrg
from rwanon.privacy import (alpha_guarantee, alpha_privacy_node_level, entropy_lower_bound,
                            expanded_entropy, guarantee_epsilon, node_design_matrix, privacy_report,
                            guarantee_rho, tv_bound)

probs = st.lists(st.floats(0, 1), min_size=1, max_size=12).filter(lambda v: sum(v) > 1e-6)


def normalise(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


@given(probs)
def test_property_entropy_range(v):
    p = normalise(v)
    h = entropy(p)
    assert -1e-12 <= h <= math.log(len(p)) + 1e-12


@given(st.integers(1, 40))
def test_property_uniform_entropy(n):
    assert entropy(np.full(n, 1 / n)) == pytest.approx(math.log(n), abs=1e-12)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8))
def test_property_tv_is_a_metric(rows):
    a, b, c = (np.array(col) + 1e-3 for col in zip(*rows))
    p, q, r = normalise(a), normalise(b), normalise(c)
    assert total_variation(p, p) == 0.0
    assert total_variation(p, q) == pytest.approx(total_variation(q, p))
    assert 0.0 <= total_variation(p, q) <= 1.0
    assert total_variation(p, r) <= total_variation(p, q) + total_variation(q, r) + 1e-12


def test_distribution_validation(tmp_path):
    with pytest.raises(InvalidParameters):
        DistanceDistribution(2, 3, [0.5, 0.6])
    with pytest.raises(InvalidParameters):
        DistanceDistribution(2, 3, [1.5, -0.5])
    with pytest.raises(InvalidParameters):
        DistanceDistribution(2, 4, [0.5, 0.5])
    with pytest.raises(SupportMismatch):
        total_variation(DistanceDistribution.uniform(2, 6), DistanceDistribution.uniform(2, 5))
    d = DistanceDistribution.from_weights(2, [1, 2, 3])
    path = tmp_path / "d.csv"
    d.to_csv(path)
    e = DistanceDistribution.from_csv(path)
    assert e.support_min == 2 and np.array_equal(e.mass, d.mass)
    assert d[1] == 0.0 and d[4] == pytest.approx(0.5)
    assert nats_to_bits(math.log(8)) == pytest.approx(3.0)


def test_entropy_lower_bound_shape():
    assert entropy_lower_bound(0.0, 4) == pytest.approx(math.log(5))
    vals = [entropy_lower_bound(r, 4) for r in np.linspace(0, 1, 50)]
    assert np.all(np.diff(vals) < 0)
    assert entropy_lower_bound(1.0, 4) == -1.0
    with pytest.raises(InvalidParameters):
        entropy_lower_bound(1.5, 4)


@settings(max_examples=200)
@given(probs, st.floats(0, 1))
def test_property_entropy_lower_bound_holds(v, mix):
    # any distribution within TV rho of uniform has entropy above the bound
    u = np.full(len(v), 1 / len(v))
    p = (1 - mix) * u + mix * normalise(v)
    rho = total_variation(p, u)
    if len(v) >= 2:
        assert entropy(p) >= entropy_lower_bound(rho, len(v) - 1) - 1e-12


def test_tv_bound_dominates_actual(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6)
    ref = induced_posterior(ctx, p, 5, 634)
    assert tv_bound(ctx, 5, 634, 634, 2, 6) == 0.0
    for kp in (170, 300, 600, 700, 2000, 1e5, math.inf):
        actual = total_variation(induced_posterior(ctx, p, 5, kp), ref)
        assert actual <= tv_bound(ctx, 5, 634, kp, 2, 6)
    with pytest.raises(InvalidParameters):
        tv_bound(ctx, 5, 634, 5, 2, 6)


def test_epsilon_identity(ctx):
    for q in (0.5, 0.7, 0.9, 0.99):
        lhs = (-2 - math.log(q)) / (2 * math.log(q))
        assert lhs == pytest.approx(-1 / math.log(q) - 0.5, rel=1e-14)
        eps = guarantee_epsilon(ctx, 1 - q, 2, 6)
        assert eps >= 3 * (-1 / math.log(q) - 0.5) - 1e-12


def test_alpha_guarantee_properties(ctx):
    qs = np.linspace(0.5, 0.99, 50)
    a = [alpha_guarantee(ctx, 5, 1 - q, 2, 6) for q in qs]
    alphas = [g.alpha for g in a]
    assert np.all(np.diff(alphas) <= 1e-15)
    assert all(0 <= x <= math.log(5) for x in alphas)
    cor = [alpha_guarantee(ctx, 5, 1 - q, 2, 6, mode="average").alpha for q in qs]
    assert all(c <= o + 1e-15 for c, o in zip(cor, alphas))
    assert a[-1].vacuous
    g = a[0]
    assert g.rho == pytest.approx(guarantee_rho(ctx, g.eps, 2, 6, 1 - (1 / 3) ** 6 - 1 / 300))


def test_expanded_entropy_matches_node_spread():
    m = DistanceDistribution.from_weights(2, [1, 1])
    shells = {2: 12, 3: 36}
    node_probs = np.concatenate([np.full(12, 0.5 / 12), np.full(36, 0.5 / 36)])
    assert expanded_entropy(m, shells) == pytest.approx(entropy(node_probs))


def test_node_design_matrix_rows(rrg):
    p = design_side_info(rrg.context, 5, 634, 2, 6, shells=rrg.mean_shells())
    D = node_design_matrix(rrg, p, "per-node")
    np.testing.assert_allclose(D.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(D) == 0)


def test_node_level_analytic_design(rrg):
    p = design_side_info(rrg.context, 5, 634, 2, 6)
    res = alpha_privacy_node_level(rrg, p, 5, "truncated", 634.0)
    assert res.alpha_distance == pytest.approx(math.log(5), abs=1e-9)
    assert res.alpha > math.log(5)
    assert np.allclose(res.posteriors.sum(axis=0), 1.0)


def test_node_level_matched_shells_small_gap():
    g = generate_rrg(300, 4, 3)
    p = design_side_info(g.context, 5, 634, 2, 6, shells=g.mean_shells())
    res = alpha_privacy_node_level(g, p, 5, "truncated", 634.0, shells="per-node")
    assert math.log(5) - res.alpha_distance < 0.05


def test_node_level_rejects_bad_estimator(rrg):
    p = design_side_info(rrg.context, 5, 634, 2, 6)
    with pytest.raises(InvalidParameters):
        alpha_privacy_node_level(rrg, p, 5, "truncated", None)


def test_privacy_report(ctx, rrg):
    rep = privacy_report(ctx, DesignParams(), 300.0)
    assert rep.tv_actual <= rep.tv_bound
    assert rep.entropy_bound <= rep.posterior_entropy
    row = rep.flat_row()
    assert row["kappa_obs"] == 300.0 and row["n"] == 300
    assert rep.to_csv().count("\n") == 2
    rep = privacy_report(ctx, DesignParams(), 300.0, graph=rrg)
    assert len(rep.per_destination_entropy) == 300
    assert rep.destinations_csv().startswith("dest,entropy,distance_entropy\n")


def test_tv_examples():
    assert total_variation([0.6, 0.4], [0.4, 0.6]) == pytest.approx(0.2)
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert entropy([1.0]) == 0.0


@given(probs, st.randoms(use_true_random=False))
def test_property_entropy_permutation_invariant(v, rnd):
    p = normalise(v)
    q = list(p)
    rnd.shuffle(q)
    assert entropy(q) == pytest.approx(entropy(p), abs=1e-12)


def test_tv_bound_grows_away_from_kappa(ctx):
    above = [tv_bound(ctx, 5, 634, kp, 2, 6) for kp in np.linspace(634, 3000, 40)]
    below = [tv_bound(ctx, 5, 634, kp, 2, 6) for kp in np.linspace(634, 165, 40)]
    assert np.all(np.diff(above) >= 0) and np.all(np.diff(below) >= 0)


def test_dominance_on_grid_to_ten_n(ctx):
    p = design_side_info(ctx, 5, 634, 2, 6)
    ref = induced_posterior(ctx, p, 5, 634)
    for kp in np.linspace(165, 3000, 60):
        w = induced_posterior(ctx, p, 5, kp)
        rho = total_variation(w, ref)
        assert rho <= tv_bound(ctx, 5, 634, kp, 2, 6)
        assert entropy(w) >= entropy_lower_bound(rho, 4) - 1e-9


def test_report_floors_bound(ctx):
    rep = privacy_report(ctx, DesignParams(), 300.0)
    rep.entropy_bound = -0.3
    assert rep.entropy_bound_floored == 0.0
    assert rep.flat_row()["entropy_bound_floored"] == 0.0


def test_node_level_shell_gap_over_seeds():
    gaps = []
    for seed in range(1, 6):
        g = generate_rrg(300, 4, seed)
        analytic = design_side_info(g.context, 5, 634, 2, 6)
        a = alpha_privacy_node_level(g, analytic, 5, "truncated", 634.0).alpha_distance
        emp = design_side_info(g.context, 5, 634, 2, 6, shells=g.mean_shells())
        b = alpha_privacy_node_level(g, emp, 5, "truncated", 634.0, shells="per-node").alpha_distance
        gaps.append(abs(a - b))
    assert max(gaps) < 0.2


def petersen():
    outer = [[(i + 1) % 5, (i - 1) % 5, i + 5] for i in range(5)]
    inner = [[5 + (i + 2) % 5, 5 + (i - 2) % 5, i] for i in range(5)]
    from rwanon.graph import GraphTopology
    return GraphTopology.from_adjacency(np.array(outer + inner))


def test_uniform_node_posterior_entropy():
    # vertex-transitive graph, design inversely proportional to the likelihood
    g = petersen()
    from rwanon.privacy import _source_likelihoods
    lik = _source_likelihoods(g.context, 5, g.diameter, None)
    d = g.distances
    design = np.where(d > 0, 1.0 / np.where(d > 0, lik[d], 1.0), 0.0)
    design /= design.sum(axis=1, keepdims=True)
    res = alpha_privacy_node_level(g, design, 5)
    assert res.alpha == pytest.approx(math.log(9), abs=1e-12)
