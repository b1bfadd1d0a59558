import math
from fractions import Fraction

import pytest

from anonspread.estimators import (
    EstimatorError,
    absolute_likelihoods,
    argmax_set,
    estimate_jordan,
    estimate_leaf_general,
    estimate_ml_adaptive_regular,
    estimate_ml_irregular,
    estimate_ml_line,
    estimate_ml_tree_protocol,
    leaf_likelihood_regular,
    ring_posterior,
)
from anonspread.graphs import FiniteGraph, RegularTree
from anonspread.protocols import INFINITE, AlphaSchedule, InfectionSnapshot, run_adaptive_diffusion, run_line_protocol, run_tree_protocol
from anonspread.randomness import RandomSource


def _pad_degrees(subtree_edges, degrees):
    """Finite graph containing the subtree plus pendant filler nodes so each
    node reaches its prescribed network degree."""
    edges = list(subtree_edges)
    have = {}
    for u, v in subtree_edges:
        have[u] = have.get(u, 0) + 1
        have[v] = have.get(v, 0) + 1
    filler = 1000
    for v, deg in degrees.items():
        for _ in range(deg - have.get(v, 0)):
            edges.append((v, filler))
            filler += 1
    return FiniteGraph.from_edges(edges)


# --- argmax and ties --------------------------------------------------------

def test_argmax_set():
    assert argmax_set({1: 0.5, 2: 0.5, 3: 0.1}) == [1, 2]
    assert argmax_set({1: 1.0, 2: 1.0 - 1e-15}) == [1, 2]  # within rel_tol
    assert argmax_set({1: 0.0, 2: 0.0}) == [1, 2]


def test_tie_breaking_is_seeded():
    snap = InfectionSnapshot((0, 1, 2, 3), 3, "line",
                             subtree_edges=((0, 1), (1, 2), (2, 3)))
    est1 = estimate_ml_line(snap, T=3, rand=RandomSource(4))
    est2 = estimate_ml_line(snap, T=3, rand=RandomSource(4))
    assert est1.chosen == est2.chosen
    assert est1.tie_broken


# --- jordan center ----------------------------------------------------------

def test_jordan_estimator():
    snap = InfectionSnapshot(
        (0, 1, 2, 3, 4), 2, "flood",
        subtree_edges=((0, 1), (1, 2), (2, 3), (3, 4)),
    )
    est = estimate_jordan(snap)
    assert est.chosen == 2
    assert not est.tie_broken
    assert est.estimator == "jordan"


# --- path-segment ML --------------------------------------------------------

def test_ml_line_feasible_window():
    seg = tuple(range(7))
    edges = tuple((i, i + 1) for i in range(6))
    snap = InfectionSnapshot(seg, 10, "line", subtree_edges=edges)
    est = estimate_ml_line(snap, T=10, rand=RandomSource(0))
    assert sorted(est.scores) == list(range(7))  # every position feasible
    assert est.feasible_count == 7
    # T = 4 rules out the ends being more than 4 from either boundary
    est4 = estimate_ml_line(snap, T=4, rand=RandomSource(0))
    assert sorted(est4.scores) == [2, 3, 4]
    with pytest.raises(EstimatorError):
        estimate_ml_line(snap, T=2)


def test_ml_line_rejects_non_segment():
    snap = InfectionSnapshot((0, 1, 2, 3), 3, "line",
                             subtree_edges=((0, 1), (0, 2), (0, 3)))
    with pytest.raises(EstimatorError):
        estimate_ml_line(snap, T=3)


def test_ml_line_detection_rate_matches_uniform_window():
    net = RegularTree(2)
    T = 6
    hits = 0
    n = 4000
    for seed in range(n):
        snap = run_line_protocol(net, 0, T, RandomSource(seed))
        est = estimate_ml_line(snap, net, T, RandomSource(seed).spawn(1))
        hits += est.chosen == 0
    pd = hits / n
    bound = (2 * T + 1) / (T + 1) ** 2
    assert pd <= bound + 3 * math.sqrt(bound * (1 - bound) / n)


# --- ring posterior ---------------------------------------------------------

def test_ring_posterior_symmetry_and_mass():
    post = ring_posterior(51)
    assert abs(sum(post) - 1) < 1e-12
    for k in range(51):
        assert abs(post[k] - post[50 - k]) < 1e-12
    assert post[25] == max(post)  # peaked at the middle


def test_ring_posterior_small_cases():
    assert ring_posterior(1) == [1.0]
    post = ring_posterior(2)
    assert abs(post[0] - 0.5) < 1e-12
    with pytest.raises(EstimatorError):
        ring_posterior(0)
    with pytest.raises(EstimatorError):
        ring_posterior(11, T=3)  # segment too long for T
    with pytest.raises(EstimatorError):
        ring_posterior(5, tail_tolerance=0.0)


def test_ring_posterior_matches_slow_sum():
    m = 21
    post = ring_posterior(m)
    # independent slow summation of the same series
    for k in (1, 7, 11):
        t0 = max(m - k, k - 1)
        total = 0.0
        for t in range(t0, 60000):
            total += (m + 1) / ((t + 1) ** 2 * (t + 2)) - (
                k * (m - k + 1)
            ) / ((t + 1) ** 2 * (t + 2) ** 2)
        assert post[k - 1] == pytest.approx(total / _slow_norm(m), rel=1e-4)


def _slow_norm(m):
    z = 0.0
    for k in range(1, m + 1):
        t0 = max(m - k, k - 1)
        for t in range(t0, 60000):
            z += (m + 1) / ((t + 1) ** 2 * (t + 2)) - (
                k * (m - k + 1)
            ) / ((t + 1) ** 2 * (t + 2) ** 2)
    return z


# --- tree-protocol ML -------------------------------------------------------

def test_ml_tree_uniform_over_leaves():
    net = RegularTree(3)
    snap = run_tree_protocol(net, 0, 4, RandomSource(2))
    est = estimate_ml_tree_protocol(snap, net, RandomSource(0))
    adj = snap.subtree_adjacency()
    leaves = sorted(v for v, ns in adj.items() if len(ns) == 1)
    assert sorted(est.scores) == leaves
    assert len(set(est.scores.values())) == 1
    assert est.chosen in leaves


# --- adaptive ML on matched regular trees -----------------------------------

def test_ml_adaptive_excludes_center():
    net = RegularTree(3)
    snap, _ = run_adaptive_diffusion(net, 0, 4, AlphaSchedule(3), rand=RandomSource(1))
    est = estimate_ml_adaptive_regular(snap, net, RandomSource(0))
    from anonspread.graphs import jordan_center

    centers = jordan_center(snap.subtree_adjacency())
    assert set(centers).isdisjoint(est.scores)
    assert est.feasible_count == snap.size - len(centers)


# --- degree-mismatch ML -----------------------------------------------------

GOLDEN_EDGES = ((3, 2), (3, 4), (3, 5), (2, 1), (4, 8), (5, 6), (5, 7))
GOLDEN_DEGREES = {1: 4, 2: 2, 3: 3, 4: 2, 5: 3, 6: 2, 7: 2, 8: 8}


def _golden():
    net = _pad_degrees(GOLDEN_EDGES, GOLDEN_DEGREES)
    snap = InfectionSnapshot(tuple(range(1, 9)), 4, "adaptive",
                             subtree_edges=GOLDEN_EDGES)
    return net, snap


def test_ml_irregular_golden_scores():
    net, snap = _golden()
    want = {
        2: [1 / 2, 1.0, 0.0, 1.0, 2 / 3, 1 / 2, 1 / 2, 1 / 4],
        4: [3.0, 2.0, 0.0, 2.0, 4 / 3, 3.0, 3.0, 3 / 2],
    }
    for d0, expect in want.items():
        est = estimate_ml_irregular(snap, net, d0, 4, RandomSource(0))
        got = [est.scores[v] for v in range(1, 9)]
        assert got == pytest.approx(expect, abs=1e-12)


def test_ml_irregular_absolute_likelihood():
    net, snap = _golden()
    like = absolute_likelihoods(snap, net, 3, 4, exact=True)
    assert like[5] == Fraction(1, 9)


def test_ml_irregular_requires_even_T_and_finite_d0():
    net, snap = _golden()
    with pytest.raises(EstimatorError):
        estimate_ml_irregular(snap, net, 3, 5)
    with pytest.raises(EstimatorError):
        estimate_ml_irregular(snap, net, INFINITE, 4)


def test_leaf_likelihood_regular():
    # d0=3, T=4: pick a leaf (1/3 * 1/2) then keep once at alpha(2,1)=1/3
    assert leaf_likelihood_regular(3, 4) == Fraction(1, 6) * Fraction(2, 3)
    with pytest.raises(EstimatorError):
        leaf_likelihood_regular(3, 5)


def test_ml_irregular_matched_degree_is_uniform_off_center():
    net = RegularTree(3)
    snap, _ = run_adaptive_diffusion(net, 0, 4, AlphaSchedule(3), rand=RandomSource(3))
    est = estimate_ml_irregular(snap, net, 3, 4, RandomSource(0))
    nonzero = {v: s for v, s in est.scores.items() if s > 0}
    assert len(set(nonzero.values())) == 1
    assert len(nonzero) == snap.size - 1


# --- general-graph leaf estimator -------------------------------------------

def test_leaf_general_matches_ml_irregular_on_trees():
    net = RegularTree(3)
    snap, _ = run_adaptive_diffusion(net, 0, 4, AlphaSchedule(3), rand=RandomSource(7))
    lg = estimate_leaf_general(snap, net, 3, 4, RandomSource(0))
    ml = estimate_ml_irregular(snap, net, 3, 4, RandomSource(0))
    # leaf-general scores candidate leaves with their absolute likelihoods
    for v, s in lg.scores.items():
        assert s == pytest.approx(ml.scores[v] * ml.normalization, rel=1e-12)


def test_leaf_general_on_cyclic_graph():
    # triangle with pendants: cycles do not crash the replay
    net = FiniteGraph.from_edges(
        [(0, 1), (1, 2), (2, 0), (0, 3), (1, 4), (2, 5)]
    )
    snap, _ = run_adaptive_diffusion(net, 3, 4, AlphaSchedule(INFINITE),
                                     rand=RandomSource(2))
    est = estimate_leaf_general(snap, net, INFINITE, 4, RandomSource(0))
    assert est.chosen in snap.infected
    assert max(est.scores.values()) > 0


def test_leaf_general_needs_subtree():
    snap = InfectionSnapshot((0, 1), 2, "adaptive")
    with pytest.raises(EstimatorError):
        estimate_leaf_general(snap, RegularTree(3), INFINITE, 2)
