"""Adversary-side source estimators.

Every estimator consumes an InfectionSnapshot (plus the underlying contact
network where degrees matter) and returns a SourceEstimate. Estimators are
pure in (snapshot, net, params, seed); argmax ties break by seeded uniform
choice and are flagged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .graphs import (
    GraphError,
    bfs_distances,
    eccentricities,
    jordan_center,
    tree_path,
)
from .protocols import INFINITE, AlphaSchedule, InfectionSnapshot, ProtocolError
from .randomness import RandomSource


class EstimatorError(Exception):
    pass


@dataclass
class SourceEstimate:
    chosen: int
    scores: dict  # node -> score; zero-score nodes may be omitted
    feasible_count: int
    tie_broken: bool
    estimator: str
    normalization: float = None  # absolute likelihood = score * normalization

    def to_json(self) -> str:
        return json.dumps(
            {
                "chosen": self.chosen,
                "scores": {str(k): v for k, v in sorted(self.scores.items())},
                "feasible_count": self.feasible_count,
                "tie_broken": self.tie_broken,
                "estimator": self.estimator,
                "normalization": self.normalization,
            }
        )


def argmax_set(scores: dict, rel_tol: float = 1e-12) -> list:
    best = max(scores.values())
    if best <= 0:
        return sorted(v for v, s in scores.items() if s == best)
    return sorted(v for v, s in scores.items() if s >= best * (1 - rel_tol))


def _pick(candidates, rand: RandomSource):
    candidates = sorted(candidates)
    if len(candidates) == 1:
        return candidates[0], False
    return rand.choice(candidates), True


def _snapshot_adjacency(snapshot: InfectionSnapshot, net=None) -> dict:
    if snapshot.subtree_edges is not None and (
        snapshot.subtree_edges or snapshot.size == 1
    ):
        return snapshot.subtree_adjacency()
    if net is None:
        raise EstimatorError("snapshot has no subtree edges and no network given")
    infected = set(snapshot.infected)
    return {v: [w for w in net.neighbors(v) if w in infected] for v in infected}


# ---------------------------------------------------------------------------
# Jordan center
# ---------------------------------------------------------------------------

def estimate_jordan(snapshot, net=None, rand: RandomSource = None) -> SourceEstimate:
    """Pick the node with the smallest maximum distance inside the infected
    subgraph. Scores are (max eccentricity + 1 - eccentricity), so the
    argmax set is exactly the Jordan center set."""
    rand = rand or RandomSource(0)
    adj = _snapshot_adjacency(snapshot, net)
    ecc = eccentricities(adj)
    worst = max(ecc.values())
    scores = {v: float(worst + 1 - e) for v, e in ecc.items()}
    centers = argmax_set(scores)
    chosen, tie = _pick(centers, rand)
    return SourceEstimate(chosen, scores, len(centers), tie, "jordan")


# ---------------------------------------------------------------------------
# Line Protocol ML and the ring posterior
# ---------------------------------------------------------------------------

def _segment_order(adj: dict) -> list:
    """Order the nodes of a path-shaped infected subgraph end to end."""
    if len(adj) == 1:
        return list(adj)
    ends = sorted(v for v, ns in adj.items() if len(ns) == 1)
    if len(ends) != 2:
        raise EstimatorError("infected set is not a path segment")
    order = [ends[0]]
    prev = None
    while len(order) < len(adj):
        nxt = [w for w in adj[order[-1]] if w != prev]
        if len(nxt) != 1:
            raise EstimatorError("infected set is not a path segment")
        prev = order[-1]
        order.append(nxt[0])
    return order


def estimate_ml_line(snapshot, net=None, T=None, rand: RandomSource = None) -> SourceEstimate:
    """ML estimate under Line Protocol semantics: candidates whose two
    boundary offsets both fit within T are equally likely; others are
    infeasible."""
    rand = rand or RandomSource(0)
    T = snapshot.T if T is None else T
    adj = _snapshot_adjacency(snapshot, net)
    order = _segment_order(adj)
    m = len(order)
    if m > 2 * T + 1:
        raise EstimatorError(f"segment of {m} nodes is infeasible for T={T}")
    lo = max(0, m - 1 - T)
    hi = min(m - 1, T)
    feasible = order[lo : hi + 1]
    score = 1.0 / len(feasible)
    scores = {v: score for v in feasible}
    chosen, tie = _pick(feasible, rand)
    return SourceEstimate(chosen, scores, len(feasible), tie, "ml-line")


def _trigamma(x: float) -> float:
    # psi_1 via recurrence into the asymptotic regime.
    acc = 0.0
    while x < 24.0:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = inv * (
        1.0
        + inv * 0.5
        + inv2 * (1.0 / 6.0 + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 - inv2 / 30.0)))
    )
    return acc + tail


def ring_posterior(m: int, T: int = None, tail_tolerance: float = 1e-12) -> list:
    """Exact posterior over source positions 1..m of a Line-Protocol segment
    on a large ring with a uniform source prior.

    Per position k the infinite sum over unobserved stopping times is
    truncated once the remaining-tail bound drops below tail_tolerance (or
    a fixed horizon), and the analytic remainder (trigamma form of the
    tail) is added back, so the truncation error is far below the bound.
    """
    if tail_tolerance <= 0:
        raise EstimatorError("tail_tolerance must be positive")
    if m < 1:
        raise EstimatorError("need m >= 1")
    if T is not None and m > 2 * T + 1:
        raise EstimatorError(f"segment of {m} nodes cannot arise by T={T}")

    horizon = 64 * (m + 2)
    out = []
    for k in range(1, m + 1):
        t0 = max(m - k, k - 1)
        c2 = float(k * (m - k + 1))
        total = 0.0
        t = t0
        while (m + 1) / (2.0 * max(t, 1) ** 2) >= tail_tolerance and t < t0 + horizon:
            a = t + 1.0
            b = t + 2.0
            total += (m + 1) / (a * a * b) - c2 / (a * a * b * b)
            t += 1
        # Analytic remainder from t onward.
        a = t + 1.0
        s1 = _trigamma(a) - 1.0 / a
        s2 = _trigamma(a) + _trigamma(a + 1.0) - 2.0 / a
        total += (m + 1) * s1 - c2 * s2
        out.append(total)
    z = sum(out)
    return [x / z for x in out]


# ---------------------------------------------------------------------------
# Tree Protocol ML
# ---------------------------------------------------------------------------

def _subtree_leaves(adj: dict) -> list:
    if len(adj) == 1:
        return list(adj)
    return sorted(v for v, ns in adj.items() if len(ns) == 1)


def estimate_ml_tree_protocol(snapshot, net=None, rand: RandomSource = None) -> SourceEstimate:
    """Under the Tree Protocol only subtree leaves can have started the
    spread, and they are equally likely."""
    rand = rand or RandomSource(0)
    adj = _snapshot_adjacency(snapshot, net)
    leaves = _subtree_leaves(adj)
    score = 1.0 / len(leaves)
    scores = {v: score for v in leaves}
    chosen, tie = _pick(leaves, rand)
    return SourceEstimate(chosen, scores, len(leaves), tie, "ml-tree")


# ---------------------------------------------------------------------------
# Adaptive diffusion on matched regular trees
# ---------------------------------------------------------------------------

def estimate_ml_adaptive_regular(snapshot, net=None, rand: RandomSource = None) -> SourceEstimate:
    """ML estimate for adaptive diffusion on a regular tree with matched d0:
    all infected nodes except the snapshot's Jordan center(s) are equally
    likely. Centers come from the visible snapshot, not protocol state."""
    rand = rand or RandomSource(0)
    adj = _snapshot_adjacency(snapshot, net)
    centers = set(jordan_center(adj))
    candidates = sorted(set(snapshot.infected) - centers)
    if not candidates:
        candidates = sorted(snapshot.infected)  # degenerate 1-2 node snapshots
    score = 1.0 / len(candidates)
    scores = {v: score for v in candidates}
    chosen, tie = _pick(candidates, rand)
    return SourceEstimate(chosen, scores, len(candidates), tie, "ml-adaptive-regular")


# ---------------------------------------------------------------------------
# Degree-mismatched adaptive diffusion on irregular trees
# ---------------------------------------------------------------------------

def leaf_likelihood_regular(d0: int, T: int) -> Fraction:
    """P(snapshot | leaf source) on a d0-regular tree at even T: the
    always-pass trajectory probability times the leaf-choice probability."""
    if T % 2 != 0 or T < 2:
        raise EstimatorError(f"need even T >= 2, got {T}")
    sched = AlphaSchedule(d0)
    prob = Fraction(1, d0 * (d0 - 1) ** (T // 2 - 1))
    for t in range(2, T, 2):
        prob *= 1 - sched.alpha_fraction(t, t // 2)
    return prob


def _center_of(snapshot, adj):
    centers = jordan_center(adj)
    if len(centers) != 1:
        raise EstimatorError(
            f"expected a unique Jordan center, found {centers} (odd snapshot?)"
        )
    return centers[0]


def estimate_ml_irregular(
    snapshot,
    net,
    d0: int,
    T: int = None,
    rand: RandomSource = None,
    exact: bool = False,
) -> SourceEstimate:
    """ML source estimate for adaptive diffusion run with schedule d0 on an
    irregular tree (even T).

    Scores follow the degree-mismatch form
        (d0 / deg(v)) * prod over interior path nodes of (d0-1)/(deg-1),
    computed in one message pass outward from the snapshot center. The
    normalization constant converts scores to absolute likelihoods.
    """
    rand = rand or RandomSource(0)
    T = snapshot.T if T is None else T
    if T % 2 != 0:
        raise EstimatorError("odd observation times are not supported")
    if d0 is INFINITE or not isinstance(d0, int) or d0 < 2:
        raise EstimatorError(f"need an integer d0 >= 2, got {d0!r}")
    adj = _snapshot_adjacency(snapshot, net)
    center = _center_of(snapshot, adj)

    one = Fraction(1) if exact else 1.0
    scores = {center: 0 * one}
    stack = [(w, center, one) for w in adj[center]]
    while stack:
        v, parent_node, prefix = stack.pop()
        deg_v = net.degree(v)
        scores[v] = prefix * d0 / deg_v if not exact else prefix * Fraction(d0, deg_v)
        kids = [w for w in adj[v] if w != parent_node]
        if kids:
            if deg_v < 2:
                raise EstimatorError(f"interior node {v} has degree {deg_v} < 2")
            step = (
                Fraction(d0 - 1, deg_v - 1) if exact else (d0 - 1) / (deg_v - 1)
            )
            for w in kids:
                stack.append((w, v, prefix * step))

    best = argmax_set({v: float(s) for v, s in scores.items()})
    chosen, tie = _pick(best, rand)
    norm = leaf_likelihood_regular(d0, T) if T >= 2 else Fraction(1)
    return SourceEstimate(
        chosen,
        scores,
        sum(1 for s in scores.values() if s > 0),
        tie,
        "ml-irregular",
        normalization=norm if exact else float(norm),
    )


def absolute_likelihoods(snapshot, net, d0: int, T: int = None, exact: bool = False) -> dict:
    """Per-node absolute likelihoods P(snapshot | v) = A_v * B_v."""
    est = estimate_ml_irregular(snapshot, net, d0, T, exact=exact)
    return {v: s * est.normalization for v, s in est.scores.items()}


# ---------------------------------------------------------------------------
# Near-ML leaf estimator for general (cyclic) graphs
# ---------------------------------------------------------------------------

def _replay_infection_times(adj: dict, path: list) -> dict:
    """Infection times on the observed subtree under the candidate virtual
    source trajectory `path` (candidate leaf first, center last), assuming
    the token passes at every even step (the earliest consistent timing)."""
    u0 = path[0]
    times = {u0: 0}
    if len(path) == 1:
        return times
    times[path[1]] = 1

    def expand(spreaders, t):
        for u in sorted(spreaders):
            for w in adj[u]:
                if w not in times:
                    times[w] = t

    def side(v_new, v_old):
        comp = {v_new}
        stack = [v_new]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if x == v_new and y == v_old:
                    continue
                if y in times and y not in comp:
                    comp.add(y)
                    stack.append(y)
        return comp

    expand([path[1]], 2)
    for k in range(1, len(path) - 1):
        v_new, v_old = path[k + 1], path[k]
        if v_new not in times:
            times[v_new] = 2 * k + 1
        expand(side(v_new, v_old), 2 * k + 1)
        expand(side(v_new, v_old), 2 * k + 2)
    return times


def estimate_leaf_general(
    snapshot,
    net,
    d0=INFINITE,
    T: int = None,
    rand: RandomSource = None,
) -> SourceEstimate:
    """Near-ML estimate among subtree leaves on general graphs.

    For each candidate leaf the unique subtree path to the center is
    replayed; the trajectory-choice product uses deg_u, the number of
    network neighbors still uninfected when each path node first receives
    the token. With d0 = INFINITE the keep/pass factor is 1; with finite
    d0 it is the regular-tree value for the path length.
    """
    rand = rand or RandomSource(0)
    T = snapshot.T if T is None else T
    if snapshot.subtree_edges is None:
        raise EstimatorError("leaf estimator needs the infection subtree")
    adj = snapshot.subtree_adjacency()
    centers = jordan_center(adj)
    center = centers[0]
    leaves = [v for v in _subtree_leaves(adj) if v not in centers]
    if not leaves:
        raise EstimatorError("snapshot has no candidate leaves")

    scores = {}
    for v0 in leaves:
        path = tree_path(adj, v0, center)
        delta = len(path) - 1
        if d0 is not INFINITE and (T % 2 != 0 or delta > T // 2):
            scores[v0] = 0.0
            continue
        times = _replay_infection_times(adj, path)
        score = 1.0 / net.degree(v0)
        feasible = True
        for k in range(1, delta):
            # remaining pass choices at u_k = its neighbors still uninfected
            # when it first receives the token (deg - 1 on acyclic networks)
            u_k = path[k]
            receipt = 2 if k == 1 else 2 * k - 1
            deg_u = sum(
                1
                for w in net.neighbors(u_k)
                if w not in times or times[w] >= receipt
            )
            if deg_u <= 0:
                feasible = False
                break
            score /= deg_u
        if not feasible:
            scores[v0] = 0.0
            continue
        if d0 is not INFINITE and delta >= 1 and T >= 2:
            score *= float(
                leaf_likelihood_regular(d0, T) * d0 * (d0 - 1) ** (delta - 1)
            )
        scores[v0] = score

    if max(scores.values()) <= 0:
        raise EstimatorError("no feasible leaf candidate")
    best = argmax_set(scores)
    chosen, tie = _pick(best, rand)
    return SourceEstimate(
        chosen,
        scores,
        sum(1 for s in scores.values() if s > 0),
        tie,
        "leaf-general",
    )
