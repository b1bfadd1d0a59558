"""Brute-force references for the fast paths.

Everything here is exact rational arithmetic. Two independent mechanisms:

* trajectory sums: enumerate virtual-source paths and keep/pass timings
  directly from the probability model and check each one regenerates the
  observed snapshot;
* run enumeration: drive the actual protocol implementations down every
  random branch with exact weights, via a RandomSource stand-in.

Instances beyond the hard complexity guards are refused, never sampled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .estimators import argmax_set
from .graphs import jordan_center
from .protocols import INFINITE, AlphaSchedule


class OracleError(Exception):
    pass


class OracleBudgetError(OracleError):
    pass


# ---------------------------------------------------------------------------
# Run enumeration: replay a protocol down every random branch
# ---------------------------------------------------------------------------

class _Enumerator:
    """RandomSource stand-in that follows a recorded decision prefix and
    takes the first untried option at the frontier."""

    exact = True

    def __init__(self, prefix):
        self._prefix = prefix
        self.path = []  # [chosen index, option count] per branch point
        self.weight = Fraction(1)

    def _decide(self, arms):
        # arms: [(value, weight)] with every weight > 0
        if len(arms) == 1:
            self.weight *= arms[0][1]
            return arms[0][0]
        pos = len(self.path)
        i = self._prefix[pos] if pos < len(self._prefix) else 0
        self.path.append([i, len(arms)])
        self.weight *= arms[i][1]
        return arms[i][0]

    def bernoulli(self, p):
        p = Fraction(p)
        arms = [(v, w) for v, w in ((True, p), (False, 1 - p)) if w > 0]
        return self._decide(arms)

    def choice(self, options):
        w = Fraction(1, len(options))
        return self._decide([(o, w) for o in options])

    def subset(self, options, k):
        options = list(options)
        if k >= len(options):
            return options
        combos = list(itertools.combinations(options, k))
        w = Fraction(1, len(combos))
        return self._decide([(sorted(c), w) for c in combos])

    def random(self):
        raise OracleError("raw floats cannot be enumerated; use bernoulli")

    def spawn(self, *keys):
        return self


def enumerate_runs(run, max_runs: int = 500_000):
    """Yield (outcome, exact probability) over every branch of `run(rand)`.

    The weights sum to 1 exactly. Raises OracleBudgetError past max_runs.
    """
    prefix = []
    runs = 0
    while True:
        runs += 1
        if runs > max_runs:
            raise OracleBudgetError(f"more than {max_runs} branches")
        en = _Enumerator(prefix)
        yield run(en), en.weight
        path = en.path
        while path and path[-1][0] + 1 >= path[-1][1]:
            path.pop()
        if not path:
            return
        path[-1][0] += 1
        prefix = [i for i, _ in path]


def run_distribution(run, key=None, max_runs: int = 500_000) -> dict:
    """Exact distribution over run outcomes, keyed by `key(outcome)`."""
    dist = {}
    for out, w in enumerate_runs(run, max_runs):
        k = key(out) if key is not None else out
        dist[k] = dist.get(k, Fraction(0)) + w
    return dist


def oracle_detection_probability(run, source, estimate, max_runs: int = 500_000) -> Fraction:
    """Exact P_D: expectation over all protocol branches of the chance the
    estimator names the true source, counting argmax ties fractionally."""
    pd = Fraction(0)
    for snap, w in enumerate_runs(run, max_runs):
        est = estimate(snap)
        best = argmax_set({v: float(s) for v, s in est.scores.items()})
        if source in best:
            pd += w * Fraction(1, len(best))
    return pd


def oracle_expected_distance(run, source, estimate, distance, max_runs: int = 500_000) -> Fraction:
    """Exact E[hop distance from source to the estimate], averaging over
    argmax ties."""
    total = Fraction(0)
    for snap, w in enumerate_runs(run, max_runs):
        est = estimate(snap)
        best = argmax_set({v: float(s) for v, s in est.scores.items()})
        mean = Fraction(sum(distance(source, v) for v in best), len(best))
        total += w * mean
    return total


# ---------------------------------------------------------------------------
# Trajectory sums for adaptive diffusion on trees
# ---------------------------------------------------------------------------

@dataclass
class TrajectorySum:
    likelihoods: dict  # candidate -> Fraction
    trajectory_count: int
    center: int = None


def _nonbacktracking_paths(net, start, goal, max_len, allowed):
    """All non-backtracking walks start -> goal of length <= max_len inside
    `allowed`. On an acyclic network this is the unique tree path or none."""
    out = []
    stack = [[start]]
    while stack:
        walk = stack.pop()
        if walk[-1] == goal and len(walk) > 1:
            out.append(walk)
            continue
        if len(walk) - 1 >= max_len:
            continue
        prev = walk[-2] if len(walk) > 1 else None
        for w in net.neighbors(walk[-1]):
            if w != prev and w in allowed:
                stack.append(walk + [w])
    return out


def _replay_trajectory(net, path, pass_times, T):
    """Deterministic infected set for a virtual-source path with passes at
    the given decision times (all other decisions keep)."""
    infected = {path[0], path[1]}

    def expand(spreaders):
        for u in list(spreaders):
            for w in net.neighbors(u):
                infected.add(w)

    def side(v_new, v_old):
        comp = {v_new}
        stack = [v_new]
        while stack:
            x = stack.pop()
            for y in net.neighbors(x):
                if x == v_new and y == v_old:
                    continue
                if y in infected and y not in comp:
                    comp.add(y)
                    stack.append(y)
        return comp

    if T >= 2:
        expand([path[1]])
    k = 1
    for t_dec in range(2, T, 2):
        if t_dec in pass_times:
            k += 1
            infected.add(path[k])
            comp = side(path[k], path[k - 1])
            if t_dec + 1 <= T:
                expand(comp)
            if t_dec + 2 <= T:
                expand(side(path[k], path[k - 1]))
        else:
            if t_dec + 1 <= T:
                expand(set(infected))
            # idle step
    return infected


def oracle_adaptive_likelihoods(net, snapshot, d0, T: int = None) -> TrajectorySum:
    """Exact P(snapshot | candidate) for adaptive diffusion with schedule d0
    on an acyclic network, by summing every (virtual-source path, keep/pass
    timing) pair whose deterministic replay regenerates the snapshot.

    The center candidate always has likelihood 0 for T >= 2 (the source
    passes the token at t=1)."""
    T = snapshot.T if T is None else T
    if T > 8:
        raise OracleError(f"T={T} exceeds the enumeration guard (T <= 8)")
    if T % 2 != 0 or T < 2:
        raise OracleError("trajectory sums are defined for even T >= 2")
    infected = set(snapshot.infected)
    if len(infected) > 60:
        raise OracleError(f"{len(infected)} infected nodes exceeds the guard")
    adj = snapshot.subtree_adjacency() if snapshot.subtree_edges is not None else {
        v: [w for w in net.neighbors(v) if w in infected] for v in infected
    }
    centers = jordan_center(adj)
    if len(centers) != 1:
        raise OracleError(f"snapshot has no unique center: {centers}")
    center = centers[0]

    sched = AlphaSchedule(d0)
    decision_times = list(range(2, T, 2))
    likelihoods = {}
    count = 0
    for v0 in sorted(infected):
        if v0 == center:
            likelihoods[v0] = Fraction(0)
            continue
        total = Fraction(0)
        for path in _nonbacktracking_paths(net, v0, center, T // 2, infected):
            delta = len(path) - 1
            choice_w = Fraction(1, net.degree(v0))
            for k in range(1, delta):
                choice_w *= Fraction(1, net.degree(path[k]) - 1)
            for passes in itertools.combinations(decision_times, delta - 1):
                w = choice_w
                h = 1
                ok = True
                for t in decision_times:
                    a = sched.alpha_fraction(t, h)
                    can_pass = net.degree(path[h]) > 1
                    if t in passes:
                        if not can_pass:
                            ok = False
                            break
                        w *= 1 - a
                        h += 1
                    elif can_pass:
                        w *= a
                    # a stuck token keeps with probability 1
                if not ok or w == 0:
                    continue
                if _replay_trajectory(net, path, set(passes), T) == infected:
                    total += w
                    count += 1
        likelihoods[v0] = total
    return TrajectorySum(likelihoods, count, center)


# ---------------------------------------------------------------------------
# Exact distributions for the spread-along-a-path protocol
# ---------------------------------------------------------------------------

@dataclass
class LineDistribution:
    T: int
    marginal: list  # marginal[x] = P(one side extends x), Fractions
    joint: dict = field(repr=False)  # (left, right) -> Fraction

    def nt_law(self) -> dict:
        law = {}
        for (l, r), w in self.joint.items():
            law[l + r + 1] = law.get(l + r + 1, Fraction(0)) + w
        return law


def oracle_line_distribution(T: int) -> LineDistribution:
    """Exact joint law of the two boundary extents after T steps of the
    time-inhomogeneous walk with step probability (x+1)/(t+1). The sides
    are independent and each marginal is uniform on {0..T}."""
    if T > 20:
        raise OracleError(f"T={T} exceeds the guard (T <= 20)")
    q = [Fraction(1)]
    for t in range(1, T + 1):
        nxt = [Fraction(0)] * (len(q) + 1)
        for x, w in enumerate(q):
            p = Fraction(x + 1, t + 1)
            nxt[x + 1] += w * p
            nxt[x] += w * (1 - p)
        q = nxt
    joint = {
        (l, r): q[l] * q[r] for l in range(T + 1) for r in range(T + 1)
    }
    return LineDistribution(T, q, joint)


def oracle_line_detection(T: int):
    """Exact (P_D, E[hop distance]) for the path protocol with the ML rule
    that picks uniformly among segment positions feasible for T."""
    dist = oracle_line_distribution(T)
    pd = Fraction(0)
    exp_d = Fraction(0)
    for (l, r), w in dist.joint.items():
        m = l + r + 1
        lo = max(0, m - 1 - T)
        hi = min(m - 1, T)
        n_feasible = hi - lo + 1
        pd += w * Fraction(1, n_feasible)
        exp_d += w * Fraction(sum(abs(i - l) for i in range(lo, hi + 1)), n_feasible)
    return pd, exp_d
