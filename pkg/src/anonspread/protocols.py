"""Spreading protocols and the virtual-source Markov-chain analytics.

Implements deterministic flooding, per-edge random diffusion, the Line and
Tree protocols, and adaptive diffusion with its token-keeping schedule
alpha_{d0}(t, h). All randomness flows through a RandomSource-compatible
object so the oracle can replay every branch exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import ContactNetwork, Ring, GraphError
from .randomness import RandomSource

INFINITE = math.inf  # d0 = infinity: the virtual source is always passed


class ProtocolError(Exception):
    pass


# ---------------------------------------------------------------------------
# Token-keeping schedule and state distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaSchedule:
    """Probability alpha(t, h) that the virtual source keeps the token at
    even time t when h hops from the true source."""

    d0: object  # int >= 2 or INFINITE

    def __post_init__(self):
        if self.d0 is not INFINITE and (not isinstance(self.d0, int) or self.d0 < 2):
            raise ProtocolError(f"d0 must be an integer >= 2 or INFINITE, got {self.d0!r}")

    def alpha_fraction(self, t: int, h: int) -> Fraction:
        if t < 2 or t % 2 != 0:
            raise ProtocolError(f"alpha needs even t >= 2, got t={t}")
        if not 1 <= h <= t // 2:
            raise ProtocolError(f"h={h} outside [1, {t // 2}] at t={t}")
        if self.d0 is INFINITE:
            return Fraction(0)
        d = self.d0
        if d == 2:
            return Fraction(t - 2 * h + 2, t + 2)
        return Fraction((d - 1) ** (t // 2 - h + 1) - 1, (d - 1) ** (t // 2 + 1) - 1)

    def alpha(self, t: int, h: int) -> float:
        # Fraction arithmetic keeps the big-integer ratio exact before the
        # single final float division, so large t stays stable.
        return float(self.alpha_fraction(t, h))

    def describe(self):
        return "inf" if self.d0 is INFINITE else self.d0


def state_distribution_closed(d: int, t: int) -> list:
    """Target distribution of h_t = distance(source, virtual source) at even t."""
    if t < 2 or t % 2 != 0:
        raise ProtocolError(f"need even t >= 2, got {t}")
    half = t // 2
    if d == 2:
        return [2.0 / t] * half
    z = (d - 1) ** half - 1
    return [float(Fraction((d - 2) * (d - 1) ** (h - 1), z)) for h in range(1, half + 1)]


def state_distribution_recursive(d: int, t: int) -> list:
    """Same distribution, propagated through the bidiagonal column-stochastic
    transition matrices built from alpha(d, ., .)."""
    if t < 2 or t % 2 != 0:
        raise ProtocolError(f"need even t >= 2, got {t}")
    sched = AlphaSchedule(d)
    p = [Fraction(1)]
    for s in range(2, t, 2):
        alphas = [sched.alpha_fraction(s, h) for h in range(1, s // 2 + 1)]
        nxt = [Fraction(0)] * (s // 2 + 1)
        for h0, mass in enumerate(p):
            nxt[h0] += alphas[h0] * mass
            nxt[h0 + 1] += (1 - alphas[h0]) * mass
        p = nxt
    return [float(x) for x in p]


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

@dataclass
class InfectionSnapshot:
    """What the adversary sees: the infected set at time T, optionally the
    infection subtree and the virtual-source identity. The true source is
    deliberately not stored here."""

    infected: tuple
    T: int
    protocol: str
    subtree_edges: tuple = None
    virtual_source: int = None
    d0: object = None
    exhausted: bool = False  # a finite graph ran out of room mid-run

    def __post_init__(self):
        self.infected = tuple(self.infected)
        if self.subtree_edges is not None:
            self.subtree_edges = tuple((u, v) for u, v in self.subtree_edges)
        if self.T < 0 or not self.infected:
            raise ProtocolError("snapshot needs T >= 0 and a nonempty infected set")

    @property
    def size(self) -> int:
        return len(self.infected)

    def subtree_adjacency(self) -> dict:
        if self.subtree_edges is None:
            raise ProtocolError("snapshot carries no subtree edges")
        adj = {v: [] for v in self.infected}
        for u, v in self.subtree_edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def to_json(self) -> str:
        d0 = self.d0
        if d0 is INFINITE:
            d0 = "inf"
        return json.dumps(
            {
                "protocol": self.protocol,
                "T": self.T,
                "infected": sorted(self.infected),
                "subtree_edges": (
                    [list(e) for e in self.subtree_edges]
                    if self.subtree_edges is not None
                    else None
                ),
                "virtual_source": self.virtual_source,
                "d0": d0,
                "exhausted": self.exhausted,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "InfectionSnapshot":
        raw = json.loads(text)
        d0 = raw.get("d0")
        if d0 == "inf":
            d0 = INFINITE
        return cls(
            infected=tuple(raw["infected"]),
            T=raw["T"],
            protocol=raw["protocol"],
            subtree_edges=(
                tuple(tuple(e) for e in raw["subtree_edges"])
                if raw.get("subtree_edges") is not None
                else None
            ),
            virtual_source=raw.get("virtual_source"),
            d0=d0,
            exhausted=raw.get("exhausted", False),
        )


# ---------------------------------------------------------------------------
# Flooding and random diffusion
# ---------------------------------------------------------------------------

def run_flood(net: ContactNetwork, source: int, T: int) -> InfectionSnapshot:
    """Every infected node infects all uninfected neighbors each timestep:
    the infected set is the radius-T ball around the source."""
    infected = {source}
    edges = []
    frontier = [source]
    for _ in range(T):
        nxt = []
        for u in frontier:
            for w in net.neighbors(u):
                if w not in infected:
                    infected.add(w)
                    edges.append((u, w))
                    nxt.append(w)
        frontier = nxt
    return InfectionSnapshot(sorted(infected), T, "flood", subtree_edges=edges)


def run_random_diffusion(net, source, T, p, rand: RandomSource) -> InfectionSnapshot:
    """Discrete-time diffusion: each timestep, every uninfected neighbor of
    the infected set is independently infected with probability p."""
    if not 0 < p <= 1:
        raise ProtocolError(f"p must be in (0, 1], got {p}")
    infected = {source}
    edges = []
    for _ in range(T):
        proposals = {}
        for u in sorted(infected):
            for w in net.neighbors(u):
                if w not in infected:
                    proposals.setdefault(w, []).append(u)
        for w in sorted(proposals):
            if rand.bernoulli(p):
                infected.add(w)
                edges.append((rand.choice(proposals[w]), w))
    return InfectionSnapshot(sorted(infected), T, "diffusion", subtree_edges=edges)


# ---------------------------------------------------------------------------
# Line Protocol
# ---------------------------------------------------------------------------

def run_line_protocol(net, source, T, rand: RandomSource) -> InfectionSnapshot:
    """Boundary nodes spread with probability (hop distance + 1) / (t + 1).

    On a line or ring this is the two-boundary protocol; on other networks
    every frontier node plays the same per-neighbor rule (the regime where
    the protocol is known to leak the source).
    """
    if isinstance(net, Ring) and net.n < 2 * T + 2:
        raise ProtocolError(f"ring of size {net.n} too small for T={T} (needs >= {2 * T + 2})")
    degree_two = isinstance(net, Ring) or getattr(net, "d", None) == 2
    if degree_two:
        return _run_line_on_line(net, source, T, rand)

    dist = {source: 0}
    infected = {source}
    edges = []
    frontier = {source}
    exact = rand.exact
    for t in range(1, T + 1):
        additions = []
        for u in sorted(frontier):
            p = (
                Fraction(dist[u] + 1, t + 1)
                if exact
                else (dist[u] + 1) / (t + 1)
            )
            for w in net.neighbors(u):
                if w not in infected and rand.bernoulli(p):
                    additions.append((u, w))
        newly = set()
        for u, w in additions:
            if w in infected:
                continue
            infected.add(w)
            dist[w] = dist[u] + 1
            edges.append((u, w))
            newly.add(w)
        frontier = {
            u
            for u in frontier | newly
            if any(w not in infected for w in net.neighbors(u))
        }
    return InfectionSnapshot(sorted(infected), T, "line", subtree_edges=edges)


def _run_line_on_line(net, source, T, rand):
    # Two independent boundary walks; each side extends with probability
    # (extent + 1) / (t + 1).
    exact = rand.exact
    sides = []
    for direction in range(2):
        x = 0
        for t in range(1, T + 1):
            p = Fraction(x + 1, t + 1) if exact else (x + 1) / (t + 1)
            if rand.bernoulli(p):
                x += 1
        sides.append(x)
    right, left = sides

    # Walk outward from the source to recover node ids.
    infected = [source]
    edges = []
    for direction, extent in ((0, right), (1, left)):
        prev, cur = None, source
        for _ in range(extent):
            options = [w for w in net.neighbors(cur) if w != prev]
            nxt = options[direction] if prev is None else options[0]
            edges.append((cur, nxt))
            infected.append(nxt)
            prev, cur = cur, nxt
    return InfectionSnapshot(sorted(infected), T, "line", subtree_edges=edges)


# ---------------------------------------------------------------------------
# Tree Protocol
# ---------------------------------------------------------------------------

def run_tree_protocol(net, source, T, rand: RandomSource) -> InfectionSnapshot:
    """State-machine spreading that keeps the infected subtree balanced with
    the source among the leaves.

    Each infected node carries (s1, s2): s1 flags the chain of future
    centers, s2 is the node's eventual height in the subtree. A node acts
    once, the step after its infection: the s1 node picks one uninfected
    neighbor as the next center (height + 1) and seeds its remaining
    uninfected neighbors at height - 1; ordinary nodes with height > 0 seed
    all uninfected neighbors at height - 1; height-0 nodes never spread.
    """
    infected = {source}
    edges = []
    if T == 0:
        return InfectionSnapshot([source], 0, "tree")
    nbrs = net.neighbors(source)
    if not nbrs:
        raise ProtocolError("source has no neighbors")
    u = rand.choice(sorted(nbrs))
    infected.add(u)
    edges.append((source, u))
    s = {u: (1, 1)}  # node -> (s1, s2) for nodes that still have to act
    exhausted = False
    for t in range(2, T + 1):
        acting = sorted(s)
        nxt = {}
        for v in acting:
            s1, s2 = s[v]
            if s2 <= 0:
                continue
            uninfected = [w for w in net.neighbors(v) if w not in infected]
            if s1 == 1:
                if not uninfected:
                    exhausted = True
                    continue
                w = rand.choice(uninfected)
                infected.add(w)
                edges.append((v, w))
                nxt[w] = (1, s2 + 1)
                uninfected = [x for x in uninfected if x != w]
            for w in uninfected:
                if w in infected:
                    continue
                infected.add(w)
                edges.append((v, w))
                if s2 - 1 > 0:
                    nxt[w] = (0, s2 - 1)
        s = nxt
        if exhausted:
            break
    return InfectionSnapshot(
        sorted(infected), T, "tree", subtree_edges=edges, exhausted=exhausted
    )


def tree_protocol_size(d: int, T: int) -> int:
    """Exact infected count for the Tree Protocol on a d-regular tree."""
    if T == 0:
        return 1
    if d == 2:
        return T + 1
    if T % 2 == 1:
        return (2 * (d - 1) ** ((T + 1) // 2) - 2) // (d - 2)
    return (d * (d - 1) ** (T // 2) - 2) // (d - 2)


def tree_leaf_count(d: int, n_t: int) -> int:
    """Leaves of the Tree Protocol subtree: N_l = ((d-2) N_T + 2) / (d-1)."""
    if d == 2:
        return 2 if n_t >= 2 else 1
    num = (d - 2) * n_t + 2
    if num % (d - 1) != 0:
        raise ProtocolError(f"inconsistent (d, N_T) = ({d}, {n_t})")
    return num // (d - 1)


def flood_size(d: int, T: int) -> int:
    if T == 0:
        return 1
    if d == 2:
        return 2 * T + 1
    return 1 + d * ((d - 1) ** T - 1) // (d - 2)


# ---------------------------------------------------------------------------
# Adaptive diffusion
# ---------------------------------------------------------------------------

def run_adaptive_diffusion(
    net,
    source,
    T,
    sched: AlphaSchedule,
    cap: int = None,
    rand: RandomSource = None,
):
    """Adaptive diffusion: the virtual-source token keeps or passes per the
    alpha schedule; keep = one symmetric ring expansion plus an idle step,
    pass = two expansions away from the previous token holder.

    Returns (snapshot, trace). `cap` bounds how many neighbors one node may
    infect in a single timestep (general graphs); simultaneous infections
    resolve their subtree parent by seeded uniform choice.
    """
    if cap is not None and cap < 1:
        raise ProtocolError(f"cap must be >= 1, got {cap}")
    if rand is None:
        rand = RandomSource(0)
    infected = {source}
    parent = {source: None}
    children = {source: []}
    trace = []
    if T == 0:
        return (
            InfectionSnapshot([source], 0, "adaptive", subtree_edges=[],
                              virtual_source=source, d0=sched.d0),
            trace,
        )
    nbrs = net.neighbors(source)
    if not nbrs:
        raise ProtocolError("source has no neighbors")

    def infect(w, u, t):
        infected.add(w)
        parent[w] = u
        children[w] = []
        children[u].append(w)
        trace.append({"t": t, "event": "infect", "node": w, "from": u})

    def side_component(v_new, v_old):
        # Subtree component of v_new with the edge toward v_old removed.
        comp = {v_new}
        stack = [v_new]
        while stack:
            x = stack.pop()
            adjacent = list(children[x])
            if parent[x] is not None:
                adjacent.append(parent[x])
            for y in adjacent:
                if x == v_new and y == v_old:
                    continue
                if y not in comp:
                    comp.add(y)
                    stack.append(y)
        return comp

    def expand(spreaders, t):
        proposals = {}
        for u in sorted(spreaders):
            unf = [w for w in net.neighbors(u) if w not in infected]
            if cap is not None and len(unf) > cap:
                unf = rand.subset(sorted(unf), cap)
            for w in unf:
                proposals.setdefault(w, []).append(u)
        for w in sorted(proposals):
            infect(w, rand.choice(proposals[w]), t)

    # t = 1: the source always passes the token.
    v_cur = rand.choice(sorted(nbrs))
    infect(v_cur, source, 1)
    v_prev = source
    h = 1
    trace.append({"t": 1, "event": "pass", "virtual_source": v_cur})
    exhausted = False
    if T >= 2:
        expand([v_cur], 2)  # G_2: ball of radius 1 around the first token holder

    t_dec = 2
    while t_dec < T:
        a = sched.alpha_fraction(t_dec, h)
        keep = rand.bernoulli(a if rand.exact else float(a))
        candidates = [] if keep else sorted(
            w for w in net.neighbors(v_cur) if w != v_prev
        )
        if not keep and not candidates:
            keep = True
            exhausted = True
        if keep:
            trace.append({"t": t_dec, "event": "keep", "virtual_source": v_cur})
            if t_dec + 1 <= T:
                expand(sorted(infected), t_dec + 1)
            # t_dec + 2 is an idle step
        else:
            v_new = rand.choice(candidates)
            if v_new not in infected:
                infect(v_new, v_cur, t_dec + 1)
            h += 1
            trace.append({"t": t_dec, "event": "pass", "virtual_source": v_new})
            if t_dec + 1 <= T:
                expand(sorted(side_component(v_new, v_cur)), t_dec + 1)
            if t_dec + 2 <= T:
                expand(sorted(side_component(v_new, v_cur)), t_dec + 2)
            v_prev, v_cur = v_cur, v_new
        t_dec += 2

    edges = [(parent[w], w) for w in sorted(infected) if parent[w] is not None]
    snap = InfectionSnapshot(
        sorted(infected),
        T,
        "adaptive",
        subtree_edges=edges,
        virtual_source=v_cur,
        d0=sched.d0,
        exhausted=exhausted,
    )
    return snap, trace


def adaptive_size_branches(d: int, T: int) -> dict:
    """Exact N_T values for adaptive diffusion on a d-regular tree, keyed by
    the last decision: 'even' for even T, 'keep'/'pass' for odd T >= 3.

    The balanced-subtree shape fixes these counts; the odd-T branches follow
    the keep/pass outcome of the final decision.
    """
    def ball(depth):
        if depth == 0:
            return 1
        if d == 2:
            return 2 * depth + 1
        return (d * (d - 1) ** depth - 2) // (d - 2)

    def double_tree(depth):
        # Two (d-1)-ary trees of the given depth, roots joined by an edge.
        if d == 2:
            return 2 * depth + 2
        return (2 * (d - 1) ** (depth + 1) - 2) // (d - 2)

    if T == 0:
        return {"even": 1}
    if T == 1:
        return {"pass": 2, "keep": 2}
    if T % 2 == 0:
        return {"even": ball(T // 2)}
    return {"keep": ball((T + 1) // 2), "pass": double_tree((T - 1) // 2)}
