"""Contact networks: lazy infinite trees, rings, and finite edge-list graphs.

All networks answer neighbor queries with stable node ids. Infinite trees
are materialized lazily, one whole breadth-first layer at a time, so the
adjacency (and the ids) never depend on the order in which a protocol
happens to ask for neighbors.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

from .randomness import RandomSource, mix_seed


class GraphError(Exception):
    pass


class UnknownNodeError(GraphError):
    pass


class DepthBoundError(GraphError):
    """A lazy tree was queried past its configured depth bound."""


# ---------------------------------------------------------------------------
# Degree distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegreeDistribution:
    """Distribution over node degrees, all >= 2 so branches never die out.

    support: list of (degree, probability) pairs summing to 1.
    """

    support: tuple

    def __init__(self, support):
        pairs = tuple(sorted((int(d), float(p)) for d, p in support))
        object.__setattr__(self, "support", pairs)
        if not pairs:
            raise GraphError("degree distribution needs at least one entry")
        for d, p in pairs:
            if d < 2:
                raise GraphError(f"degree {d} < 2 would terminate tree branches")
            if p < 0:
                raise GraphError("negative probability in degree distribution")
        total = sum(p for _, p in pairs)
        if abs(total - 1.0) > 1e-9:
            raise GraphError(f"degree probabilities sum to {total}, not 1")

    def sample(self, rng: RandomSource) -> int:
        u = rng.random()
        acc = 0.0
        for d, p in self.support:
            acc += p
            if u < acc:
                return d
        return self.support[-1][0]

    def log_moment(self) -> float:
        """E[log(D - 1)], the growth exponent of the sampled tree."""
        return sum(p * math.log(d - 1) for d, p in self.support)

    def growth_factor(self) -> float:
        return math.exp(self.log_moment())

    def min_degree(self) -> int:
        return min(d for d, p in self.support if p > 0)


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

class ContactNetwork:
    kind = "abstract"

    def neighbors(self, v: int) -> list:
        raise NotImplementedError

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def descriptor(self) -> dict:
        raise NotImplementedError


class _LazyTree(ContactNetwork):
    """Infinite tree materialized in whole BFS layers.

    The root is node 0 and ids are assigned in BFS order. Because a layer
    is always built as a unit, any interleaving of neighbor queries yields
    the same adjacency. Target degrees come from `_draw_degree`, which must
    be a pure function of the node id.
    """

    def __init__(self, max_depth=None):
        self.max_depth = max_depth
        self._parent = [-1]
        self._children = [None]  # None = children not yet materialized
        self._depth = [0]
        self._layers = [[0]]

    def _draw_degree(self, v: int) -> int:
        raise NotImplementedError

    def _build_through(self, depth: int) -> None:
        while len(self._layers) <= depth:
            if self.max_depth is not None and len(self._layers) > self.max_depth:
                raise DepthBoundError(
                    f"query needs depth {depth}, bound is {self.max_depth}"
                )
            new_layer = []
            for u in self._layers[-1]:
                n_children = self._draw_degree(u) - (0 if u == 0 else 1)
                kids = []
                for _ in range(n_children):
                    w = len(self._parent)
                    self._parent.append(u)
                    self._children.append(None)
                    self._depth.append(len(self._layers))
                    kids.append(w)
                self._children[u] = kids
                new_layer.extend(kids)
            self._layers.append(new_layer)

    def neighbors(self, v: int) -> list:
        if v < 0 or v >= len(self._parent):
            raise UnknownNodeError(f"node {v} was never materialized")
        if self._children[v] is None:
            self._build_through(self._depth[v] + 1)
        if v == 0:
            return list(self._children[v])
        return [self._parent[v]] + list(self._children[v])

    def depth_of(self, v: int) -> int:
        return self._depth[v]

    def materialize(self, depth: int) -> None:
        """Pre-build all layers through `depth` (e.g. before sharing the
        network across workers)."""
        self._build_through(depth)

    def node_count(self) -> int:
        return len(self._parent)

    def edges(self):
        return [(self._parent[v], v) for v in range(1, len(self._parent))]


class RegularTree(_LazyTree):
    """Infinite d-regular tree. d=2 is the infinite line."""

    kind = "regular_tree"

    def __init__(self, d: int, max_depth=None):
        if d < 2:
            raise GraphError(f"regular tree degree must be >= 2, got {d}")
        super().__init__(max_depth)
        self.d = d

    def _draw_degree(self, v: int) -> int:
        return self.d

    def degree(self, v: int) -> int:
        return self.d

    def descriptor(self) -> dict:
        return {"kind": self.kind, "d": self.d, "max_depth": self.max_depth}


class SampledTree(_LazyTree):
    """Infinite tree with i.i.d. degrees drawn from a DegreeDistribution.

    Each node's degree comes from a substream keyed by (seed, node id), so
    the same seed always yields the same tree.
    """

    kind = "sampled_tree"

    def __init__(self, dist: DegreeDistribution, max_depth=None, seed: int = 0):
        super().__init__(max_depth)
        self.dist = dist
        self.seed = seed
        self._degree_cache = {}

    def _draw_degree(self, v: int) -> int:
        d = self._degree_cache.get(v)
        if d is None:
            d = self.dist.sample(RandomSource(mix_seed(self.seed, 0xD15C, v)))
            self._degree_cache[v] = d
        return d

    def degree(self, v: int) -> int:
        if v < 0 or v >= len(self._parent):
            raise UnknownNodeError(f"node {v} was never materialized")
        return self._draw_degree(v)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "distribution": list(self.dist.support),
            "seed": self.seed,
            "max_depth": self.max_depth,
        }


class Ring(ContactNetwork):
    kind = "ring"

    def __init__(self, n: int):
        if n < 3:
            raise GraphError(f"ring needs at least 3 nodes, got {n}")
        self.n = n

    def neighbors(self, v: int) -> list:
        if not 0 <= v < self.n:
            raise UnknownNodeError(f"node {v} not on ring of size {self.n}")
        return [(v + 1) % self.n, (v - 1) % self.n]

    def degree(self, v: int) -> int:
        return 2

    def descriptor(self) -> dict:
        return {"kind": self.kind, "n": self.n}


class FiniteGraph(ContactNetwork):
    kind = "finite_graph"

    def __init__(self, adjacency: dict):
        self.adj = {v: sorted(ns) for v, ns in adjacency.items()}
        for v, ns in self.adj.items():
            for w in ns:
                if v not in adjacency.get(w, ()):
                    raise GraphError(f"adjacency not symmetric at edge ({v},{w})")

    def neighbors(self, v: int) -> list:
        try:
            return self.adj[v]
        except KeyError:
            raise UnknownNodeError(f"node {v} not in graph") from None

    def nodes(self) -> list:
        return sorted(self.adj)

    @property
    def n_nodes(self) -> int:
        return len(self.adj)

    @property
    def n_edges(self) -> int:
        return sum(len(ns) for ns in self.adj.values()) // 2

    def edges(self):
        return sorted(
            (v, w) for v, ns in self.adj.items() for w in ns if v < w
        )

    def descriptor(self) -> dict:
        return {"kind": self.kind, "nodes": self.n_nodes, "edges": self.n_edges}

    @classmethod
    def from_edges(cls, edges) -> "FiniteGraph":
        adj = {}
        for u, v in edges:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        return cls({v: sorted(ns) for v, ns in adj.items()})


# ---------------------------------------------------------------------------
# Edge-list loading
# ---------------------------------------------------------------------------

class EdgeListParseError(GraphError):
    pass


def load_edge_list(source, min_degree: int = 1, iterate: bool = False) -> FiniteGraph:
    """Load an undirected graph from a whitespace-separated edge list.

    Lines starting with '#' are comments; self-loops and duplicate edges
    are dropped. Nodes with degree < min_degree are removed, by default in
    a single pass; iterate=True re-prunes until a fixpoint.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("ascii")

    adj = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EdgeListParseError(f"line {lineno}: expected two node ids")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(
                f"line {lineno}: non-integer node id in {line!r}"
            ) from None
        if u == v:
            continue
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)

    while True:
        doomed = {v for v, ns in adj.items() if len(ns) < min_degree}
        if doomed:
            adj = {
                v: ns - doomed for v, ns in adj.items() if v not in doomed
            }
        if not doomed or not iterate:
            break

    if not adj:
        raise GraphError("graph is empty after pruning")
    return FiniteGraph({v: sorted(ns) for v, ns in adj.items()})


def load_edge_list_file(path, min_degree: int = 1, iterate: bool = False) -> FiniteGraph:
    with open(path, "rb") as fh:
        return load_edge_list(fh, min_degree=min_degree, iterate=iterate)


# ---------------------------------------------------------------------------
# Tree / graph utilities
# ---------------------------------------------------------------------------

def _as_adjacency(graph) -> dict:
    if isinstance(graph, dict):
        return graph
    if isinstance(graph, FiniteGraph):
        return graph.adj
    raise GraphError(f"cannot interpret {type(graph)!r} as an adjacency map")


def adjacency_from_edges(edges) -> dict:
    adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    return adj


def bfs_distances(adj: dict, start) -> dict:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def hop_distance(graph, u, v) -> int:
    """Shortest-path hop count. `graph` is a ContactNetwork or adjacency map."""
    if u == v:
        return 0
    if isinstance(graph, (dict, FiniteGraph)):
        adj = _as_adjacency(graph)
        dist = {u: 0}
        queue = deque([u])
        while queue:
            x = queue.popleft()
            for w in adj[x]:
                if w == v:
                    return dist[x] + 1
                if w not in dist:
                    dist[w] = dist[x] + 1
                    queue.append(w)
        raise GraphError(f"nodes {u} and {v} are not connected")
    # Lazy networks: bidirectional-ish BFS from u, bounded only by reachability.
    dist = {u: 0}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for w in graph.neighbors(x):
            if w == v:
                return dist[x] + 1
            if w not in dist:
                dist[w] = dist[x] + 1
                queue.append(w)
    raise GraphError(f"nodes {u} and {v} are not connected")


def _farthest(adj: dict, start):
    dist = bfs_distances(adj, start)
    if len(dist) != len(adj):
        raise GraphError("subgraph is not connected")
    far = max(dist, key=lambda v: (dist[v], v))
    return far, dist


def tree_path(adj: dict, u, v) -> list:
    """The unique u..v path in a tree, endpoints included."""
    parent = {u: None}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        if x == v:
            break
        for w in adj[x]:
            if w not in parent:
                parent[w] = x
                queue.append(w)
    if v not in parent:
        raise GraphError(f"nodes {u} and {v} are not connected")
    path = [v]
    while path[-1] != u:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def jordan_center(graph) -> list:
    """Eccentricity-minimizing node(s) of a connected tree.

    Returns one node, or two adjacent nodes for even-diameter ties,
    computed as the middle of a diameter path.
    """
    adj = _as_adjacency(graph) if not isinstance(graph, (list, tuple)) else adjacency_from_edges(graph)
    if not adj:
        raise GraphError("empty graph has no center")
    n_edges = sum(len(ns) for ns in adj.values()) // 2
    if n_edges != len(adj) - 1:
        raise GraphError("jordan_center expects a tree")
    if len(adj) == 1:
        return list(adj)
    a, _ = _farthest(adj, next(iter(sorted(adj))))
    b, _ = _farthest(adj, a)
    path = tree_path(adj, a, b)
    m = len(path) - 1  # diameter
    if m % 2 == 0:
        return [path[m // 2]]
    return sorted([path[m // 2], path[m // 2 + 1]])


def eccentricities(adj: dict) -> dict:
    """Per-node eccentricity within a connected subgraph (BFS from each node)."""
    out = {}
    for v in adj:
        dist = bfs_distances(adj, v)
        if len(dist) != len(adj):
            raise GraphError("subgraph is not connected")
        out[v] = max(dist.values())
    return out


# ---------------------------------------------------------------------------
# Network specs and serialization
# ---------------------------------------------------------------------------

def parse_degree_distribution(text: str) -> DegreeDistribution:
    """Parse '3=0.5,4=0.5' into a DegreeDistribution."""
    pairs = []
    for chunk in text.split(","):
        d, p = chunk.split("=")
        pairs.append((int(d), float(p)))
    return DegreeDistribution(pairs)


def network_from_spec(spec: str, seed: int = 0, max_depth=None) -> ContactNetwork:
    """Build a network from a compact CLI spec.

    regular:D | line | ring:N | sampled:3=0.5,4=0.5 | edgelist:PATH[:MINDEG]
    """
    if spec == "line":
        return RegularTree(2, max_depth=max_depth)
    kind, _, rest = spec.partition(":")
    if kind == "regular":
        return RegularTree(int(rest), max_depth=max_depth)
    if kind == "ring":
        return Ring(int(rest))
    if kind == "sampled":
        return SampledTree(parse_degree_distribution(rest), max_depth=max_depth, seed=seed)
    if kind == "edgelist":
        path, _, mindeg = rest.partition(":")
        return load_edge_list_file(path, min_degree=int(mindeg) if mindeg else 1)
    raise GraphError(f"unknown network spec {spec!r}")


def write_edge_list(net: ContactNetwork, out, header: bool = True) -> None:
    """Serialize the (materialized part of the) network as '# json-header'
    plus one edge per line."""
    if header:
        out.write("# " + json.dumps(net.descriptor(), sort_keys=True) + "\n")
    if isinstance(net, Ring):
        edges = [(v, (v + 1) % net.n) for v in range(net.n)]
    else:
        edges = net.edges()
    for u, v in edges:
        out.write(f"{u} {v}\n")
