"""Seeded Monte Carlo harness.

Each trial draws its own substream from the master seed, so reports are
byte-identical no matter how many workers run or in what order trials
finish. Aggregation is integer sums only (hits, sizes, hop distances),
which makes the reduction exactly commutative.
"""

from __future__ import annotations

import csv
import io
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field, replace

from .estimators import (
    estimate_jordan,
    estimate_leaf_general,
    estimate_ml_adaptive_regular,
    estimate_ml_irregular,
    estimate_ml_line,
    estimate_ml_tree_protocol,
)
from .graphs import (
    FiniteGraph,
    Ring,
    SampledTree,
    bfs_distances,
    network_from_spec,
)
from .protocols import (
    INFINITE,
    AlphaSchedule,
    ProtocolError,
    run_adaptive_diffusion,
    run_flood,
    run_line_protocol,
    run_random_diffusion,
    run_tree_protocol,
)
from .randomness import RandomSource, mix_seed

_PROTOCOLS = ("flood", "diffusion", "line", "tree", "adaptive")
_ESTIMATORS = (
    "none",
    "jordan",
    "ml-line",
    "ml-tree",
    "ml-adaptive",
    "ml-irregular",
    "leaf-general",
)

CSV_COLUMNS = (
    "protocol",
    "network",
    "d0",
    "T",
    "trials",
    "pd",
    "pd_se",
    "mean_nt",
    "nt_se",
    "mean_hop",
    "hop_se",
)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    network: str
    protocol: str
    times: tuple
    trials: int
    seed: int = 0
    estimator: str = "none"
    d0: object = None  # int, INFINITE, or None
    p: float = None
    cap: int = None
    workers: int = 1

    def validate(self):
        if self.protocol not in _PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.times or any(t < 0 for t in self.times):
            raise ConfigError("need observation times T >= 0")
        kind = self.network.partition(":")[0] if self.network != "line" else "line"
        if self.protocol == "line" and kind not in ("ring", "line"):
            raise ConfigError("the path-spread protocol needs a ring or line network")
        if self.protocol == "tree" and kind not in ("regular", "line", "sampled"):
            raise ConfigError("the tree protocol needs a tree network")
        if self.protocol == "adaptive":
            if self.d0 is None:
                raise ConfigError("adaptive diffusion needs d0 (or 'inf')")
            AlphaSchedule(self.d0)  # validates
        if self.protocol == "diffusion" and self.p is None:
            raise ConfigError("random diffusion needs an infection probability p")
        if self.estimator == "ml-irregular":
            if self.d0 is None or self.d0 is INFINITE:
                raise ConfigError("ml-irregular needs a finite d0")
            if any(t % 2 for t in self.times):
                raise ConfigError("ml-irregular applies at even T only")
        # build once up front so bad specs fail before any trial runs
        network_from_spec(self.network, seed=self.seed, max_depth=max(self.times) + 2)


@dataclass
class MetricsReport:
    config: ExperimentConfig
    rows: list  # one dict per T, keyed by CSV_COLUMNS plus "histogram"
    wall_time: float

    def row_for(self, T):
        for row in self.rows:
            if row["T"] == T:
                return row
        raise KeyError(T)


def _make_network(cfg: ExperimentConfig, trial: int):
    max_depth = max(cfg.times) + 2
    kind = cfg.network.partition(":")[0]
    if kind == "sampled":
        # a fresh tree per trial, seeded by trial index
        return network_from_spec(
            cfg.network, seed=mix_seed(cfg.seed, 0x5EED, trial), max_depth=max_depth
        )
    return network_from_spec(cfg.network, seed=cfg.seed, max_depth=max_depth)


def _pick_source(cfg, net, rand):
    if isinstance(net, Ring):
        return rand.choice(range(net.n))
    if isinstance(net, FiniteGraph):
        return rand.choice(net.nodes())
    return 0  # lazy trees are vertex-transitive in law; use the root


def _run_protocol(cfg, net, source, T, rand):
    if cfg.protocol == "flood":
        return run_flood(net, source, T)
    if cfg.protocol == "diffusion":
        return run_random_diffusion(net, source, T, cfg.p, rand)
    if cfg.protocol == "line":
        return run_line_protocol(net, source, T, rand)
    if cfg.protocol == "tree":
        return run_tree_protocol(net, source, T, rand)
    snap, _ = run_adaptive_diffusion(
        net, source, T, AlphaSchedule(cfg.d0), cap=cfg.cap, rand=rand
    )
    return snap


def _estimate(cfg, net, snap, T, rand):
    name = cfg.estimator
    if name == "jordan":
        return estimate_jordan(snap, net, rand)
    if name == "ml-line":
        return estimate_ml_line(snap, net, T, rand)
    if name == "ml-tree":
        return estimate_ml_tree_protocol(snap, net, rand)
    if name == "ml-adaptive":
        return estimate_ml_adaptive_regular(snap, net, rand)
    if name == "ml-irregular":
        return estimate_ml_irregular(snap, net, cfg.d0, T, rand)
    return estimate_leaf_general(snap, net, cfg.d0 or INFINITE, T, rand)


def _hop(net, snap, source, chosen):
    if source == chosen:
        return 0
    if isinstance(net, Ring):
        d = abs(source - chosen)
        return min(d, net.n - d)
    # distance over the infection subtree (equals the tree distance on trees)
    adj = snap.subtree_adjacency()
    return bfs_distances(adj, source)[chosen]


def _accumulate(cfg: ExperimentConfig, trial_range) -> dict:
    """Integer accumulators per T for one chunk of trials."""
    acc = {
        T: {"hits": 0, "nt": 0, "nt2": 0, "hop": 0, "hop2": 0, "hist": {}}
        for T in cfg.times
    }
    for trial in trial_range:
        net = _make_network(cfg, trial)
        src_rand = RandomSource(mix_seed(cfg.seed, 0x50CE, trial))
        source = _pick_source(cfg, net, src_rand)
        for ti, T in enumerate(cfg.times):
            rand = RandomSource(mix_seed(cfg.seed, trial, ti))
            snap = _run_protocol(cfg, net, source, T, rand)
            a = acc[T]
            a["nt"] += snap.size
            a["nt2"] += snap.size * snap.size
            a["hist"][snap.size] = a["hist"].get(snap.size, 0) + 1
            if cfg.estimator != "none":
                est = _estimate(cfg, net, snap, T, rand.spawn(0xE57))
                if est.chosen == source:
                    a["hits"] += 1
                else:
                    hop = _hop(net, snap, source, est.chosen)
                    a["hop"] += hop
                    a["hop2"] += hop * hop
    return acc


def _merge(into: dict, other: dict) -> None:
    for T, a in other.items():
        b = into[T]
        for k in ("hits", "nt", "nt2", "hop", "hop2"):
            b[k] += a[k]
        for size, n in a["hist"].items():
            b["hist"][size] = b["hist"].get(size, 0) + n


def _worker(args):
    cfg, lo, hi = args
    return _accumulate(cfg, range(lo, hi))


def _mean_se(total, total_sq, n):
    mean = total / n
    if n < 2:
        return mean, 0.0
    var = max(0.0, (total_sq - total * total / n) / (n - 1))
    return mean, math.sqrt(var / n)


def run_monte_carlo(cfg: ExperimentConfig) -> MetricsReport:
    cfg.validate()
    start = time.monotonic()
    n = cfg.trials
    workers = max(1, cfg.workers)
    if workers == 1:
        acc = _accumulate(cfg, range(n))
    else:
        chunk = -(-n // workers)
        jobs = [(cfg, lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        acc = {
            T: {"hits": 0, "nt": 0, "nt2": 0, "hop": 0, "hop2": 0, "hist": {}}
            for T in cfg.times
        }
        with multiprocessing.Pool(workers) as pool:
            for part in pool.map(_worker, jobs):
                _merge(acc, part)

    rows = []
    for T in cfg.times:
        a = acc[T]
        mean_nt, nt_se = _mean_se(a["nt"], a["nt2"], n)
        row = {
            "protocol": cfg.protocol,
            "network": cfg.network,
            "d0": "" if cfg.d0 is None else ("inf" if cfg.d0 is INFINITE else cfg.d0),
            "T": T,
            "trials": n,
            "mean_nt": mean_nt,
            "nt_se": nt_se,
            "histogram": dict(sorted(a["hist"].items())),
        }
        if cfg.estimator == "none":
            row.update(pd="", pd_se="", mean_hop="", hop_se="")
        else:
            pd = a["hits"] / n
            row["pd"] = pd
            row["pd_se"] = math.sqrt(pd * (1 - pd) / n)
            row["mean_hop"], row["hop_se"] = _mean_se(a["hop"], a["hop2"], n)
        rows.append(row)
    return MetricsReport(cfg, rows, time.monotonic() - start)


def sweep(configs, out=None):
    """Run a grid of configs; returns reports and writes one CSV row per
    (config, T) in stable column order."""
    for cfg in configs:
        cfg.validate()
    reports = [run_monte_carlo(cfg) for cfg in configs]
    if out is not None:
        write_csv(reports, out)
    return reports


def write_csv(reports, out) -> None:
    close = False
    if isinstance(out, (str, os.PathLike)):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out)
        w.writerow(CSV_COLUMNS)
        for rep in reports:
            for row in rep.rows:
                w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    finally:
        if close:
            out.close()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def coverage_curve(net, d0, cap, trials, T_max, seed=0):
    """Mean fraction of a finite network infected at each t = 0..T_max under
    adaptive diffusion from uniform random sources."""
    n = net.n_nodes if isinstance(net, FiniteGraph) else net.n
    nodes = net.nodes() if isinstance(net, FiniteGraph) else list(range(net.n))
    sched = AlphaSchedule(d0)
    totals = [0] * (T_max + 1)
    for trial in range(trials):
        rand = RandomSource(mix_seed(seed, trial))
        source = rand.choice(nodes)
        _, trace = run_adaptive_diffusion(net, source, T_max, sched, cap=cap, rand=rand)
        count = [0] * (T_max + 1)
        for ev in trace:
            if ev["event"] == "infect":
                count[ev["t"]] += 1
        running = 1  # the source
        for t in range(T_max + 1):
            running += count[t] if t > 0 else 0
            totals[t] += running
    return [tot / (trials * n) for tot in totals]
