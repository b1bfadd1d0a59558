"""Simulator and adversary toolkit for source-obfuscating message spreading.

Spreading protocols (flooding, random diffusion, line/tree spreading,
adaptive diffusion with a keep/pass token schedule), maximum-likelihood
source estimators, exact brute-force oracles, and a seeded Monte Carlo
experiment harness.
"""

__version__ = "0.1.0"

from .graphs import (
    DegreeDistribution,
    FiniteGraph,
    GraphError,
    RegularTree,
    Ring,
    SampledTree,
    load_edge_list,
    load_edge_list_file,
    network_from_spec,
)
from .protocols import (
    INFINITE,
    AlphaSchedule,
    InfectionSnapshot,
    ProtocolError,
    run_adaptive_diffusion,
    run_flood,
    run_line_protocol,
    run_random_diffusion,
    run_tree_protocol,
    state_distribution_closed,
    state_distribution_recursive,
)
from .estimators import (
    EstimatorError,
    SourceEstimate,
    estimate_jordan,
    estimate_leaf_general,
    estimate_ml_adaptive_regular,
    estimate_ml_irregular,
    estimate_ml_line,
    estimate_ml_tree_protocol,
    ring_posterior,
)
from .oracle import (
    OracleError,
    oracle_adaptive_likelihoods,
    oracle_detection_probability,
    oracle_line_distribution,
)
from .experiment import ExperimentConfig, MetricsReport, run_monte_carlo, sweep
from .randomness import RandomSource, mix_seed
