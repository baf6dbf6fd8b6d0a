"""Binary matrix completion aided by social graphs and uniform hypergraphs.

The package bundles the three-stage completion solver, the generative
model for synthetic instances, closed-form recovery thresholds, an exact
maximum-likelihood oracle for tiny instances, and a reproducible Monte
Carlo experiment harness with a CLI front end.
"""

__version__ = "0.1.0"

from .model import (
    ClusterAssignment,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    RatingMatrix,
    UniformHypergraph,
    agreement_count,
    global_agreement,
    h_count,
    in_cluster_edge_count,
    params_from_qualities,
)
from .synth import GenSeed, gen_clusters, gen_hypergraph, gen_instance, gen_observed, gen_rating_vectors
from .mch import (
    EstimatedParams,
    MCHResult,
    RefineConfig,
    WeightedAdjacency,
    build_adjacency,
    default_refine_config,
    estimate_params,
    majority_vote,
    refine,
    refine_step,
    run_mch,
    spectral_partition,
)
from .oracle import LikelihoodWeights, MLResult, log_likelihood_rel, ml_brute_force
from .theory import (
    InfoQuantities,
    PStar,
    gain_curve,
    info_d,
    info_quantities,
    info_theta,
    max_gain,
    p_star,
    theorem1_condition,
)
from .experiments import (
    SemiRealSpec,
    SweepSpec,
    TrialResult,
    cluster_error_fraction,
    degrade_network,
    run_sweep,
    run_trial,
    semi_real_pipeline,
)
from .formats import clique_expand, parse_hyperedge_list, read_network, read_observed_matrix

__all__ = [name for name in dir() if not name.startswith("_")]
