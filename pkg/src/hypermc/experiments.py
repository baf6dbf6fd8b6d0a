"""Monte Carlo harness: per-trial runs against ground truth, sweeps over a
sample-probability / hypergraph-quality / edge-retention axis, network
degradation, and the semi-real pipeline that fixes clusters from class
labels of a real-style contact network.
"""
from __future__ import annotations

import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .formats import clique_expand
from .mch import RefineConfig, default_refine_config, run_mch
from .model import (
    ClusterAssignment,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    RatingMatrix,
    UniformHypergraph,
    params_from_qualities,
)
from .synth import (
    ARTIFACT_DEGRADE,
    ARTIFACT_RATINGS,
    ARTIFACT_VECTORS,
    GenSeed,
    gen_instance,
    gen_observed,
    gen_rating_vectors_min_distance,
)
from .theory import quantities_for_params

VARIANT_MCH = "mch"
VARIANT_GRAPH = "graph"
VARIANT_CLIQUE = "clique"
VARIANTS = (VARIANT_MCH, VARIANT_GRAPH, VARIANT_CLIQUE)

AXIS_P_RATIO = "p_ratio"
AXIS_I3HAT = "i3hat"
AXIS_Q = "q"
AXES = (AXIS_P_RATIO, AXIS_I3HAT, AXIS_Q)


def cluster_error_fraction(estimate: ClusterAssignment, truth: ClusterAssignment) -> float:
    """Misclassified fraction minimized over label permutations (exact
    assignment matching on the K x K confusion matrix)."""
    if estimate.n != truth.n:
        raise ValueError("assignments cover different user counts")
    K = max(estimate.K, truth.K)
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (estimate.labels, truth.labels), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return 1.0 - confusion[rows, cols].sum() / truth.n


def wilson_halfwidth(successes: int, trials: int, z: float = 1.959963984540054) -> float:
    """Half-width of the Wilson 95% score interval for a binomial fraction."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    return half


@dataclass(frozen=True)
class TrialResult:
    master_seed: int
    trial: int
    variant: str
    exact_recovery: bool
    mae: float
    cluster_error_fraction: float
    wall_time: float
    error: str | None = None


def _variant_bundle(bundle: HypergraphBundle, variant: str) -> HypergraphBundle:
    if variant == VARIANT_MCH:
        return bundle
    if variant == VARIANT_GRAPH:
        return bundle.graph_only()
    if variant == VARIANT_CLIQUE:
        return clique_expand(bundle)
    raise ValueError(f"unknown variant {variant!r}")


def _variant_refine_config(
    variant: str,
    params: ModelParams | None,
    run_bundle: HypergraphBundle,
    n: int,
    K: int,
    override: RefineConfig | None,
) -> RefineConfig | None:
    if override is not None:
        kept = {d: override.c.get(d, 0.0) for d, _ in run_bundle.layers()}
        return RefineConfig(T=override.T, c=kept)
    if params is None or variant == VARIANT_CLIQUE:
        # Clique expansion changes the d = 2 edge distribution, so the true
        # layer parameters no longer apply; estimate on the fly instead.
        return None
    restricted = replace(
        params,
        alpha={d: params.alpha[d] for d, _ in run_bundle.layers() if d in params.alpha},
        beta={d: params.beta[d] for d, _ in run_bundle.layers() if d in params.beta},
    )
    return default_refine_config(restricted, n, K)


def _evaluate(
    truth: RatingMatrix,
    assignment_truth: ClusterAssignment,
    bundle: HypergraphBundle,
    U: ObservedMatrix,
    variant: str,
    params: ModelParams | None,
    seed: GenSeed,
    refine_override: RefineConfig | None = None,
) -> TrialResult:
    started = time.perf_counter()
    run_bundle = _variant_bundle(bundle, variant)
    cfg = _variant_refine_config(
        variant, params, run_bundle, truth.n, assignment_truth.K, refine_override
    )
    try:
        result = run_mch(
            run_bundle,
            U,
            assignment_truth.K,
            params=None if cfg is not None else params,
            refine_config=cfg,
            seed=seed.algorithm_seed(),
        )
    except Exception as exc:  # solver failure counts as a failed trial
        return TrialResult(
            master_seed=seed.master,
            trial=seed.trial,
            variant=variant,
            exact_recovery=False,
            mae=float("nan"),
            cluster_error_fraction=float("nan"),
            wall_time=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )
    truth_full = truth.full()
    mae = float(np.mean(result.completed != truth_full))
    return TrialResult(
        master_seed=seed.master,
        trial=seed.trial,
        variant=variant,
        exact_recovery=mae == 0.0,
        mae=mae,
        cluster_error_fraction=cluster_error_fraction(result.assignment, assignment_truth),
        wall_time=time.perf_counter() - started,
    )


def run_trial(params: ModelParams, variant: str, seed: GenSeed) -> TrialResult:
    """Generate one instance, run the requested variant, and score it against
    the ground truth (exactness, MAE, permutation-minimized cluster error)."""
    assignment, rating, U, bundle = gen_instance(params, seed)
    return _evaluate(rating, assignment, bundle, U, variant, params, seed)


@dataclass(frozen=True)
class SweepSpec:
    """Declarative sweep: base parameters, one axis, trials per point.

    axis "p_ratio": grid values are multiples of the base parameters' sharp
    threshold p*. axis "i3hat": grid values are normalized 3-uniform layer
    qualities (I_3 = value * log n / C(n-1, 2)), p taken from base. axis
    "q": every hyperedge of the generated instance is retained with
    probability q = value before solving.
    """

    base: ModelParams
    axis: str
    grid: tuple[float, ...]
    trials: int = 50
    master_seed: int = 0
    variants: tuple[str, ...] = (VARIANT_MCH,)
    alpha_beta_ratio: float = 16.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "variants", tuple(self.variants))
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.variants:
            raise ValueError("need at least one variant")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")


def _params_at(spec: SweepSpec, value: float) -> ModelParams:
    if spec.axis == AXIS_P_RATIO:
        p_star = quantities_for_params(spec.base).p_star
        return replace(spec.base, p=min(1.0, value * p_star))
    if spec.axis == AXIS_I3HAT:
        base = spec.base
        rebuilt = params_from_qualities(
            n=base.n,
            m=base.m,
            K=base.K,
            theta=base.theta,
            p=base.p,
            gamma=base.gamma,
            qualities={3: value},
            alpha_beta_ratio=spec.alpha_beta_ratio,
        )
        alpha = {d: a for d, a in base.alpha.items() if d != 3}
        beta = {d: b for d, b in base.beta.items() if d != 3}
        alpha.update(rebuilt.alpha)
        beta.update(rebuilt.beta)
        return replace(base, alpha=alpha, beta=beta)
    return spec.base  # AXIS_Q: the instance itself is unchanged


def degrade_network(
    bundle: HypergraphBundle, q: float, rng: np.random.Generator
) -> HypergraphBundle:
    """Retain each hyperedge independently with probability q, across all
    layers (layers visited in ascending d for stream stability)."""
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    graphs = {}
    for d, hg in bundle.layers():
        if q >= 1.0:
            graphs[d] = hg
            continue
        keep = rng.random(hg.num_edges) < q
        graphs[d] = UniformHypergraph(n=hg.n, d=d, edges=hg.edges[keep])
    return HypergraphBundle(n=bundle.n, graphs=graphs)


def _run_point_trial(spec: SweepSpec, point_index: int, trial: int) -> list[TrialResult]:
    value = spec.grid[point_index]
    params = _params_at(spec, value)
    seed = GenSeed(master=spec.master_seed, trial=point_index * spec.trials + trial)
    assignment, rating, U, bundle = gen_instance(params, seed)
    if spec.axis == AXIS_Q:
        bundle = degrade_network(bundle, value, seed.rng(ARTIFACT_DEGRADE))
    return [
        _evaluate(rating, assignment, bundle, U, variant, params, seed)
        for variant in spec.variants
    ]


def _sweep_worker(args: tuple[SweepSpec, int, int]) -> tuple[int, int, list[TrialResult]]:
    spec, point_index, trial = args
    return point_index, trial, _run_point_trial(spec, point_index, trial)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    variant: str
    n_trials: int
    err_prob: float
    err_ci: float
    mean_mae: float
    mae_sd: float


def aggregate_rows(
    spec: SweepSpec, results: Mapping[tuple[int, str], Sequence[TrialResult]]
) -> list[SweepRow]:
    rows: list[SweepRow] = []
    for point_index, value in enumerate(spec.grid):
        for variant in spec.variants:
            trials = list(results[(point_index, variant)])
            failures = sum(1 for t in trials if not t.exact_recovery)
            maes = np.array([t.mae for t in trials], dtype=float)
            maes = maes[~np.isnan(maes)]
            rows.append(
                SweepRow(
                    axis_value=value,
                    variant=variant,
                    n_trials=len(trials),
                    err_prob=failures / len(trials),
                    err_ci=wilson_halfwidth(failures, len(trials)),
                    mean_mae=float(maes.mean()) if maes.size else float("nan"),
                    mae_sd=float(maes.std(ddof=1)) if maes.size > 1 else 0.0,
                )
            )
    return rows


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """All grid points x variants, aggregated over independent trial
    substreams. Trials are independent work items; aggregation sorts by
    (point, trial), so the table is identical for any worker count."""
    jobs = [
        (spec, point_index, trial)
        for point_index in range(len(spec.grid))
        for trial in range(spec.trials)
    ]
    collected: dict[tuple[int, str], list[TrialResult]] = {
        (pi, v): [] for pi in range(len(spec.grid)) for v in spec.variants
    }
    if workers > 1:
        # spawn: forking after BLAS/OpenMP threads exist can deadlock children
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            outputs = sorted(pool.map(_sweep_worker, jobs), key=lambda r: (r[0], r[1]))
    else:
        outputs = [_sweep_worker(job) for job in jobs]
    for point_index, _, trial_results in outputs:
        for result in trial_results:
            collected[(point_index, result.variant)].append(result)
    return aggregate_rows(spec, collected)


@dataclass(frozen=True)
class SemiRealSpec:
    """Semi-real study: clusters fixed from class labels of a real-style
    network, synthetic ratings on top, optional edge retention q."""

    m: int
    gamma: float
    theta: float
    p: float
    q: float = 1.0
    trials: int = 20
    master_seed: int = 0
    variants: tuple[str, ...] = (VARIANT_MCH, VARIANT_GRAPH, VARIANT_CLIQUE)
    refine_c: float = 0.01
    refine_T: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variants", tuple(self.variants))
        if not (0.0 <= self.q <= 1.0):
            raise ValueError("q must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass(frozen=True)
class SemiRealRow:
    q: float
    variant: str
    n_trials: int
    err_prob: float
    mean_mae: float
    mae_sd: float
    mean_cluster_error: float


def semi_real_pipeline(
    bundle: HypergraphBundle,
    labels: np.ndarray,
    spec: SemiRealSpec,
) -> list[SemiRealRow]:
    """Per trial: synthesize nominal vectors at the requested minimum
    distance, personalize and sub-sample them, retain hyperedges with
    probability q, then run every variant with fixed refinement weights
    (the class sizes need not be equal, so the closed-form weights do not
    apply; a flat c works well on high-quality real networks)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size != bundle.n:
        raise ValueError("label vector does not cover the network nodes")
    K = int(labels.max()) + 1
    assignment = ClusterAssignment(labels=labels, K=K)
    layer_ds = [d for d, _ in bundle.layers()]
    T = spec.refine_T if spec.refine_T is not None else max(1, math.ceil(math.log2(bundle.n)))
    per_variant: dict[str, list[TrialResult]] = {v: [] for v in spec.variants}
    for trial in range(spec.trials):
        seed = GenSeed(master=spec.master_seed, trial=trial)
        vectors = gen_rating_vectors_min_distance(
            spec.m, K, spec.gamma, seed.rng(ARTIFACT_VECTORS)
        )
        rating = RatingMatrix(vectors=vectors, assignment=assignment, gamma=spec.gamma)
        U = gen_observed(rating, spec.theta, spec.p, seed.rng(ARTIFACT_RATINGS))
        degraded = degrade_network(bundle, spec.q, seed.rng(ARTIFACT_DEGRADE))
        override = RefineConfig(T=T, c={d: spec.refine_c for d in layer_ds})
        for variant in spec.variants:
            per_variant[variant].append(
                _evaluate(
                    rating, assignment, degraded, U, variant, None, seed,
                    refine_override=override,
                )
            )
    rows = []
    for variant in spec.variants:
        trials = per_variant[variant]
        maes = np.array([t.mae for t in trials], dtype=float)
        maes = maes[~np.isnan(maes)]
        cerr = np.array([t.cluster_error_fraction for t in trials], dtype=float)
        cerr = cerr[~np.isnan(cerr)]
        failures = sum(1 for t in trials if not t.exact_recovery)
        rows.append(
            SemiRealRow(
                q=spec.q,
                variant=variant,
                n_trials=len(trials),
                err_prob=failures / len(trials),
                mean_mae=float(maes.mean()) if maes.size else float("nan"),
                mae_sd=float(maes.std(ddof=1)) if maes.size > 1 else 0.0,
                mean_cluster_error=float(cerr.mean()) if cerr.size else float("nan"),
            )
        )
    return rows
