import math

import numpy as np
import pytest

from hypermc.mch import (
    EstimatedParams,
    RefineConfig,
    WeightedAdjacency,
    agreement_matrix,
    build_adjacency,
    default_refine_config,
    estimate_params,
    layer_weight,
    majority_vote,
    refine,
    refine_scores,
    refine_step,
    run_mch,
    spectral_partition,
)
from hypermc.model import (
    ClusterAssignment,
    HypergraphBundle,
    ModelParams,
    ObservedMatrix,
    UniformHypergraph,
)
from hypermc.synth import GenSeed, gen_instance
from oracles import refine_score_naive


def hg(n, d, edges):
    return UniformHypergraph(n=n, d=d, edges=np.array(edges, dtype=np.int64).reshape(-1, d))


def bundle_of(n, layers):
    return HypergraphBundle(n=n, graphs={d: hg(n, d, e) for d, e in layers.items()})


class TestAdjacency:
    def test_single_triple(self):
        A = build_adjacency(bundle_of(4, {3: [[0, 1, 2]]})).matrix
        for i, j in ((0, 1), (0, 2), (1, 2)):
            assert A[i, j] == pytest.approx(1 / 3)
            assert A[j, i] == pytest.approx(1 / 3)
        assert A[0, 3] == 0 and np.all(np.diag(A) == 0)

    def test_empty_bundle(self):
        A = build_adjacency(HypergraphBundle(n=5, graphs={})).matrix
        assert np.all(A == 0)

    def test_layer_weights_sum(self):
        A = build_adjacency(bundle_of(4, {2: [[0, 1]], 3: [[0, 1, 2]]})).matrix
        assert A[0, 1] == pytest.approx(1 / 2 + 1 / 3)

    def test_total_mass_identity(self):
        # sum_{i<j} A_ij = sum_d C(d,2)/d * |H_d|
        layers = {2: [[0, 1], [2, 3], [1, 2]], 3: [[0, 1, 2], [1, 2, 3]]}
        A = build_adjacency(bundle_of(6, layers)).matrix
        total = np.triu(A, k=1).sum()
        expected = 3 * (1 / 2) + 2 * (3 / 3)
        assert total == pytest.approx(expected)
        assert np.array_equal(A, A.T)


class TestSpectral:
    def test_two_cliques_exact(self):
        edges = [[i, j] for block in (range(4), range(4, 8))
                 for i in block for j in block if i < j]
        asn = spectral_partition(build_adjacency(bundle_of(8, {2: edges})), 2, random_state=0)
        assert len(set(asn.labels[:4])) == 1
        assert len(set(asn.labels[4:])) == 1
        assert asn.labels[0] != asn.labels[7]

    def test_three_triangles_exact(self):
        edges = [[i, j] for block in (range(3), range(3, 6), range(6, 9))
                 for i in block for j in block if i < j]
        asn = spectral_partition(build_adjacency(bundle_of(9, {2: edges})), 3, random_state=0)
        blocks = [set(asn.labels[:3]), set(asn.labels[3:6]), set(asn.labels[6:])]
        assert all(len(b) == 1 for b in blocks)
        assert len({b.pop() for b in blocks}) == 3

    def test_zero_matrix_nonempty_clusters(self):
        asn = spectral_partition(WeightedAdjacency(matrix=np.zeros((7, 7))), 3, random_state=0)
        assert asn.sizes().min() >= 1

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        M = rng.random((10, 10))
        M = (M + M.T) / 2
        np.fill_diagonal(M, 0)
        a = spectral_partition(WeightedAdjacency(matrix=M), 2, random_state=5)
        b = spectral_partition(WeightedAdjacency(matrix=M), 2, random_state=5)
        assert np.array_equal(a.labels, b.labels)


class TestMajorityVote:
    def test_spec_columns(self):
        asn = ClusterAssignment(labels=np.zeros(4, dtype=np.int64), K=1)
        U = ObservedMatrix(entries=np.array([[1], [1], [-1], [0]], dtype=np.int8))
        assert majority_vote(asn, U).tolist() == [[1]]
        U_tie = ObservedMatrix(entries=np.array([[1], [-1]], dtype=np.int8))
        asn2 = ClusterAssignment(labels=np.zeros(2, dtype=np.int64), K=1)
        assert majority_vote(asn2, U_tie).tolist() == [[1]]

    def test_noiseless_recovery(self):
        params = ModelParams(n=12, m=8, K=2, theta=0.0, p=1.0, gamma=0.5,
                             alpha={2: 0.9}, beta={2: 0.05})
        asn, rating, U, _ = gen_instance(params, GenSeed(1, 0))
        assert np.array_equal(majority_vote(asn, U), rating.vectors)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 3, size=10)
        entries = rng.choice([-1, 0, 1], size=(10, 6)).astype(np.int8)
        U = ObservedMatrix(entries=entries)
        base = majority_vote(ClusterAssignment(labels=labels, K=3), U)
        perm = np.array([2, 0, 1])
        permuted = majority_vote(ClusterAssignment(labels=perm[labels], K=3), U)
        assert np.array_equal(permuted[perm], base)


class TestRefine:
    def _fixture(self):
        # n=6, K=2; one graph edge {0, 3}; user 0 misplaced into cluster 1,
        # strong rating agreement pulls it back to cluster 0.
        n = 6
        bundle = bundle_of(n, {2: [[0, 3]]})
        vectors = np.array([[1, 1, 1, 1], [-1, -1, -1, -1]], dtype=np.int8)
        entries = np.zeros((n, 4), dtype=np.int8)
        entries[0] = [1, 1, 1, 1]
        entries[1] = [1, 1, 1, 0]
        entries[2] = [1, 1, 0, 0]
        entries[3] = [-1, -1, -1, 0]
        entries[4] = [-1, -1, 0, 0]
        entries[5] = [-1, -1, -1, -1]
        U = ObservedMatrix(entries=entries)
        prev = ClusterAssignment(labels=np.array([1, 0, 0, 1, 1, 1]), K=2)
        truth = ClusterAssignment(labels=np.array([0, 0, 0, 1, 1, 1]), K=2)
        return bundle, U, vectors, prev, truth

    def test_misplaced_user_returns(self):
        bundle, U, vectors, prev, truth = self._fixture()
        cfg = RefineConfig(T=3, c={2: 0.2})
        step = refine_step(prev, bundle, U, vectors, cfg)
        assert np.array_equal(step.labels, truth.labels)

    def test_scores_match_naive(self):
        bundle, U, vectors, prev, _ = self._fixture()
        c = {2: 0.37}
        scores = refine_scores(prev, bundle, U, vectors, c)
        layers = {2: bundle.layer(2).edges}
        sizes = prev.sizes()
        for i in range(6):
            for k in range(2):
                expected = refine_score_naive(
                    i, k, prev.labels, sizes, layers, U.entries, vectors, c
                )
                assert scores[i, k] == pytest.approx(expected, rel=1e-12)

    def test_c_zero_reduces_to_rating_argmax(self):
        bundle, U, vectors, prev, _ = self._fixture()
        cfg = RefineConfig(T=1, c={2: 0.0})
        step = refine_step(prev, bundle, U, vectors, cfg)
        expected = np.argmax(agreement_matrix(U, vectors), axis=1)
        assert np.array_equal(step.labels, expected)

    def test_empty_ratings_reduces_to_hyperedge_score(self):
        bundle, _, vectors, prev, _ = self._fixture()
        U0 = ObservedMatrix(entries=np.zeros((6, 4), dtype=np.int8))
        cfg = RefineConfig(T=1, c={2: 1.0})
        scores = refine_scores(prev, bundle, U0, vectors, cfg.c)
        step = refine_step(prev, bundle, U0, vectors, cfg)
        # ties toward the smallest index, matching argmax on the raw scores
        assert np.array_equal(step.labels, np.argmax(scores, axis=1))

    def test_scaling_invariance(self):
        bundle, U, vectors, prev, _ = self._fixture()
        s1 = refine_scores(prev, bundle, U, vectors, {2: 0.4}, rating_weight=1.0)
        s2 = refine_scores(prev, bundle, U, vectors, {2: 0.8}, rating_weight=2.0)
        assert np.array_equal(np.argmax(s1, axis=1), np.argmax(s2, axis=1))

    def test_t_zero_returns_initial(self):
        bundle, U, vectors, prev, _ = self._fixture()
        out = refine(prev, bundle, U, vectors, RefineConfig(T=0, c={2: 0.2}))
        assert np.array_equal(out.assignment.labels, prev.labels)
        assert out.iterations_run == 0

    def test_fixed_point_early_exit(self):
        bundle, U, vectors, _, truth = self._fixture()
        out = refine(truth, bundle, U, vectors, RefineConfig(T=5, c={2: 0.2}))
        assert out.converged and out.iterations_run == 1
        assert np.array_equal(out.assignment.labels, truth.labels)

    def test_empty_cluster_halts_with_previous(self):
        # ratings all agree with vector 0: every user moves to cluster 0
        bundle = bundle_of(4, {2: [[0, 1]]})
        vectors = np.array([[1, 1], [-1, -1]], dtype=np.int8)
        entries = np.ones((4, 2), dtype=np.int8)
        U = ObservedMatrix(entries=entries)
        prev = ClusterAssignment(labels=np.array([0, 0, 1, 1]), K=2)
        out = refine(prev, bundle, U, vectors, RefineConfig(T=4, c={2: 0.0}))
        assert out.halted_empty
        assert np.array_equal(out.assignment.labels, prev.labels)

    def test_prev_empty_cluster_rejected(self):
        bundle = bundle_of(3, {2: [[0, 1]]})
        vectors = np.array([[1], [-1]], dtype=np.int8)
        U = ObservedMatrix(entries=np.ones((3, 1), dtype=np.int8))
        prev = ClusterAssignment(labels=np.array([0, 0, 0]), K=2)
        with pytest.raises(ValueError):
            refine_step(prev, bundle, U, vectors, RefineConfig(T=1, c={2: 0.1}))


class TestEstimates:
    def _instance(self):
        params = ModelParams(n=30, m=20, K=3, theta=0.1, p=0.8, gamma=0.3,
                             alpha={2: 0.6}, beta={2: 0.1})
        return params, *gen_instance(params, GenSeed(7, 0))

    def test_theta_clamped_at_full_agreement(self):
        params, asn, rating, U, bundle = self._instance()
        est = estimate_params(asn, rating.vectors, bundle,
                              ObservedMatrix(entries=rating.full()))
        assert est.theta_est == pytest.approx(1e-6)

    def test_alpha_clamped_when_saturated(self):
        asn = ClusterAssignment(labels=np.array([0, 0, 1, 1]), K=2)
        bundle = bundle_of(4, {2: [[0, 1], [2, 3]]})
        vectors = np.array([[1], [-1]], dtype=np.int8)
        U = ObservedMatrix(entries=np.ones((4, 1), dtype=np.int8))
        est = estimate_params(asn, vectors, bundle, U)
        assert est.alpha_est[2] == pytest.approx(1.0 - 1e-12)

    def test_matches_closed_form_on_balanced_clusters(self):
        params, asn, rating, U, bundle = self._instance()
        est = estimate_params(asn, rating.vectors, bundle, U)
        n, K, d = params.n, params.K, 2
        in_count = sum(
            1 for e in bundle.layer(2).edges
            if asn.labels[e[0]] == asn.labels[e[1]]
        )
        denom_in = K * math.comb(n // K, d)
        denom_cross = math.comb(n, d) - denom_in
        assert est.alpha_est[2] == pytest.approx(in_count / denom_in)
        assert est.beta_est[2] == pytest.approx(
            (bundle.layer(2).num_edges - in_count) / denom_cross
        )
        r0 = rating.vectors[asn.labels]
        lam = int(np.count_nonzero(U.entries == r0))
        assert est.theta_est == pytest.approx(1.0 - lam / U.num_observed)

    def test_requires_observations(self):
        params, asn, rating, _, bundle = self._instance()
        U0 = ObservedMatrix(entries=np.zeros((30, 20), dtype=np.int8))
        with pytest.raises(ValueError):
            estimate_params(asn, rating.vectors, bundle, U0)


class TestRefineConfigDefaults:
    def test_layer_weight_closed_form(self):
        got = layer_weight(0.04, 0.01, 0.1, 3)
        expected = math.log(0.04 * 0.99 / (0.01 * 0.96)) / (3 * math.log(0.9 / 0.1))
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.2150, abs=1e-4)

    def test_equal_probs_give_zero(self):
        assert layer_weight(0.05, 0.05, 0.1, 3) == 0.0

    def test_iteration_count(self):
        params = ModelParams(n=300, m=100, K=3, theta=0.1, p=0.5, gamma=0.4,
                             alpha={2: 0.1}, beta={2: 0.01})
        cfg = default_refine_config(params, 300, 3)
        assert cfg.T == 9

    def test_theta_zero_uses_clamp(self):
        params = ModelParams(n=8, m=4, K=2, theta=0.0, p=1.0, gamma=0.5,
                             alpha={2: 0.9}, beta={2: 0.1})
        cfg = default_refine_config(params, 8, 2)
        assert math.isfinite(cfg.c[2]) and cfg.c[2] > 0

    def test_estimated_params_degenerate_layer_zeroed(self):
        est = EstimatedParams(theta_est=0.1, alpha_est={2: 0.05, 3: 0.01},
                              beta_est={2: 0.01, 3: 0.01})
        cfg = default_refine_config(est, 100, 2)
        assert cfg.c[3] == 0.0 and cfg.c[2] > 0


class TestRunMCH:
    def test_noiseless_saturated_exact(self):
        params = ModelParams(n=12, m=6, K=2, theta=0.0, p=1.0, gamma=0.5,
                             alpha={2: 0.999999}, beta={2: 1e-9})
        asn, rating, U, bundle = gen_instance(params, GenSeed(3, 0))
        result = run_mch(bundle, U, 2, params=params, seed=1)
        assert np.array_equal(result.completed, rating.full())

    def test_rows_from_estimated_vectors(self):
        params = ModelParams(n=18, m=8, K=3, theta=0.2, p=0.5, gamma=0.25,
                             alpha={2: 0.7}, beta={2: 0.05})
        _, _, U, bundle = gen_instance(params, GenSeed(8, 1))
        result = run_mch(bundle, U, 3, params=params, seed=2)
        vector_set = {tuple(v) for v in result.vectors.tolist()}
        for row in result.completed.tolist():
            assert tuple(row) in vector_set

    def test_estimation_mode_populates_estimates(self):
        params = ModelParams(n=18, m=8, K=2, theta=0.1, p=0.9, gamma=0.5,
                             alpha={2: 0.8}, beta={2: 0.05})
        _, _, U, bundle = gen_instance(params, GenSeed(9, 0))
        result = run_mch(bundle, U, 2, seed=3)
        assert result.estimates is not None
        assert 2 in result.estimates.alpha_est

    def test_shape_mismatch_rejected(self):
        params = ModelParams(n=12, m=6, K=2, theta=0.1, p=0.5, gamma=0.5,
                             alpha={2: 0.5}, beta={2: 0.1})
        _, _, U, bundle = gen_instance(params, GenSeed(0, 0))
        bad = HypergraphBundle(n=10, graphs={})
        with pytest.raises(ValueError):
            run_mch(bad, U, 2, params=params)
