"""Tests for the entropy-constrained soft clustering solver."""

import math
from dataclasses import replace

import numpy as np
import pytest

from covclust import (
    DegenerateDistances,
    DimMismatch,
    InvalidDistance,
    InvalidParam,
    NotPSD,
    SampleCov,
    SoftClustConfig,
    SyntheticSpec,
    TooFewCurves,
    TooFewItems,
    fit,
    fit_reduced,
    frechet_mean,
    init_medoids,
    pairwise_dist2,
    partition_at,
    partition_stats,
    sample_cov,
    simulate,
    solve_partition,
    suggested_entropy,
)

# Frozen from an independent scalar computation: 0.75 * H(0.05) + 0.25 * log 2
# with H the natural-log binary entropy.
SUGGESTED_E_DEFAULT = 0.32217322764939077

# Frozen root of H(p) = 0.5 with p > 1/2, and the implied multiplier
# eta = 1 / log(p / (1 - p)) for the single-row distance pair (0, 1).
BINARY_P = 0.8002900974460228
BINARY_ETA = 0.7204048031464887

# Frozen two-row oracle: distances [[1, 3], [2, 0.5]] at average entropy 0.4,
# solved independently by nested bisection on the per-row entropies.
ORACLE_D = np.array([[1.0, 3.0], [2.0, 0.5]])
ORACLE_E = 0.4
ORACLE_PARTITION = np.array(
    [
        [0.8916558196099942, 0.10834418039000582],
        [0.17067861796216433, 0.8293213820378357],
    ]
)
ORACLE_OBJECTIVE = 1.9727062877232582


def scalar_cov(value, n=5, id_=None):
    return SampleCov(id=id_ or f"v{value}", matrix=np.array([[float(value)]]), n=n)


def diag_cov(values, n=5, id_="d"):
    return SampleCov(id=id_, matrix=np.diag(np.asarray(values, dtype=float)), n=n)


# ---------------------------------------------------------------------------
# suggested_entropy
# ---------------------------------------------------------------------------


class TestSuggestedEntropy:
    def test_default_profile_value(self):
        assert suggested_entropy(0.25, 0.05) == pytest.approx(
            SUGGESTED_E_DEFAULT, abs=1e-14
        )

    def test_zero_alpha_zero_beta_is_hard(self):
        assert suggested_entropy(0.0, 0.0) == 0.0

    def test_alpha_one_is_log2_for_any_beta(self):
        for beta in (0.0, 0.3, 1.0):
            assert suggested_entropy(1.0, beta) == pytest.approx(math.log(2.0))

    def test_beta_half_is_log2_at_alpha_zero(self):
        assert suggested_entropy(0.0, 0.5) == pytest.approx(math.log(2.0))

    def test_beta_endpoints_give_pure_alpha_blend(self):
        assert suggested_entropy(0.4, 0.0) == pytest.approx(0.4 * math.log(2.0))
        assert suggested_entropy(0.4, 1.0) == pytest.approx(0.4 * math.log(2.0))

    @pytest.mark.parametrize("alpha,beta", [(-0.1, 0.0), (1.1, 0.0), (0.0, -0.1), (0.0, 1.1), (math.nan, 0.0), (0.0, math.inf)])
    def test_rejects_out_of_range(self, alpha, beta):
        with pytest.raises(InvalidParam):
            suggested_entropy(alpha, beta)


# ---------------------------------------------------------------------------
# partition_at / partition_stats
# ---------------------------------------------------------------------------


def random_dist(rng, n, k):
    return rng.uniform(0.1, 5.0, size=(n, k))


class TestPartitionAt:
    def test_uniform_at_infinite_eta(self):
        d = np.array([[0.0, 1.0, 2.0]])
        p = partition_at(d, math.inf)
        assert np.allclose(p, 1.0 / 3.0)

    def test_exponential_ratio_identity(self):
        rng = np.random.default_rng(7)
        d = random_dist(rng, 6, 4)
        eta = 0.8
        p = partition_at(d, eta)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        for i in range(6):
            for j in range(1, 4):
                expected = math.exp(-(d[i, j] - d[i, 0]) / eta)
                assert p[i, j] / p[i, 0] == pytest.approx(expected, rel=1e-10)

    def test_rejects_nonpositive_eta(self):
        d = np.array([[0.0, 1.0]])
        for eta in (0.0, -1.0):
            with pytest.raises(InvalidParam):
                partition_at(d, eta)

    def test_rejects_bad_distances(self):
        with pytest.raises(InvalidDistance):
            partition_at(np.array([0.0, 1.0]), 1.0)
        with pytest.raises(InvalidDistance):
            partition_at(np.array([[0.0, -1.0]]), 1.0)
        with pytest.raises(InvalidDistance):
            partition_at(np.array([[0.0, math.nan]]), 1.0)


class TestPartitionStats:
    def test_matches_partition_at(self):
        rng = np.random.default_rng(11)
        d = random_dist(rng, 8, 3)
        eta = 1.3
        p = partition_at(d, eta)
        phi, psi, v2 = partition_stats(d, eta)
        assert phi == pytest.approx(float((p * d).sum()), rel=1e-12)
        assert psi == pytest.approx(float(-(p * np.log(p)).sum()), rel=1e-10)
        dbar = (p * d).sum(axis=1, keepdims=True)
        assert v2 == pytest.approx(float((p * (d - dbar) ** 2).sum()), rel=1e-10)

    def test_derivative_identities_by_finite_differences(self):
        rng = np.random.default_rng(3)
        d = random_dist(rng, 10, 4)
        eta = float(d.mean())
        h = 1e-4 * eta
        phi_m, psi_m, _ = partition_stats(d, eta - h)
        phi_p, psi_p, _ = partition_stats(d, eta + h)
        _, _, v2 = partition_stats(d, eta)
        dphi = (phi_p - phi_m) / (2.0 * h)
        dpsi = (psi_p - psi_m) / (2.0 * h)
        assert dphi == pytest.approx(v2 / eta**2, rel=1e-5)
        assert dpsi == pytest.approx(v2 / eta**3, rel=1e-5)

    def test_entropy_monotone_in_eta(self):
        rng = np.random.default_rng(5)
        d = random_dist(rng, 7, 3)
        etas = np.geomspace(1e-2, 1e3, 40)
        psis = [partition_stats(d, e)[1] for e in etas]
        assert all(b > a for a, b in zip(psis, psis[1:]))

    def test_small_eta_limit_hard_assignment(self):
        rng = np.random.default_rng(9)
        d = random_dist(rng, 6, 3)
        gaps = np.sort(d, axis=1)
        eta = 1e-3 * float((gaps[:, 1] - gaps[:, 0]).min())
        p = partition_at(d, eta)
        hard = np.zeros_like(d)
        hard[np.arange(6), d.argmin(axis=1)] = 1.0
        assert np.allclose(p, hard, atol=1e-12)
        phi, psi, _ = partition_stats(d, eta)
        assert phi == pytest.approx(float(d.min(axis=1).sum()), rel=1e-10)
        assert psi == pytest.approx(0.0, abs=1e-10)

    def test_large_eta_limit_uniform(self):
        rng = np.random.default_rng(13)
        d = random_dist(rng, 6, 4)
        eta = 1e9 * float(d.max())
        p = partition_at(d, eta)
        assert np.allclose(p, 0.25, atol=1e-8)
        phi, psi, _ = partition_stats(d, eta)
        assert phi == pytest.approx(float(d.sum()) / 4.0, rel=1e-8)
        assert psi == pytest.approx(6 * math.log(4.0), rel=1e-8)


# ---------------------------------------------------------------------------
# solve_partition
# ---------------------------------------------------------------------------


class TestSolvePartition:
    def test_binary_row_oracle(self):
        p, eta = solve_partition(np.array([[0.0, 1.0]]), 0.5)
        assert p[0, 0] == pytest.approx(BINARY_P, abs=1e-8)
        assert p[0, 1] == pytest.approx(1.0 - BINARY_P, abs=1e-8)
        assert eta == pytest.approx(BINARY_ETA, abs=1e-6)

    def test_two_row_oracle(self):
        p, eta = solve_partition(ORACLE_D, ORACLE_E)
        assert np.allclose(p, ORACLE_PARTITION, atol=1e-8)
        assert float((p * ORACLE_D).sum()) == pytest.approx(ORACLE_OBJECTIVE, abs=1e-8)
        # both rows share the one multiplier: recover it from each row's ratio
        eta_row0 = (ORACLE_D[0, 1] - ORACLE_D[0, 0]) / math.log(p[0, 0] / p[0, 1])
        eta_row1 = (ORACLE_D[1, 0] - ORACLE_D[1, 1]) / math.log(p[1, 1] / p[1, 0])
        assert eta == pytest.approx(eta_row0, rel=1e-8)
        assert eta == pytest.approx(eta_row1, rel=1e-8)
        # entropy target is met in total
        logp = np.log(p)
        assert float(-(p * logp).sum()) == pytest.approx(2 * ORACLE_E, abs=2e-9)

    def test_zero_entropy_hard_with_low_index_ties(self):
        d = np.array([[0.5, 0.5, 1.0], [2.0, 1.0, 3.0]])
        p, eta = solve_partition(d, 0.0)
        assert eta == 0.0
        assert np.array_equal(p, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def test_full_entropy_uniform_with_infinite_eta(self):
        d = np.array([[1.0, 5.0], [2.0, 0.1]])
        p, eta = solve_partition(d, math.log(2.0))
        assert math.isinf(eta)
        assert np.allclose(p, 0.5)

    def test_single_cluster_column(self):
        p, eta = solve_partition(np.array([[1.0], [2.0]]), 0.0)
        assert np.array_equal(p, np.ones((2, 1)))
        assert eta == 0.0

    def test_entropy_target_met_across_levels(self):
        rng = np.random.default_rng(21)
        d = random_dist(rng, 20, 4)
        for frac in (0.05, 0.35, 0.75, 0.97):
            e = frac * math.log(4.0)
            p, eta = solve_partition(d, e)
            assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
            assert np.all(p >= 0.0)
            logp = np.log(p, out=np.zeros_like(p), where=(p > 0))
            avg_h = float(-(p * logp).sum()) / 20
            assert abs(avg_h - e) <= 1e-9
            assert 0.0 < eta < math.inf

    def test_grades_are_softmax_of_distances(self):
        rng = np.random.default_rng(22)
        d = random_dist(rng, 5, 3)
        p, eta = solve_partition(d, 0.3 * math.log(3.0))
        ref = partition_at(d, eta)
        assert np.allclose(p, ref, atol=1e-12)

    def test_warm_start_matches_cold_start(self):
        rng = np.random.default_rng(23)
        d = random_dist(rng, 9, 3)
        e = 0.5 * math.log(3.0)
        p_cold, eta_cold = solve_partition(d, e)
        for eta0 in (1e-3, 1.0, 1e4):
            p_warm, eta_warm = solve_partition(d, e, eta0=eta0)
            assert eta_warm == pytest.approx(eta_cold, rel=1e-6)
            assert np.allclose(p_warm, p_cold, atol=1e-7)

    def test_all_constant_rows_degenerate(self):
        d = np.full((4, 3), 2.5)
        with pytest.raises(DegenerateDistances):
            solve_partition(d, 0.2)

    def test_constant_row_entropy_floor(self):
        # two of three rows are constant, each forcing entropy log 2
        d = np.array([[1.0, 1.0], [3.0, 3.0], [0.0, 2.0]])
        with pytest.raises(DegenerateDistances):
            solve_partition(d, 0.3)  # total target 0.9 < 2 log 2
        p, eta = solve_partition(d, 0.55)  # total target 1.65 >= 2 log 2
        assert np.allclose(p[:2], 0.5)
        logp = np.log(p, out=np.zeros_like(p), where=(p > 0))
        assert float(-(p * logp).sum()) == pytest.approx(3 * 0.55, abs=3e-9)
        assert p[2, 0] > p[2, 1]

    def test_rejects_out_of_range_entropy(self):
        d = np.array([[0.0, 1.0]])
        for e in (-0.1, math.log(2.0) + 1e-6, math.nan):
            with pytest.raises(InvalidParam):
                solve_partition(d, e)

    def test_rejects_invalid_distances(self):
        with pytest.raises(InvalidDistance):
            solve_partition(np.array([[1.0, -2.0]]), 0.3)
        with pytest.raises(InvalidDistance):
            solve_partition(np.zeros((0, 2)), 0.3)
        with pytest.raises(InvalidDistance):
            solve_partition(np.array([[1.0, math.inf]]), 0.3)


# ---------------------------------------------------------------------------
# SampleCov / SoftClustConfig
# ---------------------------------------------------------------------------


class TestSampleCov:
    def test_weight_is_dof(self):
        assert scalar_cov(2.0, n=7).weight == 6.0

    def test_rejects_single_curve(self):
        with pytest.raises(TooFewCurves):
            scalar_cov(1.0, n=1)

    def test_derives_factor_when_missing(self):
        c = diag_cov([4.0, 1.0])
        assert c.factor is not None
        assert np.allclose(c.factor @ c.factor.T, c.matrix, atol=1e-12)

    def test_keeps_given_factor(self):
        f = np.array([[2.0], [0.0]])
        c = SampleCov(id="g", matrix=f @ f.T, n=3, factor=f)
        assert np.array_equal(c.factor, f)

    def test_rejects_mismatched_factor(self):
        with pytest.raises(DimMismatch):
            SampleCov(id="g", matrix=np.eye(2), n=3, factor=np.ones((3, 1)))

    def test_rejects_non_psd_matrix(self):
        with pytest.raises(NotPSD):
            SampleCov(id="g", matrix=np.diag([1.0, -0.5]), n=3)


class TestSoftClustConfig:
    def test_defaults(self):
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.2)
        assert cfg.nstart == 5 and cfg.nrefine == 5 and cfg.ntry is None
        assert cfg.max_bcd_iter == 100 and cfg.rng_seed == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_clusters": 0, "avg_entropy": 0.0},
            {"n_clusters": 2.0, "avg_entropy": 0.1},
            {"n_clusters": 2, "avg_entropy": -0.1},
            {"n_clusters": 2, "avg_entropy": math.log(2.0) + 1e-6},
            {"n_clusters": 1, "avg_entropy": 0.3},
            {"n_clusters": 2, "avg_entropy": 0.1, "nstart": 0},
            {"n_clusters": 2, "avg_entropy": 0.1, "nrefine": -1},
            {"n_clusters": 2, "avg_entropy": 0.1, "ntry": 0},
            {"n_clusters": 2, "avg_entropy": 0.1, "max_bcd_iter": 0},
            {"n_clusters": 2, "avg_entropy": 0.1, "bcd_tol": -1e-3},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(InvalidParam):
            SoftClustConfig(**kwargs)

    def test_entropy_may_equal_log_k(self):
        SoftClustConfig(n_clusters=4, avg_entropy=math.log(4.0))


# ---------------------------------------------------------------------------
# init_medoids
# ---------------------------------------------------------------------------


class TestInitMedoids:
    def test_k_equals_n_selects_everything(self):
        covs = [scalar_cov(v) for v in (1.0, 4.0, 9.0)]
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.2, rng_seed=0)
        idx = init_medoids(covs, cfg)
        assert sorted(idx.tolist()) == [0, 1, 2]

    def test_single_medoid_minimizes_weighted_distance(self):
        covs = [scalar_cov(v, n=n) for v, n in zip((1.0, 2.0, 3.0, 9.0, 10.0, 11.0), (5, 9, 5, 5, 9, 5))]
        cfg = SoftClustConfig(n_clusters=1, avg_entropy=0.0, nstart=1, nrefine=1, rng_seed=4)
        idx = init_medoids(covs, cfg)
        d2 = pairwise_dist2([c.matrix for c in covs])
        w = np.array([c.weight for c in covs])
        totals = (w[:, None] * d2).sum(axis=0)
        assert totals[idx[0]] == pytest.approx(float(totals.min()))

    def test_covers_well_separated_groups(self):
        hits = 0
        runs = 100
        for seed in range(runs):
            spec = SyntheticSpec(
                n_per_cluster=10,
                perturbations=(1, 2, 3),
                perturbation_scale=30.0,
                seed=seed,
            )
            samples, labels = simulate(spec)
            covs = [sample_cov(s) for s in samples]
            cfg = SoftClustConfig(
                n_clusters=3, avg_entropy=SUGGESTED_E_DEFAULT, rng_seed=seed + 1000
            )
            idx = init_medoids(covs, cfg)
            if len({labels[i] for i in idx}) == 3:
                hits += 1
        assert hits >= 95

    def test_deterministic_given_seed(self):
        covs = [scalar_cov(v) for v in (1.0, 2.0, 5.0, 9.0, 14.0)]
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.2, rng_seed=12)
        a = init_medoids(covs, cfg)
        b = init_medoids(covs, cfg)
        assert np.array_equal(a, b)

    def test_too_few_items(self):
        covs = [scalar_cov(1.0), scalar_cov(2.0)]
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.2)
        with pytest.raises(TooFewItems):
            init_medoids(covs, cfg)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def two_group_covs(seed=0, scale=2.0, n_per=8):
    spec = SyntheticSpec(
        n_per_cluster=n_per, perturbations=(1, 2), perturbation_scale=scale, seed=seed
    )
    samples, labels = simulate(spec)
    return [sample_cov(s) for s in samples], labels


class TestFit:
    def test_single_cluster_is_weighted_frechet_mean(self):
        covs = [diag_cov([1.0, 2.0], n=4, id_="a"), diag_cov([3.0, 1.0], n=6, id_="b"),
                diag_cov([2.0, 2.0], n=8, id_="c")]
        cfg = SoftClustConfig(n_clusters=1, avg_entropy=0.0, rng_seed=0)
        sol = fit(covs, cfg)
        assert np.array_equal(sol.partition, np.ones((3, 1)))
        assert sol.eta == 0.0
        assert sol.entropy == 0.0
        mats = [c.matrix for c in covs]
        w = np.array([c.weight for c in covs])
        ref = frechet_mean(mats, w, tol=1e-12).mean
        assert np.allclose(sol.barycenters[0], ref, atol=1e-5)

    def test_one_item_per_cluster_reaches_zero_objective(self):
        covs = [diag_cov([1.0, 1.0], n=5, id_="a"), diag_cov([4.0, 1.0], n=6, id_="b"),
                diag_cov([1.0, 9.0], n=7, id_="c")]
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.0, rng_seed=1)
        sol = fit(covs, cfg)
        assert sol.objective <= 1e-12
        assert sol.converged
        assert np.allclose(sol.partition.sum(axis=1), 1.0)
        assert np.all(np.sort(sol.partition, axis=1)[:, -1] == 1.0)
        assert np.all(sol.dist2[sol.partition == 1.0] <= 1e-12)

    def test_solution_invariants(self):
        covs, _ = two_group_covs(seed=3)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=SUGGESTED_E_DEFAULT, rng_seed=5)
        sol = fit(covs, cfg)
        n = len(covs)
        assert sol.partition.shape == (n, 2)
        assert np.all(sol.partition >= 0.0)
        assert np.allclose(sol.partition.sum(axis=1), 1.0, atol=1e-12)
        assert abs(sol.entropy - SUGGESTED_E_DEFAULT) <= 1e-6
        assert sol.dist2.shape == (n, 2)
        assert np.all(sol.dist2 >= 0.0)
        assert sol.objective == sol.objective_history[-1]
        assert sol.objective == pytest.approx(
            float((sol.partition * sol.dist2).sum()), rel=1e-9
        )
        assert len(sol.objective_history) == sol.iterations + 1
        assert sol.iterations >= 1
        assert sol.converged
        assert 0.0 < sol.eta < math.inf
        assert sol.ids == [c.id for c in covs]
        assert np.array_equal(sol.weights, np.array([c.weight for c in covs]))
        assert len(sol.barycenters) == 2
        for b in sol.barycenters:
            assert b.shape == covs[0].matrix.shape
            assert np.allclose(b, b.T, atol=1e-10)

    def test_objective_history_is_monotone(self):
        covs, _ = two_group_covs(seed=8)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=SUGGESTED_E_DEFAULT, rng_seed=2)
        sol = fit(covs, cfg)
        hist = sol.objective_history
        for a, b in zip(hist, hist[1:]):
            assert b <= a + cfg.bcd_tol * (1.0 + abs(a)) + 1e-12

    def test_deterministic_given_seed(self):
        covs, _ = two_group_covs(seed=4, n_per=5)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.3, rng_seed=17)
        a = fit(covs, cfg)
        b = fit(covs, cfg)
        assert np.array_equal(a.partition, b.partition)
        assert a.objective == b.objective
        for ba, bb in zip(a.barycenters, b.barycenters):
            assert np.array_equal(ba, bb)

    def test_separated_groups_recovered(self):
        covs, labels = two_group_covs(seed=6, scale=3.0)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=SUGGESTED_E_DEFAULT, rng_seed=3)
        sol = fit(covs, cfg)
        hard = sol.partition.argmax(axis=1)
        lab = np.asarray(labels)
        agree = max(
            (hard == lab).mean(),
            (hard == 1 - lab).mean(),
        )
        assert agree >= 0.9

    def test_too_few_items(self):
        covs = [scalar_cov(1.0), scalar_cov(2.0)]
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.2)
        with pytest.raises(TooFewItems):
            fit(covs, cfg)

    def test_dimension_mismatch(self):
        covs = [diag_cov([1.0, 2.0], id_="a"), scalar_cov(1.0)]
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.1)
        with pytest.raises(DimMismatch):
            fit(covs, cfg)

    def test_empty_input(self):
        cfg = SoftClustConfig(n_clusters=1, avg_entropy=0.0)
        with pytest.raises(TooFewItems):
            fit([], cfg)


# ---------------------------------------------------------------------------
# fit_reduced
# ---------------------------------------------------------------------------


class TestFitReduced:
    def test_full_subsample_matches_child_seeded_fit(self):
        covs, _ = two_group_covs(seed=1, n_per=4)
        n = len(covs)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.3, rng_seed=29)
        red = fit_reduced(covs, cfg, n_reduced=n)
        master = np.random.default_rng(cfg.rng_seed)
        sub = np.sort(master.choice(n, size=n, replace=False))
        assert np.array_equal(sub, np.arange(n))
        child = int(master.integers(0, 2**63))
        full = fit(covs, replace(cfg, rng_seed=child))
        for br, bf in zip(red.barycenters, full.barycenters):
            assert np.array_equal(br, bf)
        assert red.ids == full.ids
        assert red.objective == pytest.approx(full.objective, rel=1e-7)
        assert np.allclose(red.partition, full.partition, atol=1e-6)

    def test_repeats_follow_documented_seed_order(self):
        covs, _ = two_group_covs(seed=2, n_per=4)
        n = len(covs)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.3, rng_seed=31)
        red = fit_reduced(covs, cfg, n_reduced=5, repeats=2)
        master = np.random.default_rng(cfg.rng_seed)
        best_obj = math.inf
        for _ in range(2):
            sub = np.sort(master.choice(n, size=5, replace=False))
            child = int(master.integers(0, 2**63))
            sol = fit([covs[i] for i in sub], replace(cfg, rng_seed=child))
            d2 = pairwise_dist2([c.matrix for c in covs] + [b for b in sol.barycenters])
            dmat = np.array([c.weight for c in covs])[:, None] * d2[:n, n:]
            part, _ = solve_partition(dmat, cfg.avg_entropy)
            best_obj = min(best_obj, float((part * dmat).sum()))
        assert red.objective == pytest.approx(best_obj, rel=1e-6)

    def test_partition_covers_all_items(self):
        covs, _ = two_group_covs(seed=5, n_per=6)
        cfg = SoftClustConfig(n_clusters=2, avg_entropy=0.3, rng_seed=7)
        red = fit_reduced(covs, cfg, n_reduced=6)
        assert red.partition.shape == (len(covs), 2)
        assert np.allclose(red.partition.sum(axis=1), 1.0, atol=1e-12)
        assert red.ids == [c.id for c in covs]
        assert abs(red.entropy - 0.3) <= 1e-6

    def test_errors(self):
        covs, _ = two_group_covs(seed=5, n_per=4)
        cfg = SoftClustConfig(n_clusters=3, avg_entropy=0.3, rng_seed=7)
        with pytest.raises(TooFewItems):
            fit_reduced(covs, cfg, n_reduced=2)
        with pytest.raises(InvalidParam):
            fit_reduced(covs, cfg, n_reduced=len(covs) + 1)
        with pytest.raises(InvalidParam):
            fit_reduced(covs, cfg, n_reduced=4, repeats=0)
