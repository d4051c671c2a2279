"""Cluster-quality diagnostics for soft covariance clusterings.

Provides fast silhouette widths, membership credibilities, the trimmed
average silhouette width (TASW), a TASW scan over cluster counts for
picking K, a permutation test against the no-cluster null, and classical
MDS coordinates for plotting.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParam, NeedsTwoClusters, RequiresRawCurves
from .softclust import ClusterSolution, SoftClustConfig, fit
from .wasserstein import pairwise_dist2

DEFAULT_DELTA = 0.05
DEFAULT_N_PERM = 200

_SEED_HIGH = 2**63 - 1


def credibilities(solution: ClusterSolution) -> np.ndarray:
    """Per-item credibility of the assignment: largest membership weight."""
    return solution.partition.max(axis=1)


def silhouette_widths(covs, solution: ClusterSolution) -> np.ndarray:
    """Fast silhouette per item: 1 minus the ratio of the distances to the
    nearest and second-nearest barycenters.

    Distances are unsquared and unweighted, recovered from the cached
    weighted squared distances of the solution. Ties pick the lowest
    barycenter index; an item whose second-nearest distance is zero gets
    silhouette 0.
    """
    part = solution.partition
    n, k = part.shape
    if k < 2:
        raise NeedsTwoClusters("silhouettes need at least 2 clusters")
    if covs is not None and len(covs) != n:
        raise InvalidParam(f"got {len(covs)} items for a {n}-item solution")
    d = np.sqrt(np.maximum(solution.dist2, 0.0) / solution.weights[:, None])
    order = np.argsort(d, axis=1, kind="stable")
    rows = np.arange(n)
    da = d[rows, order[:, 0]]
    db = d[rows, order[:, 1]]
    return np.where(db > 0.0, 1.0 - np.divide(da, np.where(db > 0.0, db, 1.0)), 0.0)


def tasw(covs, solution: ClusterSolution) -> float:
    """Trimmed average silhouette width.

    Weighted mean of the silhouettes over the credible core: items whose
    credibility reaches the average credibility. Weights are the items'
    degrees of freedom, so scaling all group sizes together changes
    nothing.
    """
    sw = silhouette_widths(covs, solution)
    c = credibilities(solution)
    good = c >= c.mean()
    w = solution.weights[good]
    return float(np.sum(w * sw[good]) / np.sum(w))


@dataclass(frozen=True)
class TaswProfile:
    """TASW scan across candidate cluster counts.

    k_values holds the scanned counts; tasw_values, silhouettes,
    credibilities, and good_masks line up with it. k_hat is the count with
    the highest TASW (first one on ties) and candidate_set collects every
    count within relative slack delta of the maximum.
    """

    k_values: tuple[int, ...]
    tasw_values: np.ndarray
    silhouettes: np.ndarray
    credibilities: np.ndarray
    good_masks: np.ndarray
    k_hat: int
    candidate_set: tuple[int, ...]
    delta: float
    solutions: tuple[ClusterSolution, ...]

    @property
    def tasw_max(self) -> float:
        return float(self.tasw_values.max())


def _normalize_k_values(k_values, n: int) -> tuple[int, ...]:
    if np.isscalar(k_values):
        ks = tuple(range(2, int(k_values) + 1))
    else:
        ks = tuple(int(k) for k in k_values)
    if not ks:
        raise InvalidParam("no cluster counts to scan")
    if any(k < 2 for k in ks):
        raise InvalidParam("cluster counts must be >= 2")
    if len(set(ks)) != len(ks) or list(ks) != sorted(ks):
        raise InvalidParam("cluster counts must be strictly increasing")
    if ks[-1] > n:
        raise InvalidParam(f"largest cluster count {ks[-1]} exceeds the {n} items")
    return ks


def tasw_scan(covs, config: SoftClustConfig, k_values, delta: float = DEFAULT_DELTA,
              threads: int | None = None) -> TaswProfile:
    """Fit every candidate cluster count and profile TASW over them.

    k_values is either the largest count (scanning 2..k_values) or an
    increasing sequence of counts. Every fit shares the target average
    entropy from config; each count gets an independently seeded
    initialization. The candidate set keeps counts within relative slack
    delta of the best TASW; a profile that never gets above zero keeps
    them all.
    """
    n = len(covs)
    ks = _normalize_k_values(k_values, n)
    if not 0.0 <= delta:
        raise InvalidParam("delta must be >= 0")
    seeds = np.random.default_rng(config.rng_seed).integers(0, _SEED_HIGH, size=len(ks))

    def fit_one(i: int) -> ClusterSolution:
        return fit(covs, replace(config, n_clusters=ks[i], rng_seed=int(seeds[i])))

    if threads is not None and threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = list(pool.map(fit_one, range(len(ks))))
    else:
        solutions = [fit_one(i) for i in range(len(ks))]

    sw = np.stack([silhouette_widths(covs, s) for s in solutions])
    cred = np.stack([credibilities(s) for s in solutions])
    good = cred >= cred.mean(axis=1, keepdims=True)
    w = solutions[0].weights
    scores = np.array([
        float(np.sum(w[g] * s[g]) / np.sum(w[g])) for s, g in zip(sw, good)
    ])
    best = int(np.argmax(scores))
    top = scores[best]
    if top > 0.0:
        cand = tuple(k for k, t in zip(ks, scores) if (top - t) / top <= delta)
    else:
        cand = ks
    return TaswProfile(
        k_values=ks,
        tasw_values=scores,
        silhouettes=sw,
        credibilities=cred,
        good_masks=good,
        k_hat=ks[best],
        candidate_set=cand,
        delta=float(delta),
        solutions=tuple(solutions),
    )


@dataclass(frozen=True)
class PermTestResult:
    """Permutation test of the no-cluster null hypothesis."""

    observed_tasw_max: float
    null_samples: np.ndarray
    p_value: float
    n_perm: int
    k_values: tuple[int, ...]


def _pooled_centered(samples) -> tuple[np.ndarray, np.ndarray]:
    pool = np.concatenate([s.curves - s.curves.mean(axis=0) for s in samples])
    sizes = np.array([s.n for s in samples])
    return pool, sizes


def _covs_from_rows(samples, rows: np.ndarray, sizes: np.ndarray, recenter: bool):
    from .softclust import SampleCov

    out = []
    stop = np.cumsum(sizes)
    start = stop - sizes
    for s, i0, i1 in zip(samples, start, stop):
        y = rows[i0:i1]
        if recenter:
            y = y - y.mean(axis=0)
        factor = y.T / math.sqrt(y.shape[0] - 1)
        out.append(SampleCov(id=s.group_id, matrix=factor @ factor.T, n=y.shape[0], factor=factor))
    return out


def permutation_test(samples, config: SoftClustConfig, k_values, n_perm: int = DEFAULT_N_PERM,
                     seed: int | None = None, recenter: bool = True,
                     threads: int | None = None) -> PermTestResult:
    """Permutation test for the presence of any covariance clustering.

    The observed statistic is the maximum TASW over the scanned cluster
    counts. Null draws pool the within-group-centered curves, shuffle
    them, split back into the original group sizes, re-estimate the
    covariances (re-centering each shuffled group by default; recenter
    False keeps the pooled centering only), and rerun the scan. The
    p-value counts the observed draw among the null ones, so it is never
    zero. Each replicate owns RNG streams derived from the seed and its
    index, making results independent of execution order; replicates may
    run on a thread pool.
    """
    if not samples:
        raise RequiresRawCurves("the permutation test needs the raw curves")
    for s in samples:
        if not hasattr(s, "curves"):
            raise RequiresRawCurves("the permutation test needs the raw curves")
    if n_perm < 1:
        raise InvalidParam("n_perm must be >= 1")
    ks = _normalize_k_values(k_values, len(samples))

    from .dataio import sample_cov

    observed_covs = [sample_cov(s) for s in samples]
    observed = tasw_scan(observed_covs, config, ks).tasw_max

    pool_rows, sizes = _pooled_centered(samples)
    master = np.random.default_rng(config.rng_seed if seed is None else seed)
    child = master.integers(0, _SEED_HIGH, size=(n_perm, 2))

    def one_replicate(b: int) -> float:
        rng = np.random.default_rng(int(child[b, 0]))
        rows = pool_rows[rng.permutation(pool_rows.shape[0])]
        covs = _covs_from_rows(samples, rows, sizes, recenter)
        cfg = replace(config, rng_seed=int(child[b, 1]))
        return tasw_scan(covs, cfg, ks).tasw_max

    if threads is not None and threads > 1 and n_perm > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            null = np.array(list(pool.map(one_replicate, range(n_perm))))
    else:
        null = np.array([one_replicate(b) for b in range(n_perm)])

    p = (1.0 + int(np.sum(null >= observed))) / (1.0 + n_perm)
    return PermTestResult(
        observed_tasw_max=float(observed),
        null_samples=null,
        p_value=float(p),
        n_perm=int(n_perm),
        k_values=ks,
    )


def mds_coords(matrices, dim_out: int) -> np.ndarray:
    """Classical MDS coordinates from pairwise transport distances.

    Double-centers the squared-distance matrix and keeps the top dim_out
    eigendirections scaled by root eigenvalues; directions with
    nonpositive eigenvalues come out as zero columns. Each kept direction
    has its sign fixed so the largest-magnitude coordinate is positive.
    """
    n = len(matrices)
    if n < 2:
        raise InvalidParam("need at least 2 matrices")
    if not 1 <= dim_out <= n - 1:
        raise InvalidParam(f"dim_out must lie in 1..{n - 1}")
    d2 = pairwise_dist2(matrices)
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    w, v = np.linalg.eigh(0.5 * (b + b.T))
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    coords = np.zeros((n, dim_out))
    cutoff = max(w[0], 0.0) * 1e-12
    for k in range(dim_out):
        if w[k] <= cutoff:
            break
        col = v[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        coords[:, k] = col * math.sqrt(w[k])
    return coords
