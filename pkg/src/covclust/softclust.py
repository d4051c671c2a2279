"""Entropy-constrained soft clustering of covariance matrices.

Items are sample covariances with sample sizes; the objective is the
grade-weighted sum of (n_i - 1) times the squared Wasserstein-Procrustes
distance to the cluster barycenters, minimized over row-stochastic
partitions whose average row entropy equals a target E, and over the
barycenters themselves. The partition step has a closed softmax form with
a single positive multiplier eta found by root-finding on the entropy;
the barycenter step is a weighted Frechet mean per cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateDistances,
    DimMismatch,
    InvalidDistance,
    InvalidParam,
    TooFewCurves,
    TooFewItems,
)
from .linalg import check_cov, psd_factor, _as_symmetric
from .wasserstein import _dense_cross, _factor_cross, _pad_factors, frechet_mean, pairwise_dist2

# Root tolerance on the total entropy: |Psi(eta) - N*E| <= ENTROPY_FTOL * N.
ENTROPY_FTOL = 1e-9

# A cluster whose grade mass falls below this share of the total weight is
# considered empty and reseeded.
EMPTY_MASS_TOL = 1e-12


@dataclass(frozen=True)
class SampleCov:
    """A group's covariance estimate together with its sample size.

    factor optionally holds a thin X with matrix = X X^T; sample_cov
    supplies it for free from the centered curves. When absent, the matrix
    is validated and eigen-clipped and a factor is derived.
    """

    id: str
    matrix: np.ndarray
    n: int
    factor: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) < 2:
            raise TooFewCurves(f"group {self.id!r} has n = {self.n} < 2")
        if self.factor is None:
            mat = check_cov(self.matrix)
            object.__setattr__(self, "matrix", mat)
            object.__setattr__(self, "factor", psd_factor(mat))
        else:
            mat = _as_symmetric(self.matrix, f"covariance of group {self.id!r}")
            object.__setattr__(self, "matrix", mat)
            fac = np.asarray(self.factor, dtype=float)
            if fac.ndim != 2 or fac.shape[0] != mat.shape[0]:
                raise DimMismatch("factor rows must match the matrix dimension")
            object.__setattr__(self, "factor", fac)

    @property
    def weight(self) -> float:
        """Degrees of freedom n - 1 used to weight distances."""
        return float(self.n - 1)


@dataclass(frozen=True)
class SoftClustConfig:
    """Knobs for the block-coordinate soft clustering solve."""

    n_clusters: int
    avg_entropy: float
    nstart: int = 5
    nrefine: int = 5
    ntry: int | None = None
    max_bcd_iter: int = 100
    bcd_tol: float = 1e-6
    bary_max_iter: int = 100
    bary_tol: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        k = self.n_clusters
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise InvalidParam("n_clusters must be a positive integer")
        e = self.avg_entropy
        if not math.isfinite(e) or e < 0.0 or e > math.log(k) + 1e-12:
            raise InvalidParam(
                f"avg_entropy must lie in [0, log {k} = {math.log(k):.6f}], got {e!r}"
            )
        if self.nstart < 1 or self.nrefine < 0:
            raise InvalidParam("nstart must be >= 1 and nrefine >= 0")
        if self.ntry is not None and self.ntry < 1:
            raise InvalidParam("ntry must be >= 1 when given")
        if self.max_bcd_iter < 1 or self.bary_max_iter < 1:
            raise InvalidParam("iteration limits must be >= 1")
        if self.bcd_tol < 0 or self.bary_tol < 0:
            raise InvalidParam("tolerances must be >= 0")


@dataclass
class ClusterSolution:
    """Result of a soft clustering solve."""

    barycenters: list[np.ndarray]
    partition: np.ndarray
    eta: float
    objective: float
    entropy: float
    dist2: np.ndarray
    iterations: int
    converged: bool
    objective_history: list[float] = field(default_factory=list)
    ids: list[str] = field(default_factory=list)
    weights: np.ndarray | None = None


def suggested_entropy(alpha: float, beta: float) -> float:
    """Entropy target interpolating a two-level assignment profile.

    -(1 - alpha) * (beta log beta + (1 - beta) log(1 - beta)) + alpha log 2,
    with x log x = 0 at the endpoints. alpha blends toward the two-way
    uniform value log 2; beta is the stray-grade level of a mostly-hard
    row. Both must lie in [0, 1].
    """
    for name, v in (("alpha", alpha), ("beta", beta)):
        if not math.isfinite(v) or v < 0.0 or v > 1.0:
            raise InvalidParam(f"{name} must lie in [0, 1], got {v!r}")
    h = 0.0
    for p in (beta, 1.0 - beta):
        if p > 0.0:
            h += p * math.log(p)
    return -(1.0 - alpha) * h + alpha * math.log(2.0)


def _check_dist(dist2) -> np.ndarray:
    d = np.asarray(dist2, dtype=float)
    if d.ndim != 2 or d.size == 0:
        raise InvalidDistance(f"distance matrix must be 2-D and nonempty, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise InvalidDistance("distance matrix has non-finite entries")
    if np.any(d < 0.0):
        raise InvalidDistance("distance matrix has negative entries")
    return d


def _softmax(d: np.ndarray, eta: float) -> np.ndarray:
    s = (d - d.min(axis=1, keepdims=True)) / eta
    w = np.exp(-s)
    return w / w.sum(axis=1, keepdims=True)


def _psi_value(d: np.ndarray, eta: float) -> float:
    """Total partition entropy Psi(eta) = -sum_ij pi_ij log pi_ij."""
    s = (d - d.min(axis=1, keepdims=True)) / eta
    w = np.exp(-s)
    z = w.sum(axis=1)
    p = w / z[:, None]
    # where w underflowed to 0 the grade is exactly 0 and contributes nothing
    s_safe = np.where(np.isfinite(s), s, 0.0)
    return float(np.log(z).sum() + (p * s_safe).sum())


def partition_at(dist2, eta: float) -> np.ndarray:
    """Softmax partition exp(-d/eta) row-normalized, for a fixed eta > 0.

    eta = inf yields uniform rows. The hard limit eta -> 0 is handled by
    solve_partition, not here.
    """
    d = _check_dist(dist2)
    if not eta > 0.0:
        raise InvalidParam("eta must be positive")
    return _softmax(d, eta)


def partition_stats(dist2, eta: float) -> tuple[float, float, float]:
    """(Phi, Psi, V^2) at a fixed eta: the grade-weighted objective, the
    total entropy, and the grade-weighted variance of each row's distances
    around its grade-weighted mean. dPhi/deta = V^2/eta^2 and
    dPsi/deta = V^2/eta^3.
    """
    d = _check_dist(dist2)
    if not eta > 0.0:
        raise InvalidParam("eta must be positive")
    p = _softmax(d, eta)
    phi = float((p * d).sum())
    logp = np.log(p, out=np.zeros_like(p), where=(p > 0))
    psi = float(-(p * logp).sum())
    dbar = (p * d).sum(axis=1)
    v2 = float((p * (d - dbar[:, None]) ** 2).sum())
    return phi, psi, v2


def _solve_eta(d: np.ndarray, target: float, n: int, eta0: float | None) -> float:
    """Root of Psi(eta) = target by bracketing plus safeguarded regula falsi."""
    tol_f = ENTROPY_FTOL * n
    eta = d.mean()
    if eta0 is not None and math.isfinite(eta0) and eta0 > 0.0:
        eta = float(eta0)
    g0 = _psi_value(d, eta) - target
    if abs(g0) <= tol_f:
        return float(eta)

    if g0 < 0.0:
        lo, glo = eta, g0
        hi = eta
        for _ in range(4400):
            hi *= 2.0
            ghi = _psi_value(d, hi) - target
            if ghi >= 0.0:
                break
            lo, glo = hi, ghi
        else:
            # only reachable when the target sits within roundoff of N log K
            return math.inf
    else:
        hi, ghi = eta, g0
        lo = eta
        for _ in range(4400):
            lo *= 0.5
            glo = _psi_value(d, lo) - target
            if glo <= 0.0:
                break
            if lo < 1e-300:
                if abs(glo) <= tol_f:
                    return float(lo)
                raise DegenerateDistances(
                    "entropy target is below the floor set by constant distance rows"
                )
            hi, ghi = lo, glo
        else:
            raise DegenerateDistances("entropy target unattainable")

    side = 0
    for _ in range(200):
        denom = ghi - glo
        x = (lo * ghi - hi * glo) / denom if denom > 0.0 else 0.5 * (lo + hi)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        gx = _psi_value(d, x) - target
        if abs(gx) <= tol_f:
            return float(x)
        if gx < 0.0:
            lo, glo = x, gx
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = x, gx
            if side == 1:
                glo *= 0.5
            side = 1
        if hi - lo <= np.finfo(float).eps * hi:
            break
    return float(lo if abs(glo) <= abs(ghi) else hi)


def solve_partition(dist2, avg_entropy: float, *, eta0: float | None = None):
    """Entropy-targeted row-stochastic partition of a distance matrix.

    Rows of the result are proportional to exp(-d_ij / eta) with eta > 0
    chosen so the total row entropy matches N * avg_entropy to within
    1e-9 * N. avg_entropy = 0 returns hard argmin indicators (ties to the
    lowest column) with eta = 0; avg_entropy = log K returns uniform rows
    with eta = inf. Raises DegenerateDistances when the target cannot be
    reached, which covers the all-rows-constant case and, more generally,
    targets below the entropy floor contributed by constant rows.

    Returns (partition, eta). eta0 optionally warm-starts the root search.
    """
    d = _check_dist(dist2)
    n, k = d.shape
    e = float(avg_entropy)
    log_k = math.log(k)
    if not math.isfinite(e) or e < 0.0 or e > log_k + 1e-12:
        raise InvalidParam(f"avg_entropy must lie in [0, log {k}], got {e!r}")
    if k == 1:
        return np.ones((n, 1)), 0.0
    if e <= 0.0:
        p = np.zeros_like(d)
        p[np.arange(n), np.argmin(d, axis=1)] = 1.0
        return p, 0.0
    if e >= log_k - 1e-12:
        return np.full_like(d, 1.0 / k), math.inf

    spread = d.max(axis=1) - d.min(axis=1)
    n_flat = int((spread == 0.0).sum())
    if n_flat == n:
        raise DegenerateDistances("every row of the distance matrix is constant")
    target = n * e
    if target < n_flat * log_k - ENTROPY_FTOL * n:
        raise DegenerateDistances(
            f"{n_flat} constant rows force a total entropy of at least "
            f"{n_flat * log_k:.6g}, above the target {target:.6g}"
        )
    eta = _solve_eta(d, target, n, eta0)
    if math.isinf(eta):
        return np.full_like(d, 1.0 / k), math.inf
    return _softmax(d, eta), float(eta)


def _avg_row_entropy(p: np.ndarray) -> float:
    logp = np.log(p, out=np.zeros_like(p), where=(p > 0))
    return float(-(p * logp).sum() / p.shape[0])


@dataclass
class _Data:
    mats: list
    factors: list | None
    x: np.ndarray | None
    stack: np.ndarray | None
    traces: np.ndarray
    weights: np.ndarray
    ids: list
    n: int
    m: int


def _prepare(covs) -> _Data:
    if len(covs) == 0:
        raise TooFewItems("no items given")
    m = covs[0].matrix.shape[0]
    for c in covs:
        if c.matrix.shape != (m, m):
            raise DimMismatch("items must share one grid dimension")
    mats = [c.matrix for c in covs]
    factors = [c.factor for c in covs]
    if not all(f is not None for f in factors):
        factors = None
    x = None
    stack = None
    if factors is not None:
        x = _pad_factors(factors)
        if 2 * x.shape[2] > m:
            x = None
    if x is None:
        stack = np.stack(mats)
    return _Data(
        mats=mats,
        factors=factors,
        x=x,
        stack=stack,
        traces=np.array([float(np.trace(a)) for a in mats]),
        weights=np.array([c.weight for c in covs]),
        ids=[c.id for c in covs],
        n=len(covs),
        m=m,
    )


def _weighted_dist2(data: _Data, barycenters) -> np.ndarray:
    """(N, K) matrix of (n_i - 1) * squared distance to each barycenter."""
    cols = []
    for b in barycenters:
        if data.x is not None:
            cross = _factor_cross(data.x, b)
        else:
            cross = _dense_cross(data.stack, b)
        cols.append(np.maximum(data.traces + float(np.trace(b)) - 2.0 * cross, 0.0))
    return data.weights[:, None] * np.stack(cols, axis=1)


def init_medoids(covs, config: SoftClustConfig, avg_entropy: float | None = None,
                 *, rng=None, pairwise: np.ndarray | None = None) -> np.ndarray:
    """Stochastic medoid search: distance-weighted seeding plus swap sweeps.

    Each of nstart seedings draws the first index uniformly, then each
    further index with probability proportional to the squared distance to
    the nearest already-chosen medoid. nrefine sweeps then propose, per
    cluster slot, ntry candidates drawn without replacement (probability
    proportional to the squared distance to the nearest other medoid) and
    keep a swap only when it lowers the restricted objective, i.e. the
    entropy-constrained partition objective against the medoid columns.
    The best seeding wins. Draw order per seeding: first index, then one
    draw per remaining slot, then one candidate draw per (sweep, slot).

    All pairwise squared distances are computed once (or taken from
    pairwise) and cached. Returns the K chosen item indices.
    """
    data = _prepare(covs)
    k = config.n_clusters
    if data.n < k:
        raise TooFewItems(f"{data.n} items cannot seed {k} clusters")
    e = config.avg_entropy if avg_entropy is None else float(avg_entropy)
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    d2 = pairwise if pairwise is not None else pairwise_dist2(data.mats, data.factors)
    w = data.weights
    ntry = config.ntry if config.ntry is not None else math.ceil(data.n / k)

    def restricted(idx, eta_hint):
        dmat = w[:, None] * d2[:, idx]
        part, eta = solve_partition(dmat, e, eta0=eta_hint)
        return float((part * dmat).sum()), eta

    best_idx = None
    best_g = math.inf
    for _ in range(config.nstart):
        idx = [int(rng.integers(data.n))]
        for _slot in range(1, k):
            mind = d2[:, idx].min(axis=1)
            tot = float(mind.sum())
            if tot > 0.0:
                pick = int(rng.choice(data.n, p=mind / tot))
            else:
                remaining = np.setdiff1d(np.arange(data.n), idx)
                pick = int(rng.choice(remaining))
            idx.append(pick)
        g, eta = restricted(idx, None)
        for _sweep in range(config.nrefine):
            for j in range(k):
                others = idx[:j] + idx[j + 1 :]
                if others:
                    raw = d2[:, others].min(axis=1)
                else:
                    raw = np.ones(data.n)
                npos = int((raw > 0.0).sum())
                if npos == 0:
                    size = min(ntry, data.n)
                    cands = rng.choice(data.n, size=size, replace=False)
                else:
                    size = min(ntry, npos)
                    cands = rng.choice(data.n, size=size, replace=False, p=raw / raw.sum())
                for c in cands:
                    c = int(c)
                    if c == idx[j]:
                        continue
                    trial = list(idx)
                    trial[j] = c
                    g_c, eta_c = restricted(trial, eta)
                    if g_c < g:
                        idx, g, eta = trial, g_c, eta_c
        if g < best_g:
            best_g, best_idx = g, list(idx)
    return np.array(best_idx, dtype=int)


def fit(covs, config: SoftClustConfig) -> ClusterSolution:
    """Block-coordinate soft clustering of covariance matrices.

    Starting from medoid matrices, alternates the entropy-targeted
    partition solve with per-cluster Frechet barycenter updates weighted
    by (n_i - 1) * grade, warm-starting each barycenter from its previous
    value. Stops when the objective changes by at most
    bcd_tol * (1 + previous) between cycles or after max_bcd_iter cycles.
    A cluster whose grade mass collapses below 1e-12 of the total weight
    is reseeded to the item farthest from its nearest barycenter.
    """
    data = _prepare(covs)
    k = config.n_clusters
    if data.n < k:
        raise TooFewItems(f"{data.n} items cannot fill {k} clusters")
    rng = np.random.default_rng(config.rng_seed)
    d2 = pairwise_dist2(data.mats, data.factors)
    idx = init_medoids(covs, config, rng=rng, pairwise=d2)
    barys = [np.array(covs[i].matrix, dtype=float, copy=True) for i in idx]

    total_w = float(data.weights.sum())
    history: list[float] = []
    prev = None
    eta_warm = None
    converged = False
    updates = 0
    part = eta = dmat = None
    for _ in range(config.max_bcd_iter):
        dmat = _weighted_dist2(data, barys)
        part, eta = solve_partition(dmat, config.avg_entropy, eta0=eta_warm)
        if math.isfinite(eta) and eta > 0.0:
            eta_warm = eta
        obj = float((part * dmat).sum())
        history.append(obj)
        if prev is not None and abs(prev - obj) <= config.bcd_tol * (1.0 + abs(prev)):
            converged = True
            break
        prev = obj
        mass = (part * data.weights[:, None]).sum(axis=0)
        repair_rank = None
        for j in range(k):
            if mass[j] < EMPTY_MASS_TOL * total_w:
                if repair_rank is None:
                    order = np.argsort(-(dmat / data.weights[:, None]).min(axis=1))
                    repair_rank = 0
                barys[j] = np.array(covs[int(order[repair_rank])].matrix, dtype=float, copy=True)
                repair_rank = min(repair_rank + 1, data.n - 1)
            else:
                res = frechet_mean(
                    data.mats,
                    data.weights * part[:, j],
                    init=barys[j],
                    max_iter=config.bary_max_iter,
                    tol=config.bary_tol,
                    factors=data.x,
                )
                barys[j] = res.mean
        updates += 1
    else:
        dmat = _weighted_dist2(data, barys)
        part, eta = solve_partition(dmat, config.avg_entropy, eta0=eta_warm)
        history.append(float((part * dmat).sum()))

    return ClusterSolution(
        barycenters=barys,
        partition=part,
        eta=eta,
        objective=history[-1],
        entropy=_avg_row_entropy(part),
        dist2=dmat,
        iterations=updates,
        converged=converged,
        objective_history=history,
        ids=list(data.ids),
        weights=data.weights.copy(),
    )


def fit_reduced(covs, config: SoftClustConfig, n_reduced: int, repeats: int = 1) -> ClusterSolution:
    """Fit on uniform subsamples and extend to the full data.

    Each repeat draws n_reduced items without replacement, fits them with
    a child seed, then solves the full-data partition against the fitted
    barycenters; the repeat with the lowest full-data objective wins. The
    master generator (config.rng_seed) is consumed in a fixed order: one
    subsample draw then one child-seed draw per repeat. objective and
    partition refer to the full data; objective_history to the winning
    reduced-stage fit.
    """
    data = _prepare(covs)
    if repeats < 1:
        raise InvalidParam("repeats must be >= 1")
    if n_reduced < config.n_clusters:
        raise TooFewItems(f"n_reduced = {n_reduced} below n_clusters = {config.n_clusters}")
    if n_reduced > data.n:
        raise InvalidParam(f"n_reduced = {n_reduced} exceeds the item count {data.n}")
    rng = np.random.default_rng(config.rng_seed)
    best = None
    for _ in range(repeats):
        sub = np.sort(rng.choice(data.n, size=n_reduced, replace=False))
        child = int(rng.integers(0, 2**63))
        sol = fit([covs[i] for i in sub], replace(config, rng_seed=child))
        dmat = _weighted_dist2(data, sol.barycenters)
        part, eta = solve_partition(dmat, config.avg_entropy)
        obj = float((part * dmat).sum())
        if best is None or obj < best.objective:
            best = ClusterSolution(
                barycenters=sol.barycenters,
                partition=part,
                eta=eta,
                objective=obj,
                entropy=_avg_row_entropy(part),
                dist2=dmat,
                iterations=sol.iterations,
                converged=sol.converged,
                objective_history=list(sol.objective_history),
                ids=list(data.ids),
                weights=data.weights.copy(),
            )
    return best
