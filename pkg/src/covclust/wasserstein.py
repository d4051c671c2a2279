"""Wasserstein-Procrustes distance and Frechet barycenters for PSD matrices.

The squared distance between covariances A and B is
tr A + tr B - 2 tr sqrt(A^{1/2} B A^{1/2}), clamped at zero against
roundoff. Barycenters are computed by the transport fixed-point iteration:
average the optimal maps T_i from the current iterate to each member and
congruence-transform the iterate by the average map.

Two computational routes coexist. The canonical one forms dense symmetric
congruences. When members carry thin factors Sigma = X X^T (sample
covariances of n curves have exact rank <= n - 1), cross terms reduce to
r x r eigenproblems: tr sqrt(Sigma^{1/2} B Sigma^{1/2}) = sum sqrt
eig(X^T B X), and the transport of a positive definite base onto X X^T is
X (X^T base X)^{-1/2} X^T. Both routes agree within roundoff and are
cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, EmptySet, InvalidParam
from .linalg import RANK_TOL, clipped_sqrt_eigvals, inv_sqrt_psd, sqrt_psd, sym, _as_symmetric

# Ridge policy for near-singular barycenter iterates: when the condition
# number of the base exceeds COND_MAX, add RIDGE_EPS * trace / M to every
# eigenvalue before inverting, which also lets the iteration regrow
# directions lost to rank deficiency.
RIDGE_EPS = 1e-10
COND_MAX = 1e12

# Row blocks for the pairwise computation are sized to stay under this
# many bytes of scratch.
_BLOCK_BYTES = 128 * 1024 * 1024


def wp_dist2(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Wasserstein-Procrustes distance between two PSD matrices."""
    a = _as_symmetric(a, "A")
    b = _as_symmetric(b, "B")
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    r = sqrt_psd(a)
    cross = clipped_sqrt_eigvals(r @ b @ r)
    return max(0.0, float(np.trace(a) + np.trace(b)) - 2.0 * float(cross))


def transport_map(base: np.ndarray, target: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Optimal transport map T with T base T = target on range(base).

    T = base^{-1/2} (base^{1/2} target base^{1/2})^{1/2} base^{-1/2},
    with the pseudo-inverse convention for rank-deficient bases.
    """
    base = _as_symmetric(base, "base")
    target = _as_symmetric(target, "target")
    if base.shape != target.shape:
        raise DimMismatch(f"shapes {base.shape} and {target.shape} differ")
    r = sqrt_psd(base)
    ri = inv_sqrt_psd(base, rel_tol)
    inner = sym(r @ target @ r)
    w, u = np.linalg.eigh(inner)
    s = (u * np.sqrt(np.maximum(w, 0.0))) @ u.T
    return sym(ri @ s @ ri)


@dataclass
class BarycenterResult:
    """Fixed-point barycenter solve outcome."""

    mean: np.ndarray
    iterations: int
    frechet_value: float
    converged: bool
    history: list[float] = field(default_factory=list)


def _pad_factors(factors: list[np.ndarray]) -> np.ndarray:
    """Stack thin factors into (N, M, rmax), zero-padding narrow ones."""
    m = factors[0].shape[0]
    rmax = max(f.shape[1] for f in factors)
    rmax = max(rmax, 1)
    out = np.zeros((len(factors), m, rmax))
    for i, f in enumerate(factors):
        out[i, :, : f.shape[1]] = f
    return out


def _factor_cross(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-item tr sqrt(X_i^T B X_i) for stacked factors x (N, M, r)."""
    n, m, r = x.shape
    flat = x.transpose(1, 0, 2).reshape(m, n * r)
    bx = (b @ flat).reshape(m, n, r).transpose(1, 0, 2)
    g = np.swapaxes(x, 1, 2) @ bx
    return clipped_sqrt_eigvals(g)


def _dense_cross(stack: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-item tr sqrt(B^{1/2} S_i B^{1/2}) for a dense stack (N, M, M)."""
    r = sqrt_psd(b)
    return clipped_sqrt_eigvals(r @ stack @ r)


def _ridged_eigvals(wc: np.ndarray, m: int) -> np.ndarray:
    """Apply the conditional ridge to clipped ascending eigenvalues."""
    wmax = wc[-1]
    wmin = wc[0]
    if wmin <= 0.0 or wmax / wmin > COND_MAX:
        return wc + RIDGE_EPS * wc.sum() / m
    return wc


def _mean_transport(current, stack, x, wts, wts_norm, traces):
    """Average transport map onto the members and the Frechet value.

    Returns (tbar, value, bfac) where value = sum_i wts_i *
    wp_dist2(member_i, current) and bfac is a symmetric square root of the
    current iterate, so the caller can form the next iterate as a Gram
    product that stays positive semidefinite by construction. The base is
    ridged when ill-conditioned; with a positive definite (possibly
    ridged) base the factor route is exact.
    """
    m = current.shape[0]
    w, v = np.linalg.eigh(current)
    wc = np.maximum(w, 0.0)
    tr_base = float(wc.sum())
    bfac = v * np.sqrt(wc)
    if wc[-1] <= 0.0:
        # zero base: no transport is defined; report the value and identity
        value = float(np.dot(wts, np.maximum(traces, 0.0)))
        return np.eye(m), value, bfac
    wr = _ridged_eigvals(wc, m)
    if x is not None:
        base_r = (v * wr) @ v.T
        n, _, r = x.shape
        flat = x.transpose(1, 0, 2).reshape(m, n * r)
        bx = (base_r @ flat).reshape(m, n, r).transpose(1, 0, 2)
        g = np.swapaxes(x, 1, 2) @ bx
        lam, u = np.linalg.eigh(sym(g))
        lamc = np.maximum(lam, 0.0)
        cross = np.sqrt(lamc).sum(axis=1)
        cut = RANK_TOL * lamc[:, -1:]
        inv = np.where(lamc > cut, lamc, np.inf) ** -0.5
        gis = (u * inv[:, None, :]) @ np.swapaxes(u, 1, 2)
        y = (x @ gis) * wts_norm[:, None, None]
        tbar = y.transpose(1, 0, 2).reshape(m, n * r) @ flat.T
    else:
        rt = (v * np.sqrt(wr)) @ v.T
        ri = (v / np.sqrt(wr)) @ v.T
        inner = sym(rt @ stack @ rt)
        lam, u = np.linalg.eigh(inner)
        lamc = np.maximum(lam, 0.0)
        cross = np.sqrt(lamc).sum(axis=1)
        s = (u * np.sqrt(lamc)[:, None, :]) @ np.swapaxes(u, 1, 2)
        t = ri @ s @ ri
        tbar = np.einsum("n,nml->ml", wts_norm, t)
    d2 = np.maximum(traces + tr_base - 2.0 * cross, 0.0)
    return sym(tbar), float(np.dot(wts, d2)), bfac


def frechet_mean(
    matrices,
    weights,
    init: np.ndarray | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
    factors=None,
) -> BarycenterResult:
    """Weighted Frechet barycenter under the Wasserstein-Procrustes metric.

    Zero-weight members are skipped entirely. The iteration starts from the
    weight-normalized arithmetic mean unless init is given, and stops when
    consecutive Frechet values differ by at most tol * (1 + previous).
    factors optionally carries thin X_i with Sigma_i = X_i X_i^T, enabling
    the reduced-rank route when every member has one.
    """
    mats = [np.asarray(a, dtype=float) for a in matrices]
    wts = np.asarray(weights, dtype=float)
    if wts.ndim != 1 or len(mats) != wts.size:
        raise InvalidParam("weights must be a vector matching the member count")
    if not np.all(np.isfinite(wts)) or np.any(wts < 0):
        raise InvalidParam("weights must be finite and nonnegative")
    if len(mats) == 0 or float(wts.sum()) <= 0.0:
        raise EmptySet("no members with positive weight")
    if max_iter < 1 or tol < 0:
        raise InvalidParam("max_iter must be >= 1 and tol >= 0")
    m = mats[0].shape[0]
    for a in mats:
        if a.shape != (m, m):
            raise DimMismatch("members must share one dimension")

    keep = np.flatnonzero(wts > 0)
    active = [mats[i] for i in keep]
    w_act = wts[keep]
    w_norm = w_act / w_act.sum()
    traces = np.array([float(np.trace(a)) for a in active])

    x = None
    stack = None
    if factors is not None:
        if len(factors) != len(mats):
            raise InvalidParam("factors must match the member count")
        if isinstance(factors, np.ndarray):
            if factors.ndim != 3:
                raise InvalidParam("prestacked factors must have shape (N, M, r)")
            x = factors if keep.size == len(mats) else factors[keep]
        else:
            fac = [factors[i] for i in keep]
            if all(f is not None for f in fac):
                x = _pad_factors(fac)
        if x is not None and 2 * x.shape[2] > m:
            x = None
    if x is None:
        stack = np.stack(active)

    if init is None:
        current = sym(np.einsum("n,nml->ml", w_norm, stack if stack is not None else
                                np.stack(active)))
    else:
        current = _as_symmetric(init, "init")
        if current.shape != (m, m):
            raise DimMismatch("init dimension differs from the members")
        current = current.copy()
    if float(np.trace(current)) <= 0.0 < float(traces.max(initial=0.0)):
        # a zero start cannot move; fall back to the arithmetic mean
        current = sym(np.einsum("n,nml->ml", w_norm, stack if stack is not None else
                                np.stack(active)))

    history: list[float] = []
    prev = None
    converged = False
    best_value = math.inf
    best_mean = current
    for _ in range(max_iter):
        tbar, value, bfac = _mean_transport(current, stack, x, w_act, w_norm, traces)
        if prev is not None and value > prev + tol * (1.0 + abs(prev)):
            # exact arithmetic guarantees descent, so a material increase
            # means roundoff took over (near-singular iterates); reject
            # this probe and answer with the best iterate so far
            break
        history.append(value)
        if value < best_value:
            best_value = value
            best_mean = current
        if prev is not None and abs(prev - value) <= tol * (1.0 + abs(prev)):
            converged = True
            break
        prev = value
        half = tbar @ bfac
        current = sym(half @ half.T)
    else:
        _, value, _ = _mean_transport(current, stack, x, w_act, w_norm, traces)
        if value <= prev + tol * (1.0 + abs(prev)):
            history.append(value)
            if value < best_value:
                best_value = value
                best_mean = current

    return BarycenterResult(
        mean=best_mean,
        iterations=len(history) - 1,
        frechet_value=best_value,
        converged=converged,
        history=history,
    )


def pairwise_dist2(matrices, factors: list[np.ndarray] | None = None) -> np.ndarray:
    """Symmetric matrix of squared distances between all pairs.

    Uses the nuclear-norm identity tr sqrt(S_i^{1/2} S_j S_i^{1/2}) =
    ||X_j^T X_i||_* when thin factors are available for every member, and
    dense congruences otherwise.
    """
    mats = [np.asarray(a, dtype=float) for a in matrices]
    n = len(mats)
    if n == 0:
        raise EmptySet("no matrices given")
    m = mats[0].shape[0]
    for a in mats:
        if a.shape != (m, m):
            raise DimMismatch("members must share one dimension")
    traces = np.array([float(np.trace(a)) for a in mats])
    cross = np.zeros((n, n))

    x = None
    if factors is not None and all(f is not None for f in factors):
        x = _pad_factors(list(factors))
        if 2 * x.shape[2] > m:
            x = None

    if x is not None:
        r = x.shape[2]
        flat = np.swapaxes(x, 0, 1).reshape(m, n * r)
        rows_per_block = max(1, _BLOCK_BYTES // (8 * max(1, n * r * r) * 3))
        for i0 in range(0, n, rows_per_block):
            i1 = min(n, i0 + rows_per_block)
            nc = n - i0
            # c[b, j, :, :] = X_{i0+b}^T X_{i0+j}
            c = (
                np.swapaxes(x[i0:i1], 1, 2).reshape((i1 - i0) * r, m)
                @ flat[:, i0 * r :]
            ).reshape(i1 - i0, r, nc, r).swapaxes(1, 2)
            gram = np.swapaxes(c, 2, 3) @ c
            block = clipped_sqrt_eigvals(gram)
            cross[i0:i1, i0:] = block
    else:
        stack = np.stack(mats)
        w, v = np.linalg.eigh(sym(stack))
        roots = (v * np.sqrt(np.maximum(w, 0.0))[:, None, :]) @ np.swapaxes(v, 1, 2)
        for i in range(n):
            ri = roots[i]
            cross[i, i:] = clipped_sqrt_eigvals(ri @ stack[i:] @ ri)

    upper = np.triu_indices(n, 1)
    d2 = np.zeros((n, n))
    d2[upper] = np.maximum(traces[upper[0]] + traces[upper[1]] - 2.0 * cross[upper], 0.0)
    return d2 + d2.T
