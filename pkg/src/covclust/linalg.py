"""Eigendecomposition-backed primitives for symmetric PSD matrices.

All operations validate their inputs, clip small negative eigenvalues
against a relative budget, and fail loudly past it. Matrices are plain
float64 ndarrays stored in full with symmetry enforced.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch, InvalidMatrix, NotPSD

# Negative eigenvalues above -PSD_TOL * trace are treated as roundoff and
# clipped to zero; anything below raises NotPSD.
PSD_TOL = 1e-10

# Relative symmetry budget on construction: |A - A.T| <= SYM_TOL * (1 + max|A|).
SYM_TOL = 1e-12

# Relative eigenvalue cutoff for pseudo-inverses and rank decisions.
RANK_TOL = 1e-12


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetric part, batched over leading axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _as_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return a


def _as_symmetric(a, name: str = "matrix") -> np.ndarray:
    a = _as_square(a, name)
    scale = 1.0 + np.abs(a).max(initial=0.0)
    if np.abs(a - a.T).max(initial=0.0) > SYM_TOL * scale:
        raise InvalidMatrix(f"{name} is not symmetric within tolerance")
    return sym(a)


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted in
    descending order and eigenvectors in matching columns.
    """
    a = _as_symmetric(a)
    w, v = np.linalg.eigh(a)
    return w[::-1].copy(), v[:, ::-1].copy()


def _clip_eigvals(w: np.ndarray, trace: float, psd_tol: float) -> np.ndarray:
    if w.min(initial=0.0) < -psd_tol * max(trace, 0.0):
        raise NotPSD(
            f"eigenvalue {w.min():.3e} below the PSD budget "
            f"(-{psd_tol:g} * trace = {-psd_tol * trace:.3e})"
        )
    return np.maximum(w, 0.0)


def check_cov(a: np.ndarray, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate a covariance matrix and clip roundoff-negative eigenvalues.

    Raises InvalidMatrix for non-square, non-finite or asymmetric input and
    NotPSD when an eigenvalue falls below -psd_tol * trace. Returns the
    symmetrized matrix, eigen-clipped only when clipping is needed.
    """
    a = _as_symmetric(a, "covariance")
    w, v = np.linalg.eigh(a)
    if w.size == 0 or w[0] >= 0.0:
        return a
    wc = _clip_eigvals(w, float(np.trace(a)), psd_tol)
    return sym((v * wc) @ v.T)


def sqrt_psd(a: np.ndarray, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    a = _as_symmetric(a)
    w, v = np.linalg.eigh(a)
    wc = _clip_eigvals(w, float(np.trace(a)), psd_tol)
    return sym((v * np.sqrt(wc)) @ v.T)


def inv_sqrt_psd(a: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse square root of a PSD matrix.

    Eigenvalues below rel_tol times the largest eigenvalue are treated as
    zero and excluded, so the zero matrix maps to the zero matrix.
    """
    a = _as_symmetric(a)
    w, v = np.linalg.eigh(a)
    wc = _clip_eigvals(w, float(np.trace(a)), PSD_TOL)
    inv = np.zeros_like(wc)
    pos = wc > rel_tol * wc[-1]
    inv[pos] = 1.0 / np.sqrt(wc[pos])
    return sym((v * inv) @ v.T)


def trace_sqrt_product(a: np.ndarray, b: np.ndarray) -> float:
    """tr sqrt(A^{1/2} B A^{1/2}) for PSD matrices A, B.

    The congruence is formed explicitly and re-symmetrized so a symmetric
    eigensolver applies; negative roundoff eigenvalues of the product are
    clipped to zero before the square root.
    """
    a = _as_symmetric(a, "A")
    b = _as_symmetric(b, "B")
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    r = sqrt_psd(a)
    c = sym(r @ b @ r)
    w = np.linalg.eigvalsh(c)
    return float(np.sqrt(np.maximum(w, 0.0)).sum())


def psd_factor(a: np.ndarray, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Factor X with A = X X^T, keeping eigenvalues above rel_tol * max.

    Returns an (M, r) array where r is the numerical rank; the zero matrix
    yields an (M, 0) array.
    """
    a = _as_symmetric(a)
    w, v = np.linalg.eigh(a)
    wc = _clip_eigvals(w, float(np.trace(a)), PSD_TOL)
    if wc.size == 0 or wc[-1] <= 0.0:
        return np.zeros((a.shape[0], 0))
    keep = wc > rel_tol * wc[-1]
    return v[:, keep] * np.sqrt(wc[keep])


def clipped_sqrt_eigvals(c: np.ndarray) -> np.ndarray:
    """Batched sum of square roots of clipped-nonnegative eigenvalues.

    c has shape (..., r, r), symmetric up to roundoff; returns shape (...).
    """
    w = np.linalg.eigvalsh(sym(c))
    return np.sqrt(np.maximum(w, 0.0)).sum(axis=-1)
