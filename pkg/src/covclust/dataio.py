"""Curve and covariance I/O plus the synthetic functional data generator.

Curves live on a shared evenly spaced grid and are treated as plain
vectors (no quadrature weighting), so covariance estimates are ordinary
unbiased sample covariances of the grid values. CSV is the interchange
format throughout; covariance matrices additionally round-trip through a
small binary container. All writers are deterministic (no timestamps) and
atomic (temp file plus rename), and all floats are written in shortest
round-trip form.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import InputFormatError, InvalidParam, TooFewCurves
from .linalg import sym
from .softclust import SampleCov

_WPCV_MAGIC = b"WPCV"

# Relative wobble allowed before a grid counts as unevenly spaced.
_EVEN_TOL = 1e-8


def _fmt(x) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write a file via a sibling temp file and rename, so failures never
    leave partial output behind."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class FunctionalSample:
    """Curves of one group observed on a shared grid."""

    group_id: str
    curves: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        curves = np.asarray(self.curves, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        if curves.ndim != 2:
            raise InputFormatError(f"group {self.group_id!r}: curves must be 2-D")
        if curves.shape[0] < 2:
            raise TooFewCurves(f"group {self.group_id!r} has {curves.shape[0]} curve(s), need >= 2")
        if grid.ndim != 1 or grid.size != curves.shape[1]:
            raise InputFormatError(f"group {self.group_id!r}: grid does not match the curves")
        if not (np.all(np.isfinite(curves)) and np.all(np.isfinite(grid))):
            raise InputFormatError(f"group {self.group_id!r}: non-finite values")
        if grid.size >= 2 and np.any(np.diff(grid) <= 0):
            raise InputFormatError(f"group {self.group_id!r}: grid must be strictly increasing")
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.curves.shape[0]


def grid_is_even(grid: np.ndarray) -> bool:
    d = np.diff(grid)
    if d.size == 0:
        return True
    return float(np.abs(d - d.mean()).max()) <= _EVEN_TOL * float(d.mean())


def sample_cov(sample: FunctionalSample, allow_uneven: bool = False) -> SampleCov:
    """Unbiased sample covariance of a group's grid values.

    Curves are treated as raw vectors; unevenly spaced grids are rejected
    unless allow_uneven is set, to make the no-quadrature convention
    explicit. The centered curves give an exact thin factor of the
    estimate, carried on the result.
    """
    if sample.n < 2:
        raise TooFewCurves(f"group {sample.group_id!r} needs >= 2 curves")
    if not allow_uneven and not grid_is_even(sample.grid):
        raise InvalidParam(
            f"group {sample.group_id!r} has an unevenly spaced grid; covariances are "
            "computed without quadrature weights, pass allow_uneven=True to accept that"
        )
    y = sample.curves - sample.curves.mean(axis=0)
    factor = y.T / math.sqrt(sample.n - 1)
    return SampleCov(
        id=sample.group_id,
        matrix=sym(factor @ factor.T),
        n=sample.n,
        factor=factor,
    )


def fourier_basis(r: int, grid: np.ndarray) -> np.ndarray:
    """Fourier basis function of order r on [0, 1] evaluated on the grid.

    Order 0 is the constant 1; odd orders r give sqrt(2) sin((r+1) pi u);
    even orders r >= 2 give sqrt(2) cos(r pi u).
    """
    if r < 0:
        raise InvalidParam("basis order must be >= 0")
    u = np.asarray(grid, dtype=float)
    if u.size == 0 or u.min() < -1e-12 or u.max() > 1.0 + 1e-12:
        raise InvalidParam("grid must lie inside [0, 1]")
    if r == 0:
        return np.ones_like(u)
    if r % 2 == 1:
        return math.sqrt(2.0) * np.sin((r + 1) * math.pi * u)
    return math.sqrt(2.0) * np.cos(r * math.pi * u)


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration of the synthetic functional clusters.

    Each group's curves are a decayed random Fourier series plus one extra
    standard normal coefficient on the group's cluster-specific basis
    function, so cluster c's population covariance is the shared series
    covariance plus perturbation_scale times the rank-one term on basis
    order perturbations[c].
    """

    n_per_cluster: int = 25
    perturbations: tuple[int, ...] = (1, 2, 3, 4)
    decay: float = 2.0 / math.sqrt(5.0)
    n_basis: int = 33
    grid_size: int = 101
    n_range: tuple[int, int] = (5, 10)
    perturbation_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_per_cluster < 1:
            raise InvalidParam("n_per_cluster must be >= 1")
        if len(self.perturbations) < 1 or any(p < 0 for p in self.perturbations):
            raise InvalidParam("perturbations must be a nonempty tuple of orders >= 0")
        if not 0.0 < self.decay < 1.0:
            raise InvalidParam("decay must lie in (0, 1)")
        if self.n_basis < 1 or self.grid_size < 2:
            raise InvalidParam("n_basis must be >= 1 and grid_size >= 2")
        lo, hi = self.n_range
        if lo < 2 or hi < lo:
            raise InvalidParam("n_range must satisfy 2 <= lo <= hi")
        if not self.perturbation_scale >= 0.0:
            raise InvalidParam("perturbation_scale must be >= 0")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)


def _basis_matrix(spec: SyntheticSpec) -> np.ndarray:
    grid = spec.grid
    return np.stack([fourier_basis(r, grid) for r in range(spec.n_basis)])


def population_cov(spec: SyntheticSpec, cluster: int) -> np.ndarray:
    """Grid evaluation of the population covariance of one cluster."""
    if not 0 <= cluster < len(spec.perturbations):
        raise InvalidParam(f"cluster must index perturbations, got {cluster}")
    f = _basis_matrix(spec)
    lam2 = spec.decay ** (2.0 * np.arange(spec.n_basis))
    base = (f.T * lam2) @ f
    bump = fourier_basis(spec.perturbations[cluster], spec.grid)
    return sym(base + spec.perturbation_scale * np.outer(bump, bump))


def simulate(spec: SyntheticSpec) -> tuple[list[FunctionalSample], np.ndarray]:
    """Draw the synthetic groups; returns (samples, true cluster labels).

    Groups are laid out cluster-major: n_per_cluster groups for each entry
    of perturbations, labeled by position in that tuple. One generator
    seeded with spec.seed is consumed in a fixed order per group: the
    group size, then the (n, n_basis) series coefficients, then the n
    perturbation coefficients.
    """
    rng = np.random.default_rng(spec.seed)
    f = _basis_matrix(spec)
    lam = spec.decay ** np.arange(spec.n_basis)
    root_scale = math.sqrt(spec.perturbation_scale)
    grid = spec.grid
    total = spec.n_per_cluster * len(spec.perturbations)
    width = max(4, len(str(total - 1)))
    samples: list[FunctionalSample] = []
    labels = np.zeros(total, dtype=int)
    g = 0
    lo, hi = spec.n_range
    for c, order in enumerate(spec.perturbations):
        bump = fourier_basis(order, grid)
        for _ in range(spec.n_per_cluster):
            n = int(rng.integers(lo, hi + 1))
            xi = rng.standard_normal((n, spec.n_basis))
            zeta = rng.standard_normal(n)
            curves = (xi * lam) @ f + root_scale * zeta[:, None] * bump
            samples.append(FunctionalSample(f"g{g:0{width}d}", curves, grid))
            labels[g] = c
            g += 1
    return samples, labels


def write_curves(path: str, samples: list[FunctionalSample], comments: list[str] | None = None) -> None:
    """One CSV for a whole dataset: header carries the grid, one row per
    curve with its group id first. Optional comment lines start with '#'."""
    if not samples:
        raise InvalidParam("no samples to write")
    grid = samples[0].grid
    lines = [f"# {c}" for c in (comments or [])]
    lines.append("group_id," + ",".join(_fmt(u) for u in grid))
    for s in samples:
        if s.grid.shape != grid.shape or not np.array_equal(s.grid, grid):
            raise InvalidParam("all groups must share one grid")
        for row in s.curves:
            lines.append(s.group_id + "," + ",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_curves(path: str) -> list[FunctionalSample]:
    """Read a curves CSV written by write_curves (comments skipped)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    rows = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InputFormatError(f"{path}: empty curves file")
    header = rows[0][1].split(",")
    if len(header) < 2:
        raise InputFormatError(f"{path}: header must hold a group column plus grid values")
    try:
        grid = np.array([float(v) for v in header[1:]])
    except ValueError as exc:
        raise InputFormatError(f"{path}: header grid values are not numeric: {exc}") from None
    by_group: dict[str, list[np.ndarray]] = {}
    order: list[str] = []
    for lineno, ln in rows[1:]:
        parts = ln.split(",")
        if len(parts) != grid.size + 1:
            raise InputFormatError(f"{path}:{lineno}: expected {grid.size + 1} fields, got {len(parts)}")
        gid = parts[0]
        try:
            vals = np.array([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise InputFormatError(f"{path}:{lineno}: non-numeric value: {exc}") from None
        if gid not in by_group:
            by_group[gid] = []
            order.append(gid)
        by_group[gid].append(vals)
    samples = []
    for gid in order:
        curves = np.stack(by_group[gid])
        try:
            samples.append(FunctionalSample(gid, curves, grid))
        except TooFewCurves as exc:
            raise InputFormatError(f"{path}: {exc}") from None
    return samples


def write_labels(path: str, ids: list[str], labels) -> None:
    if len(ids) != len(labels):
        raise InvalidParam("ids and labels must have equal length")
    lines = ["group_id,label"]
    lines += [f"{gid},{int(lab)}" for gid, lab in zip(ids, labels)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_labels(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    rows = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0].split(",")[:2] != ["group_id", "label"]:
        raise InputFormatError(f"{path}: expected a 'group_id,label' header")
    ids: list[str] = []
    labels: list[int] = []
    for ln in rows[1:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise InputFormatError(f"{path}: malformed label row {ln!r}")
        ids.append(parts[0])
        try:
            labels.append(int(parts[1]))
        except ValueError:
            raise InputFormatError(f"{path}: non-integer label in row {ln!r}") from None
    return ids, np.array(labels, dtype=int)


def write_cov_matrix(path: str, matrix: np.ndarray, fmt: str = "csv") -> None:
    """Serialize one square matrix, either as headerless CSV or as the
    binary container (magic, uint32 dimension, row-major float64)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParam(f"matrix must be square, got shape {a.shape}")
    if fmt == "csv":
        lines = [",".join(_fmt(v) for v in row) for row in a]
        atomic_write_text(path, "\n".join(lines) + "\n")
    elif fmt == "wpcv":
        payload = _WPCV_MAGIC + struct.pack("<I", a.shape[0]) + a.astype("<f8").tobytes(order="C")
        atomic_write_bytes(path, payload)
    else:
        raise InvalidParam(f"unknown covariance format {fmt!r}")


def read_cov_matrix(path: str) -> np.ndarray:
    """Read a matrix written by write_cov_matrix, sniffing the container."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == _WPCV_MAGIC:
            meta = fh.read(4)
            if len(meta) != 4:
                raise InputFormatError(f"{path}: truncated header")
            (dim,) = struct.unpack("<I", meta)
            body = fh.read()
            if len(body) != 8 * dim * dim:
                raise InputFormatError(
                    f"{path}: expected {8 * dim * dim} payload bytes for dimension {dim}, "
                    f"got {len(body)}"
                )
            return np.frombuffer(body, dtype="<f8").reshape(dim, dim).astype(float)
        text = (head + fh.read()).decode("utf-8", errors="strict")
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InputFormatError(f"{path}: empty matrix file")
    out = []
    for i, ln in enumerate(rows):
        try:
            out.append([float(v) for v in ln.split(",")])
        except ValueError as exc:
            raise InputFormatError(f"{path}:{i + 1}: non-numeric value: {exc}") from None
    a = np.array(out)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputFormatError(f"{path}: matrix is not square, got shape {a.shape}")
    return a


def write_table(path: str, header: list[str], rows, comments: list[str] | None = None) -> None:
    """Small CSV writer for reports: strings pass through, floats get
    shortest round-trip form, everything else is str()."""
    def cell(v) -> str:
        if isinstance(v, str):
            return v
        if isinstance(v, (float, np.floating)):
            return _fmt(v)
        return str(v)

    lines = [f"# {c}" for c in (comments or [])]
    lines.append(",".join(header))
    lines += [",".join(cell(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh]
    rows = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InputFormatError(f"{path}: empty table")
    return rows[0].split(","), [ln.split(",") for ln in rows[1:]]
