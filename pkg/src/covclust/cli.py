"""Command-line surface for the covariance clustering toolkit.

Subcommands cover the whole pipeline: simulate synthetic grouped curves,
estimate per-group covariances, fit the soft clustering, scan cluster
counts, run the permutation test, and dump MDS coordinates or pairwise
distances for plotting. Diagnostics go to standard error; results go to
files only, written atomically. Identical inputs, flags, and seed give
byte-identical outputs.

Exit codes: 0 on success, 2 for input problems, 3 for numeric or solver
failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dataio import (
    SyntheticSpec,
    atomic_write_text,
    read_cov_matrix,
    read_curves,
    sample_cov,
    simulate,
    write_cov_matrix,
    write_curves,
    write_labels,
    write_table,
)
from .errors import (
    CovClustError,
    DimMismatch,
    EmptySet,
    InputFormatError,
    InvalidDistance,
    InvalidMatrix,
    InvalidParam,
    NeedsTwoClusters,
    NotPSD,
    RequiresRawCurves,
    TooFewCurves,
    TooFewItems,
)
from .linalg import check_cov
from .softclust import SoftClustConfig, fit, fit_reduced, suggested_entropy
from .validation import mds_coords, permutation_test, tasw_scan
from .wasserstein import pairwise_dist2

# Errors caused by what the user handed us, as opposed to the solver
# failing on legitimate input.
_INPUT_ERRORS = (
    InputFormatError,
    InvalidParam,
    InvalidMatrix,
    NotPSD,
    DimMismatch,
    TooFewCurves,
    TooFewItems,
    RequiresRawCurves,
    NeedsTwoClusters,
    InvalidDistance,
    EmptySet,
    OSError,
    UnicodeDecodeError,
    ValueError,
)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_json(path: str, obj: dict) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _resolve_threads(args) -> int:
    value = getattr(args, "threads", None)
    if value is None:
        env = os.environ.get("COVCLUST_THREADS", "").strip()
        value = int(env) if env else (os.cpu_count() or 1)
    if value < 1:
        raise InvalidParam("threads must be >= 1")
    return value


def _entropy_from_args(args) -> float:
    if args.avg_entropy is not None:
        return args.avg_entropy
    return suggested_entropy(args.entropy_alpha, args.entropy_beta)


def _config_from_args(args, n_clusters: int) -> SoftClustConfig:
    return SoftClustConfig(
        n_clusters=n_clusters,
        avg_entropy=_entropy_from_args(args),
        nstart=args.nstart,
        nrefine=args.nrefine,
        ntry=args.ntry,
        max_bcd_iter=args.max_bcd_iter,
        bcd_tol=args.bcd_tol,
        bary_max_iter=args.bary_max_iter,
        bary_tol=args.bary_tol,
        rng_seed=args.seed,
    )


def _k_values(args) -> list[int]:
    if args.k_values:
        try:
            return [int(v) for v in args.k_values.split(",")]
        except ValueError:
            raise InvalidParam(f"bad --k-values {args.k_values!r}") from None
    return list(range(2, args.k_max + 1))


def _load_covs(path: str, allow_uneven: bool):
    samples = read_curves(path)
    return samples, [sample_cov(s, allow_uneven=allow_uneven) for s in samples]


def _read_matrices(paths) -> list[np.ndarray]:
    if len(paths) < 2:
        raise InvalidParam("need at least 2 matrix files")
    return [check_cov(read_cov_matrix(p)) for p in paths]


def _matrix_ids(paths) -> list[str]:
    return [os.path.splitext(os.path.basename(p))[0] for p in paths]


def cmd_simulate(args) -> int:
    perturbations = tuple(int(v) for v in args.perturbations.split(","))
    spec = SyntheticSpec(
        n_per_cluster=args.n_per_cluster,
        perturbations=perturbations,
        decay=args.decay,
        n_basis=args.n_basis,
        grid_size=args.grid_size,
        n_range=(args.n_min, args.n_max),
        perturbation_scale=args.perturbation_scale,
        seed=args.seed,
    )
    samples, labels = simulate(spec)
    write_curves(args.output, samples, comments=[f"seed={spec.seed}"])
    labels_path = args.labels
    if labels_path is None:
        root, ext = os.path.splitext(args.output)
        labels_path = root + "_labels" + (ext or ".csv")
    write_labels(labels_path, [s.group_id for s in samples], labels)
    _log(f"wrote {len(samples)} groups to {args.output} and labels to {labels_path}")
    return 0


def cmd_cov(args) -> int:
    samples = read_curves(args.input)
    covs = [sample_cov(s, allow_uneven=args.allow_uneven_grid) for s in samples]
    os.makedirs(args.output, exist_ok=True)
    rows = []
    for c in covs:
        fname = f"{c.id}.{args.format}"
        write_cov_matrix(os.path.join(args.output, fname), c.matrix, fmt=args.format)
        rows.append([c.id, c.n, fname])
    write_table(os.path.join(args.output, "index.csv"), ["group_id", "n_curves", "file"], rows)
    _log(f"wrote {len(covs)} covariance matrices to {args.output}")
    return 0


def cmd_cluster(args) -> int:
    _, covs = _load_covs(args.input, args.allow_uneven_grid)
    config = _config_from_args(args, args.k)
    if args.reduced is not None:
        solution = fit_reduced(covs, config, args.reduced, repeats=args.repeats)
    elif args.repeats != 1:
        raise InvalidParam("--repeats only applies together with --reduced")
    else:
        solution = fit(covs, config)

    bary_dir = args.bary_dir
    if bary_dir is None:
        bary_dir = os.path.splitext(args.output)[0] + "_barycenters"
    os.makedirs(bary_dir, exist_ok=True)
    width = max(2, len(str(config.n_clusters - 1)))
    bary_files = []
    for j in range(config.n_clusters):
        fname = f"bary_{j:0{width}d}.{args.bary_format}"
        write_cov_matrix(os.path.join(bary_dir, fname), solution.barycenters[j], fmt=args.bary_format)
        bary_files.append(fname)

    part = solution.partition
    obj = {
        "seed": int(args.seed),
        "n_clusters": int(config.n_clusters),
        "avg_entropy_target": float(config.avg_entropy),
        "eta": None if math.isinf(solution.eta) else float(solution.eta),
        "objective": float(solution.objective),
        "avg_entropy": float(solution.entropy),
        "iterations": int(solution.iterations),
        "converged": bool(solution.converged),
        "ids": list(solution.ids),
        "weights": [float(w) for w in solution.weights],
        "partition": part.tolist(),
        "assignments": [int(j) for j in np.argmax(part, axis=1)],
        "credibilities": [float(v) for v in part.max(axis=1)],
        "overlap": (part.T @ part).tolist(),
        "objective_history": [float(v) for v in solution.objective_history],
        "barycenter_dir": bary_dir,
        "barycenter_files": bary_files,
        "reduced": None if args.reduced is None else int(args.reduced),
    }
    _write_json(args.output, obj)
    _log(
        f"K={config.n_clusters}: objective={solution.objective!r} after "
        f"{solution.iterations} iterations (converged={solution.converged})"
    )
    return 0


def cmd_tasw(args) -> int:
    _, covs = _load_covs(args.input, args.allow_uneven_grid)
    ks = _k_values(args)
    config = _config_from_args(args, min(ks))
    profile = tasw_scan(covs, config, ks, delta=args.delta, threads=_resolve_threads(args))
    rows = [
        [k, float(t), int(k == profile.k_hat), int(k in profile.candidate_set)]
        for k, t in zip(profile.k_values, profile.tasw_values)
    ]
    write_table(
        args.output,
        ["k", "tasw", "is_k_hat", "is_candidate"],
        rows,
        comments=[f"seed={args.seed}", f"delta={repr(float(args.delta))}"],
    )
    _log(f"k_hat={profile.k_hat}, candidates={list(profile.candidate_set)}")
    return 0


def cmd_permtest(args) -> int:
    samples = read_curves(args.input)
    ks = _k_values(args)
    config = _config_from_args(args, min(ks))
    result = permutation_test(
        samples,
        config,
        ks,
        n_perm=args.n_perm,
        seed=args.seed,
        recenter=not args.no_recenter,
        threads=_resolve_threads(args),
    )
    obj = {
        "seed": int(args.seed),
        "n_perm": int(result.n_perm),
        "k_values": [int(k) for k in result.k_values],
        "observed_tasw_max": float(result.observed_tasw_max),
        "null_samples": [float(v) for v in result.null_samples],
        "p_value": float(result.p_value),
        "recenter": bool(not args.no_recenter),
    }
    _write_json(args.output, obj)
    _log(f"observed TASW max {result.observed_tasw_max!r}, p-value {result.p_value!r}")
    return 0


def cmd_mds(args) -> int:
    mats = _read_matrices(args.matrices)
    coords = mds_coords(mats, args.dim)
    ids = _matrix_ids(args.matrices)
    header = ["id"] + [f"coord_{d}" for d in range(args.dim)]
    rows = [[ids[i]] + [float(v) for v in coords[i]] for i in range(len(ids))]
    write_table(args.output, header, rows)
    _log(f"wrote {len(ids)} coordinate rows to {args.output}")
    return 0


def cmd_dist(args) -> int:
    mats = _read_matrices(args.matrices)
    ids = _matrix_ids(args.matrices)
    d2 = pairwise_dist2(mats)
    values = d2 if args.squared else np.sqrt(np.maximum(d2, 0.0))
    rows = [[ids[i]] + [float(v) for v in values[i]] for i in range(len(ids))]
    write_table(args.output, ["id"] + ids, rows)
    _log(f"wrote a {len(ids)}x{len(ids)} distance matrix to {args.output}")
    return 0


def _add_fit_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("-E", "--avg-entropy", type=float, default=None,
                    help="target average row entropy (overrides the alpha/beta rule)")
    sp.add_argument("--entropy-alpha", type=float, default=0.25,
                    help="mixing weight of the two-cluster-confusion entropy rule")
    sp.add_argument("--entropy-beta", type=float, default=0.05,
                    help="confusion level of the entropy rule")
    sp.add_argument("--nstart", type=int, default=5, help="random medoid seedings")
    sp.add_argument("--nrefine", type=int, default=5, help="medoid refinement sweeps")
    sp.add_argument("--ntry", type=int, default=None,
                    help="swap candidates per medoid slot (default: N/K rounded up)")
    sp.add_argument("--max-bcd-iter", type=int, default=100)
    sp.add_argument("--bcd-tol", type=float, default=1e-6)
    sp.add_argument("--bary-max-iter", type=int, default=100)
    sp.add_argument("--bary-tol", type=float, default=1e-8)
    sp.add_argument("--seed", type=int, default=0, help="RNG seed, echoed in the output")
    sp.add_argument("--allow-uneven-grid", action="store_true",
                    help="accept unevenly spaced grids despite the unweighted convention")


def _add_scan_flags(sp: argparse.ArgumentParser) -> None:
    group = sp.add_mutually_exclusive_group()
    group.add_argument("-K", "--k-max", type=int, default=10,
                       help="scan cluster counts 2..K_MAX (default 10)")
    group.add_argument("--k-values", type=str, default=None,
                       help="explicit comma-separated cluster counts")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: COVCLUST_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covclust",
        description="Soft clustering of group covariance operators under the "
                    "transport-based Procrustes distance.",
    )
    parser.add_argument("--version", action="version", version=f"covclust {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw the synthetic grouped curves")
    sp.add_argument("-o", "--output", required=True, help="curves CSV to write")
    sp.add_argument("--labels", default=None, help="labels CSV (default: <output>_labels.csv)")
    sp.add_argument("--n-per-cluster", type=int, default=25)
    sp.add_argument("--perturbations", type=str, default="1,2,3,4",
                    help="comma-separated basis orders, one per cluster")
    sp.add_argument("--decay", type=float, default=2.0 / math.sqrt(5.0))
    sp.add_argument("--n-basis", type=int, default=33)
    sp.add_argument("--grid-size", type=int, default=101)
    sp.add_argument("--n-min", type=int, default=5)
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--perturbation-scale", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("cov", help="estimate per-group sample covariances")
    sp.add_argument("input", help="curves CSV")
    sp.add_argument("-o", "--output", required=True, help="directory for the matrix files")
    sp.add_argument("--format", choices=("csv", "wpcv"), default="csv")
    sp.add_argument("--allow-uneven-grid", action="store_true")
    sp.set_defaults(func=cmd_cov)

    sp = sub.add_parser("cluster", help="fit the entropy-constrained soft clustering")
    sp.add_argument("input", help="curves CSV")
    sp.add_argument("-o", "--output", required=True, help="solution JSON to write")
    sp.add_argument("-k", type=int, required=True, help="number of clusters")
    sp.add_argument("--reduced", type=int, default=None,
                    help="fit barycenters on a random subsample of this size")
    sp.add_argument("--repeats", type=int, default=1,
                    help="independent reduced fits to try (with --reduced)")
    sp.add_argument("--bary-dir", default=None,
                    help="directory for barycenter files (default: <output>_barycenters)")
    sp.add_argument("--bary-format", choices=("csv", "wpcv"), default="csv")
    _add_fit_flags(sp)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("tasw", help="profile cluster quality across cluster counts")
    sp.add_argument("input", help="curves CSV")
    sp.add_argument("-o", "--output", required=True, help="profile CSV to write")
    sp.add_argument("--delta", type=float, default=0.05,
                    help="relative slack defining the candidate set")
    _add_scan_flags(sp)
    _add_fit_flags(sp)
    sp.set_defaults(func=cmd_tasw)

    sp = sub.add_parser("permtest", help="permutation test of the no-cluster null")
    sp.add_argument("input", help="curves CSV")
    sp.add_argument("-o", "--output", required=True, help="result JSON to write")
    sp.add_argument("--n-perm", type=int, default=200)
    sp.add_argument("--no-recenter", action="store_true",
                    help="skip re-centering each permuted group before covariance estimation")
    _add_scan_flags(sp)
    _add_fit_flags(sp)
    sp.set_defaults(func=cmd_permtest)

    sp = sub.add_parser("mds", help="classical MDS coordinates of covariance matrices")
    sp.add_argument("matrices", nargs="+", help="matrix files (CSV or binary)")
    sp.add_argument("-o", "--output", required=True, help="coordinates CSV to write")
    sp.add_argument("-d", "--dim", type=int, default=2)
    sp.set_defaults(func=cmd_mds)

    sp = sub.add_parser("dist", help="pairwise transport distance matrix")
    sp.add_argument("matrices", nargs="+", help="matrix files (CSV or binary)")
    sp.add_argument("-o", "--output", required=True, help="distance CSV to write")
    sp.add_argument("--squared", action="store_true", help="write squared distances")
    sp.set_defaults(func=cmd_dist)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        _log(f"covclust: input error: {exc}")
        return 2
    except (CovClustError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _log(f"covclust: numeric failure: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
