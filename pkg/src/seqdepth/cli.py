"""Command-line entry point.

Subcommands cover the full pipeline: ingest counts, inspect population
stats, estimate intrinsic dimension, synthesize low-dimensional surrogates,
evaluate the closed-form allocation rules, run single simulations, and run
full (m, n) sweeps.  Every subcommand that writes files also writes exactly
one run_manifest.json (command, config snapshot, seed, version, input
digests, timestamps) into its output directory, which is enough to re-run
the command bit-identically.

Config precedence for sweeps: command-line flags override --config JSON,
which overrides built-in defaults.  Randomized subcommands either take
--seed or generate one and print it prominently.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import secrets
import sys

import numpy as np

from . import __version__
from .allocation import (
    ASYMPTOTIC_NOTES,
    DEFAULT_ALLOCATION_CONST,
    AllocationParams,
    expected_error_upper,
    min_reads,
    optimal_cells,
    rate_upper,
    reads_floor,
)
from .dimension import (
    PCA_THRESHOLD,
    pca_intrinsic_dim,
    spectrum_to_csv,
    synthesize_low_dim,
)
from .errors import SeqDepthError
from .experiment import SweepConfig, emit_outputs, fit_slope, sweep
from .ingest import (
    DEFAULT_HVG,
    DEFAULT_MIN_CELLS,
    build_population,
    file_digest,
    load_counts,
    load_population,
    preprocess,
    read_counts_csv,
    read_counts_mtx,
    save_population,
)
from .sequencing import (
    SCENARIOS,
    UNSEEN_POLICIES,
    WeightModel,
    noisy_empirical,
    sample_cells,
    shallow_sequence,
    trial_rng,
)
from .simplex import DiscreteDistribution, population_stats
from .wasserstein import wasserstein_p

MANIFEST_NAME = "run_manifest.json"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a nonnegative integer, got {text}")
    return value


def _seed_value(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return value


def _half_open_unit(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def _order_p(text: str) -> float:
    value = float(text)
    if not 1.0 <= value <= 2.0:
        raise argparse.ArgumentTypeError(f"transport order p must be in [1, 2], got {text}")
    return value


def _order_q(text: str) -> float:
    value = float(text)
    if value < 1.0:
        raise argparse.ArgumentTypeError(f"metric order q must be at least 1, got {text}")
    return value


def _dim_k(text: str) -> float:
    value = float(text)
    if value <= 4.0:
        raise argparse.ArgumentTypeError(f"intrinsic dimension k must exceed 4, got {text}")
    return value


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    generated = secrets.randbits(63)
    print(f"=== generated master seed: {generated} (pass --seed {generated} to reproduce) ===")
    return generated


def _load_input(path: str):
    """Population from either a saved population directory or a counts file."""
    if os.path.isdir(path):
        mu, meta = load_population(path)
        return mu, meta
    counts = load_counts(path)
    mu, info = build_population(counts)
    return mu, info


def _write_manifest(
    out_dir: str,
    command: str,
    config: dict,
    master_seed: int | None,
    input_paths,
) -> str:
    digests = {}
    for p in input_paths:
        if os.path.isdir(p):
            for name in sorted(os.listdir(p)):
                fp = os.path.join(p, name)
                if os.path.isfile(fp) and name != MANIFEST_NAME:
                    digests[fp] = file_digest(fp)
        elif os.path.isfile(p):
            digests[p] = file_digest(p)
    manifest = {
        "command": command,
        "config": config,
        "master_seed": master_seed,
        "tool_version": __version__,
        "input_digests": digests,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_ingest(args) -> int:
    if args.format == "csv":
        counts = read_counts_csv(args.input)
    elif args.format == "mtx":
        counts = read_counts_mtx(args.input)
    else:
        counts = load_counts(args.input)
    mu, provenance, selected = preprocess(counts, min_cells=args.min_cells, d_target=args.hvg)
    row_sums = np.asarray(selected.matrix.sum(axis=1)).ravel()
    kept_ids = [selected.cell_ids[i] for i in np.flatnonzero(row_sums > 0)]
    save_population(
        mu,
        args.out,
        gene_ids=list(selected.gene_ids),
        cell_ids=kept_ids,
        provenance=provenance,
    )
    config = {
        "input": args.input,
        "format": args.format,
        "min_cells": args.min_cells,
        "hvg": args.hvg,
        "out": args.out,
    }
    _write_manifest(args.out, "ingest", config, None, [args.input])
    stats = population_stats(mu)
    print(f"cells kept (N) = {stats.atom_count}")
    print(f"genes kept (d) = {stats.ambient_dim}")
    print(f"mean_l0 = {stats.mean_l0:g}")
    print(f"mean_sq_l2 = {stats.mean_sq_l2:g}")
    print(f"population written to {args.out}")
    return 0


def cmd_stats(args) -> int:
    mu, _ = _load_input(args.input)
    stats = population_stats(mu)
    print(f"N = {stats.atom_count}")
    print(f"d = {stats.ambient_dim}")
    print(f"mean_l0 = {stats.mean_l0:g}")
    print(f"mean_sq_l2 = {stats.mean_sq_l2:g}")
    return 0


def cmd_dimension(args) -> int:
    mu, _ = _load_input(args.input)
    k, spectrum = pca_intrinsic_dim(mu, threshold=args.threshold)
    os.makedirs(args.out, exist_ok=True)
    spectrum_path = os.path.join(args.out, "spectrum.csv")
    spectrum_to_csv(spectrum, spectrum_path)
    config = {"input": args.input, "threshold": args.threshold, "out": args.out}
    _write_manifest(args.out, "dimension", config, None, [args.input])
    print(f"k = {k}")
    print(f"spectrum written to {spectrum_path}")
    return 0


def cmd_synth(args) -> int:
    seed = _resolve_seed(args.seed)
    mu, _ = _load_input(args.input)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    result = synthesize_low_dim(mu, rank=args.rank, rng=rng)
    save_population(
        result.population,
        args.out,
        provenance={"source": args.input, "rank": args.rank, "seed": seed},
    )
    stats_path = os.path.join(args.out, "synth_stats.csv")
    stats = population_stats(result.population)
    header = "N,d,rank,intrinsic_dim,mean_l0,mean_sq_l2,relative_error"
    row = (
        f"{stats.atom_count},{stats.ambient_dim},{args.rank},{result.intrinsic_dim},"
        f"{stats.mean_l0!r},{stats.mean_sq_l2!r},{result.relative_error!r}"
    )
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n" + row + "\n")
    config = {"input": args.input, "rank": args.rank, "seed": seed, "out": args.out}
    _write_manifest(args.out, "synth", config, seed, [args.input])
    print(header)
    print(row)
    print(f"synthetic population written to {args.out}")
    return 0


def cmd_allocate(args) -> int:
    params = AllocationParams(
        mean_l0=args.mean_l0,
        mean_sq_l2=args.mean_sq_l2,
        c_star=args.c_star,
        k=args.k,
        alpha=args.alpha,
        p=args.p,
    )
    n_exact = optimal_cells(args.m, params, args.C)
    n_opt = max(1, round(n_exact))
    print(f"n_opt = {n_opt}  (exact {n_exact:.3f})")
    print(f"rate_upper = {rate_upper(args.m, params):.6g}")
    print(f"upper_bound(n_opt, m) = {expected_error_upper(n_opt, args.m, params):.6g}")
    print(f"reads_floor = {reads_floor(params):.6g} (c_* m must exceed this)")
    if args.eps is not None:
        print(f"min_reads(eps={args.eps:g}) = {min_reads(n_opt, args.eps, params):.6g}")
    for name in ("optimal_cells", "rate_upper", "expected_error_upper"):
        print(f"note [{name}]: {ASYMPTOTIC_NOTES[name]}")
    return 0


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    mu, _ = _load_input(args.input)
    if args.scenario == "uniform":
        model = WeightModel("uniform")
    else:
        model = WeightModel(args.scenario, mu.weights.copy())
    rng = trial_rng(seed, args.m, args.n, 0)
    cells, raw = sample_cells(mu, args.n, model, rng)
    run = shallow_sequence(cells, raw, args.m, args.unseen_policy, rng)
    mu_hat = noisy_empirical(run)
    mu_n = DiscreteDistribution.empirical(cells, collapse_identical=True)
    w_noisy_mu = wasserstein_p(mu_hat, mu, args.p, args.q)
    w_noisy_mun = wasserstein_p(mu_hat, mu_n, args.p, args.q)
    w_mun_mu = wasserstein_p(mu_n, mu, args.p, args.q)
    print(f"W_noisy_vs_mu = {w_noisy_mu!r}")
    print(f"W_noisy_vs_mun = {w_noisy_mun!r}")
    print(f"W_mun_vs_mu = {w_mun_mu!r}")
    print(f"unseen cells: {run.unseen_count} of {run.n_cells}")
    return 0


_SWEEP_FLAG_KEYS = ("trials", "p", "q", "scenario", "unseen_policy", "workers")


def _sweep_config(args, population) -> SweepConfig:
    base: dict = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise ValueError("sweep config JSON must be an object")
    if args.m_grid is not None:
        base["m_grid"] = [int(v) for v in args.m_grid.split(",")]
    if args.n_grid is not None:
        base["n_grid"] = [int(v) for v in args.n_grid.split(",")]
    for key in _SWEEP_FLAG_KEYS:
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.seed is not None:
        base["master_seed"] = args.seed
    if "master_seed" not in base:
        base["master_seed"] = _resolve_seed(None)
    if "m_grid" not in base or "n_grid" not in base:
        raise ValueError("sweep needs m_grid and n_grid (flags or --config JSON)")
    if base.get("scenario", "uniform") != "uniform" and base.get("frequencies") is None:
        base["frequencies"] = [float(w) for w in population.weights]
    return SweepConfig.from_dict(base)


def cmd_sweep(args) -> int:
    mu, _ = _load_input(args.input)
    config = _sweep_config(args, mu)
    result = sweep(mu, config)
    written = emit_outputs(result, args.out)
    _write_manifest(args.out, "sweep", config.to_dict(), config.master_seed, [args.input])
    for path in written:
        print(f"wrote {path}")
    failures = [c for c in result.cells if not c.ok]
    for c in failures:
        print(f"cell (m={c.m}, n={c.n}) failed: {c.error}", file=sys.stderr)
    for m in sorted(result.n_star):
        star = result.n_star[m]
        flag = " (boundary)" if star.boundary else ""
        print(f"n*({m}) = {star.n}{flag}")
    try:
        slope, intercept, r2 = fit_slope(result.n_star)
        print(f"fitted slope = {slope:.4f} (intercept {intercept:.4f}, r2 {r2:.4f})")
    except SeqDepthError as exc:
        print(f"slope fit skipped: {exc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqdepth",
        description="Sequencing-depth trade-off simulator and analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse counts, filter, select HVGs, save population")
    p_ingest.add_argument("--input", required=True, help="counts file (CSV or MatrixMarket)")
    p_ingest.add_argument("--format", choices=("csv", "mtx"), default=None)
    p_ingest.add_argument("--min-cells", type=_positive_int, default=DEFAULT_MIN_CELLS)
    p_ingest.add_argument("--hvg", type=_positive_int, default=DEFAULT_HVG)
    p_ingest.add_argument("--out", required=True, help="output population directory")
    p_ingest.set_defaults(func=cmd_ingest)

    p_stats = sub.add_parser("stats", help="print population summary statistics")
    p_stats.add_argument("--input", required=True, help="population directory or counts file")
    p_stats.set_defaults(func=cmd_stats)

    p_dim = sub.add_parser("dimension", help="PCA intrinsic dimension and spectrum")
    p_dim.add_argument("--input", required=True, help="population directory or counts file")
    p_dim.add_argument("--threshold", type=_open_unit, default=PCA_THRESHOLD)
    p_dim.add_argument("--out", default="dimension_out", help="output directory")
    p_dim.set_defaults(func=cmd_dimension)

    p_synth = sub.add_parser("synth", help="NMF-based low-dimensional synthetic population")
    p_synth.add_argument("--input", required=True, help="population directory or counts file")
    p_synth.add_argument("--rank", type=_positive_int, required=True)
    p_synth.add_argument("--seed", type=_seed_value, default=None)
    p_synth.add_argument("--out", required=True, help="output population directory")
    p_synth.set_defaults(func=cmd_synth)

    p_alloc = sub.add_parser("allocate", help="closed-form optimal cell count and bounds")
    p_alloc.add_argument("--m", type=_positive_int, required=True, help="read budget")
    p_alloc.add_argument("--mean-l0", dest="mean_l0", type=_positive_float, required=True)
    p_alloc.add_argument("--k", type=_dim_k, required=True, help="intrinsic dimension (> 4)")
    p_alloc.add_argument("--C", type=_positive_float, default=DEFAULT_ALLOCATION_CONST)
    p_alloc.add_argument("--eps", type=_open_unit, default=None)
    p_alloc.add_argument("--alpha", type=_open_unit, default=0.5)
    p_alloc.add_argument("--c-star", dest="c_star", type=_half_open_unit, default=1.0)
    p_alloc.add_argument("--mean-sq-l2", dest="mean_sq_l2", type=_half_open_unit, default=0.5)
    p_alloc.add_argument("--p", type=_order_p, default=1.0)
    p_alloc.set_defaults(func=cmd_allocate)

    p_sim = sub.add_parser("simulate", help="one sequencing run and its three distances")
    p_sim.add_argument("--input", required=True, help="population directory or counts file")
    p_sim.add_argument("--n", type=_positive_int, required=True, help="number of cells")
    p_sim.add_argument("--m", type=_nonneg_int, required=True, help="read budget")
    p_sim.add_argument("--scenario", choices=SCENARIOS, default="uniform")
    p_sim.add_argument("--unseen-policy", dest="unseen_policy", choices=UNSEEN_POLICIES, default="uniform")
    p_sim.add_argument("--p", type=_order_p, default=1.0)
    p_sim.add_argument("--q", type=_order_q, default=2.0)
    p_sim.add_argument("--seed", type=_seed_value, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="full (m, n) grid sweep with CSV/SVG outputs")
    p_sweep.add_argument("--input", required=True, help="population directory or counts file")
    p_sweep.add_argument("--config", default=None, help="sweep config JSON")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--workers", type=_positive_int, default=None)
    p_sweep.add_argument("--seed", type=_seed_value, default=None)
    p_sweep.add_argument("--m-grid", dest="m_grid", default=None, help="comma-separated budgets")
    p_sweep.add_argument("--n-grid", dest="n_grid", default=None, help="comma-separated cell counts")
    p_sweep.add_argument("--trials", type=_positive_int, default=None)
    p_sweep.add_argument("--p", type=_order_p, default=None)
    p_sweep.add_argument("--q", type=_order_q, default=None)
    p_sweep.add_argument("--scenario", choices=SCENARIOS, default=None)
    p_sweep.add_argument("--unseen-policy", dest="unseen_policy", choices=UNSEEN_POLICIES, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def dispatch(argv) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except SeqDepthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
