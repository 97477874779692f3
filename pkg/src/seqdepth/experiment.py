"""Grid sweeps over read budgets and cell counts.

For every (m, n) grid cell the simulator runs `trials` independent
realizations and records three paired distances per trial: noisy empirical
vs population, noisy empirical vs sampled empirical, and sampled empirical
vs population.  The headline error (mean_W, used for the n* extraction) is
the first of these.  Trial streams are keyed by (master_seed, m, n, trial),
so results are independent of execution order and of the worker count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationParams, optimal_cells
from .errors import (
    InsufficientDataError,
    InvariantViolationError,
    SeqDepthError,
    SizeLimitError,
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
from .simplex import DiscreteDistribution, lq_distance
from .svgplot import LineChart, Series, write_chart
from .wasserstein import MAX_DENSE_ENTRIES, wasserstein_p

DEFAULT_TRIALS = 10
CONVEXITY_SLACK = 1e-9

RESULTS_COLUMNS = ("m", "n", "trial", "W_noisy_vs_mu", "W_noisy_vs_mun", "W_mun_vs_mu")
SUMMARY_COLUMNS = ("m", "n", "mean_W", "std_W")
NSTAR_COLUMNS = ("m", "n_star", "boundary_flag")


def log_grid(lo: int, hi: int, count: int) -> tuple:
    """Roughly geometric integer grid from lo to hi inclusive, deduplicated."""
    if lo < 1 or hi < lo or count < 1:
        raise ValueError("need 1 <= lo <= hi and count >= 1")
    if count == 1:
        return (lo,)
    pts = np.geomspace(lo, hi, count)
    out = sorted({int(round(v)) for v in pts})
    return tuple(out)


def _check_grid(name: str, grid) -> tuple:
    vals = tuple(int(v) for v in grid)
    if not vals:
        raise ValueError(f"{name} must be nonempty")
    if any(v < 1 for v in vals):
        raise ValueError(f"{name} entries must be positive integers")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    return vals


@dataclass(frozen=True)
class SweepConfig:
    """Axes and knobs for one sweep."""

    m_grid: tuple
    n_grid: tuple
    trials: int = DEFAULT_TRIALS
    p: float = 1.0
    q: float = 2.0
    scenario: WeightModel = field(default_factory=lambda: WeightModel("uniform"))
    unseen_policy: str = "uniform"
    master_seed: int = 0
    workers: int = 1
    max_entries: int = MAX_DENSE_ENTRIES
    theory: AllocationParams | None = None
    allocation_const: float | None = None
    svg_width: int = 640
    svg_height: int = 480

    def __post_init__(self):
        object.__setattr__(self, "m_grid", _check_grid("m_grid", self.m_grid))
        object.__setattr__(self, "n_grid", _check_grid("n_grid", self.n_grid))
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.unseen_policy not in UNSEEN_POLICIES:
            raise ValueError(
                f"unknown unseen policy {self.unseen_policy!r}; "
                f"expected one of {UNSEEN_POLICIES}"
            )
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def to_dict(self) -> dict:
        d = {
            "m_grid": list(self.m_grid),
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "p": self.p,
            "q": self.q,
            "scenario": self.scenario.variant,
            "frequencies": None
            if self.scenario.frequencies is None
            else [float(v) for v in self.scenario.frequencies],
            "unseen_policy": self.unseen_policy,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "max_entries": self.max_entries,
            "theory": None
            if self.theory is None
            else {
                "mean_l0": self.theory.mean_l0,
                "mean_sq_l2": self.theory.mean_sq_l2,
                "c_star": self.theory.c_star,
                "k": self.theory.k,
                "alpha": self.theory.alpha,
                "p": self.theory.p,
            },
            "allocation_const": self.allocation_const,
            "svg_width": self.svg_width,
            "svg_height": self.svg_height,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        variant = d.pop("scenario", "uniform")
        if variant not in SCENARIOS:
            raise ValueError(f"unknown scenario {variant!r}; expected one of {SCENARIOS}")
        freq = d.pop("frequencies", None)
        scenario = WeightModel(variant, None if freq is None else np.asarray(freq))
        theory = d.pop("theory", None)
        if theory is not None:
            theory = AllocationParams(**theory)
        known = {
            "m_grid",
            "n_grid",
            "trials",
            "p",
            "q",
            "unseen_policy",
            "master_seed",
            "workers",
            "max_entries",
            "allocation_const",
            "svg_width",
            "svg_height",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        d["m_grid"] = tuple(d.get("m_grid", ()))
        d["n_grid"] = tuple(d.get("n_grid", ()))
        return cls(scenario=scenario, theory=theory, **d)


@dataclass(frozen=True)
class TrialRecord:
    """The three paired distances from one realization of one grid cell."""

    m: int
    n: int
    trial: int
    w_noisy_vs_mu: float
    w_noisy_vs_mun: float
    w_mun_vs_mu: float


@dataclass(frozen=True)
class CellResult:
    """All trials of one (m, n) grid cell, or the error that stopped them."""

    m: int
    n: int
    mean_w: float
    std_w: float
    records: tuple
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class NStar:
    """Argmin cell count for one read budget."""

    n: int
    boundary: bool


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    cells: tuple
    n_star: dict
    theory_curve: dict

    def cell(self, m: int, n: int) -> CellResult:
        for c in self.cells:
            if c.m == m and c.n == n:
                return c
        raise KeyError(f"no grid cell (m={m}, n={n})")


def _assert_convexity(run, mu_n_distance: float, p: float, q: float):
    """Plan-splitting bound: W_p^p of the empirical pair is at most the mean
    per-cell distance^p (couple each noisy profile with its own cell)."""
    dists = [
        lq_distance(est, cell, q) ** p
        for est, cell in zip(run.noisy_profiles, run.sampled_cells)
    ]
    rhs = float(np.mean(dists))
    lhs = mu_n_distance**p
    if lhs > rhs + CONVEXITY_SLACK:
        raise InvariantViolationError(
            f"transport bound violated: W^p={lhs!r} exceeds mean cell distance^p={rhs!r}"
        )


def run_cell(
    population: DiscreteDistribution,
    m: int,
    n: int,
    config: SweepConfig,
    rng_substream=None,
) -> tuple[float, float, list]:
    """All trials of one grid cell; returns (mean_W, std_W, trial records).

    ``rng_substream`` may be a callable trial -> Generator; by default each
    trial uses the stream keyed by (master_seed, m, n, trial).
    """
    if m < 0:
        raise ValueError(f"read budget must be nonnegative, got m={m}")
    if n < 1:
        raise ValueError(f"cell count must be at least 1, got n={n}")
    if rng_substream is None:
        def rng_substream(trial, _seed=config.master_seed, _m=m, _n=n):
            return trial_rng(_seed, _m, _n, trial)
    records = []
    for trial in range(config.trials):
        rng = rng_substream(trial)
        cells, raw = sample_cells(population, n, config.scenario, rng)
        run = shallow_sequence(cells, raw, m, config.unseen_policy, rng)
        mu_hat = noisy_empirical(run)
        mu_n = DiscreteDistribution.empirical(cells, collapse_identical=True)
        try:
            w_noisy_mu = wasserstein_p(
                mu_hat, population, config.p, config.q, config.max_entries
            )
            w_noisy_mun = wasserstein_p(mu_hat, mu_n, config.p, config.q, config.max_entries)
            w_mun_mu = wasserstein_p(mu_n, population, config.p, config.q, config.max_entries)
        except SizeLimitError as exc:
            raise SizeLimitError(f"grid cell (m={m}, n={n}): {exc}") from exc
        _assert_convexity(run, w_noisy_mun, config.p, config.q)
        records.append(
            TrialRecord(
                m=m,
                n=n,
                trial=trial,
                w_noisy_vs_mu=w_noisy_mu,
                w_noisy_vs_mun=w_noisy_mun,
                w_mun_vs_mu=w_mun_mu,
            )
        )
    values = np.array([r.w_noisy_vs_mu for r in records])
    mean_w = float(values.mean())
    # one trial has no sample spread to report
    std_w = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return mean_w, std_w, records


def _cell_task(args) -> CellResult:
    population, m, n, config = args
    try:
        mean_w, std_w, records = run_cell(population, m, n, config)
    except SeqDepthError as exc:
        return CellResult(m=m, n=n, mean_w=math.nan, std_w=math.nan, records=(), error=str(exc))
    return CellResult(m=m, n=n, mean_w=mean_w, std_w=std_w, records=tuple(records))


def _optimal_from_cells(cells, n_grid) -> dict:
    by_m = {}
    for c in cells:
        if c.ok:
            by_m.setdefault(c.m, []).append(c)
    out = {}
    lo, hi = n_grid[0], n_grid[-1]
    for m in sorted(by_m):
        row = sorted(by_m[m], key=lambda c: c.n)
        best = min(row, key=lambda c: (c.mean_w, c.n))
        out[m] = NStar(n=best.n, boundary=best.n in (lo, hi))
    return out


def find_optimal_n(result: SweepResult) -> dict:
    """Per m, the grid n minimizing mean error; ties go to the smallest n.

    Values carry a boundary flag set when the argmin sits on either end of
    the n grid (the true optimum may lie outside the sweep).
    """
    return _optimal_from_cells(result.cells, result.config.n_grid)


def sweep(population: DiscreteDistribution, config: SweepConfig) -> SweepResult:
    """Evaluate every (m, n) grid cell; per-cell failures are recorded."""
    tasks = [(population, m, n, config) for m in config.m_grid for n in config.n_grid]
    if config.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(_cell_task, tasks))
    else:
        cells = [_cell_task(t) for t in tasks]
    cells.sort(key=lambda c: (c.m, c.n))
    n_star = _optimal_from_cells(cells, config.n_grid)
    theory_curve = {}
    if config.theory is not None and config.allocation_const is not None:
        theory_curve = {
            m: optimal_cells(m, config.theory, config.allocation_const)
            for m in config.m_grid
        }
    return SweepResult(
        config=config, cells=tuple(cells), n_star=n_star, theory_curve=theory_curve
    )


def fit_slope(n_star_map) -> tuple[float, float, float]:
    """Least-squares slope of log n* against log m.

    Boundary-flagged points are excluded; fewer than two usable points is an
    InsufficientData error.  Returns (slope, intercept, r2).
    """
    xs, ys = [], []
    for m in sorted(n_star_map):
        v = n_star_map[m]
        if isinstance(v, NStar):
            if v.boundary:
                continue
            n_val = v.n
        else:
            n_val = v
        xs.append(math.log(m))
        ys.append(math.log(n_val))
    if len(xs) < 2:
        raise InsufficientDataError(
            f"slope fit needs at least 2 off-boundary points, got {len(xs)}"
        )
    x = np.array(xs)
    y = np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_outputs(result: SweepResult, out_dir) -> list:
    """Write the CSV tables and SVG charts for a finished sweep.

    Floats are written with repr (shortest round-trip form), so re-reading a
    CSV reproduces the in-memory numerics exactly and identical sweeps yield
    byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    rows = [
        (r.m, r.n, r.trial, repr(r.w_noisy_vs_mu), repr(r.w_noisy_vs_mun), repr(r.w_mun_vs_mu))
        for c in result.cells
        if c.ok
        for r in c.records
    ]
    results_path = os.path.join(out_dir, "results.csv")
    _write_csv(results_path, RESULTS_COLUMNS, rows)
    written.append(results_path)

    summary_rows = [
        (c.m, c.n, repr(c.mean_w), repr(c.std_w)) for c in result.cells if c.ok
    ]
    summary_path = os.path.join(out_dir, "summary.csv")
    _write_csv(summary_path, SUMMARY_COLUMNS, summary_rows)
    written.append(summary_path)

    with_theory = bool(result.theory_curve)
    header = NSTAR_COLUMNS + ("theory_n",) if with_theory else NSTAR_COLUMNS
    nstar_rows = []
    for m in sorted(result.n_star):
        star = result.n_star[m]
        row = [m, star.n, int(star.boundary)]
        if with_theory:
            row.append(repr(result.theory_curve[m]))
        nstar_rows.append(tuple(row))
    nstar_path = os.path.join(out_dir, "n_star.csv")
    _write_csv(nstar_path, header, nstar_rows)
    written.append(nstar_path)

    written.append(_emit_error_curves(result, os.path.join(out_dir, "error_curves.svg")))
    written.append(_emit_allocation_fit(result, os.path.join(out_dir, "allocation_fit.svg")))

    errors = [(c.m, c.n, c.error) for c in result.cells if not c.ok]
    if errors:
        err_path = os.path.join(out_dir, "errors.csv")
        _write_csv(err_path, ("m", "n", "error"), errors)
        written.append(err_path)
    return written


def _emit_error_curves(result: SweepResult, path) -> str:
    cfg = result.config
    ys_all = [c.mean_w for c in result.cells if c.ok]
    log_y = bool(ys_all) and min(ys_all) > 0.0
    chart = LineChart(
        title="Mean error vs cells per budget",
        x_label="cells n",
        y_label="mean W",
        width=cfg.svg_width,
        height=cfg.svg_height,
        log_x=True,
        log_y=log_y,
    )
    for m in cfg.m_grid:
        row = [c for c in result.cells if c.m == m and c.ok]
        if not row:
            continue
        chart.add(Series(x=[c.n for c in row], y=[c.mean_w for c in row], label=f"m={m}"))
    write_chart(chart, path)
    return str(path)


def _emit_allocation_fit(result: SweepResult, path) -> str:
    cfg = result.config
    chart = LineChart(
        title="Optimal cell count vs read budget",
        x_label="reads m",
        y_label="optimal n",
        width=cfg.svg_width,
        height=cfg.svg_height,
        log_x=True,
        log_y=True,
    )
    ms = sorted(result.n_star)
    if ms:
        chart.add(
            Series(x=ms, y=[result.n_star[m].n for m in ms], label="measured n*")
        )
    if result.theory_curve:
        tm = sorted(result.theory_curve)
        chart.add(
            Series(
                x=tm,
                y=[result.theory_curve[m] for m in tm],
                label="theory",
                dashed=True,
                markers=False,
            )
        )
    try:
        slope, intercept, _ = fit_slope(result.n_star)
    except InsufficientDataError:
        slope = None
    if slope is not None and ms:
        fit_y = [math.exp(intercept) * m**slope for m in ms]
        chart.add(
            Series(
                x=ms,
                y=fit_y,
                label=f"fit slope {slope:.3f}",
                dashed=True,
                markers=False,
            )
        )
    write_chart(chart, path)
    return str(path)


def read_results_csv(path) -> list:
    """Trial records back from a results CSV (exact float round-trip)."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULTS_COLUMNS:
            raise ValueError(f"unexpected results header: {header}")
        for row in reader:
            out.append(
                TrialRecord(
                    m=int(row[0]),
                    n=int(row[1]),
                    trial=int(row[2]),
                    w_noisy_vs_mu=float(row[3]),
                    w_noisy_vs_mun=float(row[4]),
                    w_mun_vs_mu=float(row[5]),
                )
            )
    return out


def read_summary_csv(path) -> list:
    """(m, n, mean_W, std_W) tuples back from a summary CSV."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SUMMARY_COLUMNS:
            raise ValueError(f"unexpected summary header: {header}")
        for row in reader:
            out.append((int(row[0]), int(row[1]), float(row[2]), float(row[3])))
    return out
