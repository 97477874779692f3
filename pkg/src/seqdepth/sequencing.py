"""Two-stage sequencing simulator.

Cells are drawn from a population, a read budget m is split across cells by
a multinomial on the cell weights, and each cell's reads are a multinomial
on its expression profile.  Splitting the budget first and then sampling
within each cell is distributionally identical to assigning reads one at a
time (multinomial splitting); the one-read-at-a-time loop is kept as a
reference implementation for the equivalence tests.

Randomness contract: a trial stream is derived as
SeedSequence([master_seed, m, n, trial]) feeding a Philox generator, and
each cell gets its own substream via Generator.spawn, so results do not
depend on evaluation order and trials can run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidTrialsError,
    ScenarioMismatchError,
    UnseenCellError,
)
from .simplex import DiscreteDistribution, ExpressionProfile

SCENARIOS = ("uniform", "coupled", "independent")
UNSEEN_POLICIES = ("uniform", "first-atom", "reject")


def trial_rng(master_seed: int, m: int, n: int, trial: int) -> np.random.Generator:
    """Independent generator for one (m, n, trial) grid point."""
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    ss = np.random.SeedSequence([master_seed, m, n, trial])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class WeightModel:
    """How cell weights relate to the drawn profiles.

    uniform: every cell weighs the same (u_i = 1/n, so n * u_i = 1 exactly).
    coupled: the drawn atom brings its own frequency (frequencies[i] is
        paired with atom i of the population).
    independent: each cell gets a frequency drawn uniformly from the list,
        independent of the atom.
    """

    variant: str
    frequencies: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.variant!r}; expected one of {SCENARIOS}")
        if self.variant == "uniform":
            if self.frequencies is not None:
                raise ValueError("uniform scenario takes no frequency list")
            return
        freq = np.asarray(self.frequencies, dtype=np.float64).ravel()
        if freq.size == 0 or np.any(freq <= 0):
            raise ValueError("frequencies must be a nonempty list of positive values")
        freq.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)

    def check_against(self, mu: DiscreteDistribution):
        if self.variant != "uniform" and self.frequencies.size != mu.n_atoms:
            raise ScenarioMismatchError(
                f"{self.frequencies.size} frequencies for {mu.n_atoms} population atoms"
            )


def sample_cells(
    mu: DiscreteDistribution,
    n: int,
    scenario: WeightModel,
    rng: np.random.Generator,
) -> tuple[list, np.ndarray]:
    """Draw n cells iid from mu together with their raw (unnormalized) weights.

    Cells are references to the population atoms, so repeats can be collapsed
    by identity downstream.
    """
    if n < 1:
        raise InvalidTrialsError(f"need at least one cell, got n={n}")
    scenario.check_against(mu)
    idx = rng.choice(mu.n_atoms, size=n, p=mu.weights)
    cells = [mu.atoms[i] for i in idx]
    if scenario.variant == "uniform":
        raw = np.ones(n)
    elif scenario.variant == "coupled":
        raw = scenario.frequencies[idx]
    else:
        u_idx = rng.integers(0, scenario.frequencies.size, size=n)
        raw = scenario.frequencies[u_idx]
    return cells, raw


@dataclass(frozen=True)
class ReadAllocation:
    """How a read budget was split across cells."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or np.any(counts < 0):
            raise ValueError("read counts must be a vector of nonnegative integers")
        if int(counts.sum()) != self.total:
            raise ValueError(
                f"allocation sums to {int(counts.sum())}, expected total {self.total}"
            )
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def allocate_reads(u, m: int, rng: np.random.Generator) -> ReadAllocation:
    """Split m reads across cells: multinomial on the normalized weights."""
    if m < 0:
        raise InvalidTrialsError(f"read budget must be nonnegative, got m={m}")
    raw = np.asarray(u, dtype=np.float64)
    if raw.size == 0 or np.any(raw <= 0):
        raise ValueError("cell weights must be positive")
    return ReadAllocation(rng.multinomial(m, raw / raw.sum()), m)


def multinomial_estimate(
    reads: int, profile: ExpressionProfile, rng: np.random.Generator
) -> ExpressionProfile:
    """Empirical profile from ``reads`` draws of the true profile."""
    if reads < 1:
        raise InvalidTrialsError("multinomial estimate needs at least one read")
    counts = rng.multinomial(reads, profile.values)
    return ExpressionProfile(profile.indices, counts / reads, profile.dim)


@dataclass(frozen=True)
class SequencingRun:
    """One pass of the shallow sequencer over a list of sampled cells."""

    sampled_cells: tuple
    u: np.ndarray
    allocation: ReadAllocation
    noisy_profiles: tuple
    unseen_policy: str
    effective_c_star: float

    @property
    def m(self) -> int:
        return self.allocation.total

    @property
    def n_cells(self) -> int:
        return len(self.sampled_cells)

    @property
    def seen_mask(self) -> np.ndarray:
        return self.allocation.counts > 0

    @property
    def unseen_count(self) -> int:
        return int(np.count_nonzero(self.allocation.counts == 0))


def _normalized_weights(cells, raw_weights) -> tuple[np.ndarray, float]:
    raw = np.asarray(raw_weights, dtype=np.float64)
    if raw.size != len(cells):
        raise ValueError("one weight per cell required")
    if np.any(raw <= 0):
        raise ValueError("cell weights must be positive")
    # c_star from the raw weights so uniform lists give exactly 1.0
    c_star = float(len(raw) * raw.min() / raw.sum())
    u = raw / raw.sum()
    u.setflags(write=False)
    return u, c_star


def _fill_unseen(cells, unseen_policy: str):
    if unseen_policy == "uniform":
        return ExpressionProfile.uniform(cells[0].dim)
    return cells[0]


def shallow_sequence(
    cells,
    raw_weights,
    m: int,
    unseen_policy: str = "uniform",
    rng: np.random.Generator | None = None,
) -> SequencingRun:
    """Sequence m reads over the sampled cells (budget split first).

    Cells that receive zero reads have no empirical profile; the policy fills
    in a fixed placeholder: "uniform" uses the flat profile, "first-atom"
    reuses the first sampled cell's true profile, "reject" raises.  m = 0 is
    allowed and leaves every cell unseen.
    """
    if rng is None:
        raise ValueError("an rng is required")
    cells = tuple(cells)
    if not cells:
        raise InvalidTrialsError("need at least one cell")
    if unseen_policy not in UNSEEN_POLICIES:
        raise ValueError(
            f"unknown unseen policy {unseen_policy!r}; expected one of {UNSEEN_POLICIES}"
        )
    u, c_star = _normalized_weights(cells, raw_weights)
    allocation = allocate_reads(u, m, rng)
    streams = rng.spawn(len(cells))
    placeholder = None
    profiles = []
    for i, cell in enumerate(cells):
        t_i = int(allocation.counts[i])
        if t_i > 0:
            profiles.append(multinomial_estimate(t_i, cell, streams[i]))
            continue
        if unseen_policy == "reject":
            raise UnseenCellError(f"cell {i} received zero reads")
        if placeholder is None:
            placeholder = _fill_unseen(cells, unseen_policy)
        profiles.append(placeholder)
    return SequencingRun(
        sampled_cells=cells,
        u=u,
        allocation=allocation,
        noisy_profiles=tuple(profiles),
        unseen_policy=unseen_policy,
        effective_c_star=c_star,
    )


def shallow_sequence_reference(
    cells,
    raw_weights,
    m: int,
    unseen_policy: str = "uniform",
    rng: np.random.Generator | None = None,
) -> SequencingRun:
    """One-read-at-a-time reference sequencer (slow; for equivalence tests).

    Each read independently picks a cell by weight, then a gene from that
    cell's profile.  Distributionally identical to shallow_sequence.
    """
    if rng is None:
        raise ValueError("an rng is required")
    cells = tuple(cells)
    if not cells:
        raise InvalidTrialsError("need at least one cell")
    if m < 0:
        raise InvalidTrialsError(f"read budget must be nonnegative, got m={m}")
    if unseen_policy not in UNSEEN_POLICIES:
        raise ValueError(
            f"unknown unseen policy {unseen_policy!r}; expected one of {UNSEEN_POLICIES}"
        )
    u, c_star = _normalized_weights(cells, raw_weights)
    dim = cells[0].dim
    gene_counts = np.zeros((len(cells), dim), dtype=np.int64)
    counts = np.zeros(len(cells), dtype=np.int64)
    for _ in range(m):
        i = int(rng.choice(len(cells), p=u))
        g = int(rng.choice(cells[i].indices, p=cells[i].values))
        gene_counts[i, g] += 1
        counts[i] += 1
    placeholder = None
    profiles = []
    for i in range(len(cells)):
        if counts[i] > 0:
            profiles.append(ExpressionProfile.from_dense(gene_counts[i] / counts[i]))
            continue
        if unseen_policy == "reject":
            raise UnseenCellError(f"cell {i} received zero reads")
        if placeholder is None:
            placeholder = _fill_unseen(cells, unseen_policy)
        profiles.append(placeholder)
    return SequencingRun(
        sampled_cells=cells,
        u=u,
        allocation=ReadAllocation(counts, m),
        noisy_profiles=tuple(profiles),
        unseen_policy=unseen_policy,
        effective_c_star=c_star,
    )


def noisy_empirical(run: SequencingRun) -> DiscreteDistribution:
    """Uniform empirical distribution over the run's noisy profiles.

    Duplicate profiles stay as separate atoms (1/n weight each).
    """
    return DiscreteDistribution.empirical(run.noisy_profiles, collapse_identical=False)
