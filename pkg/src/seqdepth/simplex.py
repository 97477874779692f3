"""Sparse points on the probability simplex and finitely supported distributions.

An expression profile is a point of the (d-1)-simplex stored sparsely as
(index, value) pairs; a population is a finitely supported distribution over
such profiles.  Both types are immutable: arrays are locked after validation
so instances can be shared freely between trials and processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ZeroRowError

# Normalization drift tolerated on stored values (checked after defensive
# re-normalization) and on distribution weights.
PROFILE_SUM_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ExpressionProfile:
    """A sparse probability vector over ``dim`` genes.

    Parameters
    ----------
    indices : array of int
        Gene indices with nonzero mass, any order, no duplicates.
    values : array of float
        Strictly positive masses; normalized to sum to 1 on construction.
    dim : int
        Ambient dimension d.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int
    _dense_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if indices.shape != values.shape:
            raise ValueError("indices and values must have equal length")
        if indices.size and (indices.min() < 0 or indices.max() >= self.dim):
            raise ValueError("indices out of range for ambient dimension")
        if np.any(values < 0):
            raise ValueError("profile entries must be nonnegative")
        # stored support is exactly the l0 support: drop explicit zeros
        keep = values > 0
        indices, values = indices[keep], values[keep]
        order = np.argsort(indices)
        indices, values = indices[order], values[order]
        if indices.size and np.any(np.diff(indices) == 0):
            raise ValueError("duplicate indices in sparse profile")
        total = float(values.sum())
        if total <= 0.0:
            raise ZeroRowError("profile has zero total mass")
        # already-normalized input is kept bit-for-bit (idempotent construction)
        if abs(total - 1.0) > PROFILE_SUM_TOL:
            values = values / total
        if abs(float(values.sum()) - 1.0) > PROFILE_SUM_TOL:
            raise ZeroRowError("profile could not be normalized")
        indices.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dense(cls, vec) -> "ExpressionProfile":
        vec = np.asarray(vec, dtype=np.float64).ravel()
        idx = np.flatnonzero(vec)
        return cls(idx, vec[idx], vec.size)

    @classmethod
    def uniform(cls, dim: int) -> "ExpressionProfile":
        return cls(np.arange(dim), np.full(dim, 1.0 / dim), dim)

    @property
    def l0(self) -> int:
        """Support size; equals the number of stored entries by construction."""
        return int(self.indices.size)

    @property
    def l2_sq(self) -> float:
        return float(self.values @ self.values)

    def dense(self) -> np.ndarray:
        """Dense read-only view, built once and cached."""
        if not self._dense_cache:
            out = np.zeros(self.dim)
            out[self.indices] = self.values
            out.setflags(write=False)
            self._dense_cache.append(out)
        return self._dense_cache[0]


def normalize_counts_row(counts) -> ExpressionProfile:
    """Profile from one row of raw counts: entry / row total."""
    return ExpressionProfile.from_dense(np.asarray(counts, dtype=np.float64))


def l0_norm(p: ExpressionProfile) -> int:
    """Support size of a profile."""
    return p.l0


def lq_distance(a: ExpressionProfile, b: ExpressionProfile, q: float) -> float:
    """l_q distance between two profiles; ``q`` in [1, inf]."""
    if a.dim != b.dim:
        raise DimensionMismatchError(
            f"profiles live in different ambient dimensions ({a.dim} vs {b.dim})"
        )
    if q < 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    diff = np.abs(a.dense() - b.dense())
    if math.isinf(q):
        return float(diff.max(initial=0.0))
    if q == 1.0:
        return float(diff.sum())
    if q == 2.0:
        return float(np.sqrt(diff @ diff))
    return float(np.power(diff, q).sum() ** (1.0 / q))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported distribution over expression profiles.

    ``weights`` is normalized on construction; pass ``weights=None`` for the
    uniform distribution (the ``uniform`` flag records that choice).
    """

    atoms: tuple
    weights: np.ndarray
    uniform: bool

    def __init__(self, atoms, weights=None):
        atoms = tuple(atoms)
        if not atoms:
            raise ValueError("a distribution needs at least one atom")
        dim = atoms[0].dim
        for p in atoms:
            if p.dim != dim:
                raise DimensionMismatchError("atoms disagree on ambient dimension")
        uniform = weights is None
        if uniform:
            w = np.full(len(atoms), 1.0 / len(atoms))
        else:
            w = np.asarray(weights, dtype=np.float64).ravel()
            if w.size != len(atoms):
                raise ValueError("weights length does not match atom count")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            total = float(w.sum())
            if total <= 0.0:
                raise ZeroRowError("weights have zero total mass")
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                w = w / total
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ZeroRowError("weights could not be normalized")
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "uniform", uniform)

    @classmethod
    def point_mass(cls, atom: ExpressionProfile) -> "DiscreteDistribution":
        return cls((atom,), None)

    @classmethod
    def empirical(cls, atoms, collapse_identical: bool = False) -> "DiscreteDistribution":
        """Uniform empirical distribution over ``atoms``.

        With ``collapse_identical`` repeated references to the same profile
        object are merged into one atom carrying the summed weight; the
        represented measure is unchanged.
        """
        atoms = list(atoms)
        if not collapse_identical:
            return cls(atoms, None)
        counts: dict[int, int] = {}
        first: dict[int, ExpressionProfile] = {}
        for p in atoms:
            key = id(p)
            counts[key] = counts.get(key, 0) + 1
            first.setdefault(key, p)
        merged = [first[k] for k in counts]
        w = np.array([counts[k] for k in counts], dtype=np.float64)
        return cls(merged, w / len(atoms))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms[0].dim

    def dense_matrix(self) -> np.ndarray:
        """Atoms stacked as a dense (n_atoms, dim) array."""
        return np.stack([p.dense() for p in self.atoms])


@dataclass(frozen=True)
class PopulationStats:
    atom_count: int
    ambient_dim: int
    mean_l0: float
    mean_sq_l2: float


def population_stats(mu: DiscreteDistribution) -> PopulationStats:
    """Weight-averaged support size and squared l2 norm of the atoms."""
    l0 = np.array([p.l0 for p in mu.atoms], dtype=np.float64)
    l2 = np.array([p.l2_sq for p in mu.atoms])
    return PopulationStats(
        atom_count=mu.n_atoms,
        ambient_dim=mu.dim,
        mean_l0=float(mu.weights @ l0),
        mean_sq_l2=float(mu.weights @ l2),
    )
