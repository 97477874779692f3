"""Intrinsic dimension and low-rank synthesis of profile populations.

The intrinsic dimension is read off the weighted PCA spectrum: the smallest
number of components whose cumulative eigenvalue mass reaches the threshold
(0.95 by default).  Low-dimensional populations are synthesized by
nonnegative matrix factorization with multiplicative updates, followed by
row rescaling back onto the simplex.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrixError
from .simplex import DiscreteDistribution, ExpressionProfile, population_stats

logger = logging.getLogger(__name__)

PCA_THRESHOLD = 0.95
# above this ambient dimension the N x N Gram matrix is cheaper than d x d
GRAM_SWITCH_DIM = 2000
_NMF_EPS = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Weighted PCA spectrum of a population."""

    eigenvalues: np.ndarray  # descending, clipped at zero
    total_variance: float
    threshold: float

    def cumulative_fraction(self) -> np.ndarray:
        if self.total_variance <= 0.0:
            return np.zeros_like(self.eigenvalues)
        return np.cumsum(self.eigenvalues) / self.total_variance


def pca_intrinsic_dim(
    mu: DiscreteDistribution, threshold: float = PCA_THRESHOLD
) -> tuple[int, Spectrum]:
    """Smallest component count reaching ``threshold`` of the variance.

    Uses the weighted covariance of the atoms; when the ambient dimension
    exceeds GRAM_SWITCH_DIM the same nonzero eigenvalues come from the
    N x N Gram matrix instead.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    X = mu.dense_matrix()
    w = mu.weights
    mean = w @ X
    Xc = X - mean
    if mu.dim <= GRAM_SWITCH_DIM:
        cov = (Xc * w[:, None]).T @ Xc
        eig = np.linalg.eigvalsh(cov)
    else:
        G = np.sqrt(w)[:, None] * Xc
        eig = np.linalg.eigvalsh(G @ G.T)
    eig = np.clip(eig[::-1], 0.0, None)
    total = float(eig.sum())
    spectrum = Spectrum(eigenvalues=eig, total_variance=total, threshold=threshold)
    if total <= 0.0:
        warnings.warn("population has zero variance; intrinsic dimension is 0", stacklevel=2)
        return 0, spectrum
    k = int(np.searchsorted(np.cumsum(eig), threshold * total) + 1)
    return k, spectrum


def spectrum_to_csv(spectrum: Spectrum, path):
    """Write (component, eigenvalue, cumulative_fraction) rows."""
    frac = spectrum.cumulative_fraction()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "eigenvalue", "cumulative_fraction"])
        for i, (ev, cf) in enumerate(zip(spectrum.eigenvalues, frac), start=1):
            writer.writerow([i, repr(float(ev)), repr(float(cf))])


@dataclass(frozen=True)
class FactorPair:
    """NMF factors with the achieved Frobenius fit."""

    W: np.ndarray
    H: np.ndarray
    relative_error: float
    objective_history: np.ndarray


def nmf(
    M: np.ndarray,
    rank: int,
    rng: np.random.Generator,
    max_iters: int = 500,
    tol: float = 1e-5,
) -> FactorPair:
    """Frobenius NMF by multiplicative updates.

    Factors start uniform on (0, 1]; the objective ||M - WH||_F is
    non-increasing under the updates (up to the division guard) and the loop
    stops when its relative decrease falls below ``tol``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("M must be a nonempty 2-d array")
    if np.any(M < 0):
        raise ValueError("M must be nonnegative")
    if rank < 1 or rank > min(M.shape):
        raise ValueError(f"rank must lie in [1, min(M.shape)], got {rank}")
    n, d = M.shape
    # 1 - U(0, 1) lands in (0, 1]: strictly positive start
    W = 1.0 - rng.random((n, rank))
    H = 1.0 - rng.random((rank, d))
    norm_m = float(np.linalg.norm(M))
    history = [float(np.linalg.norm(M - W @ H))]
    for _ in range(max_iters):
        H *= (W.T @ M) / (W.T @ W @ H + _NMF_EPS)
        W *= (M @ H.T) / (W @ (H @ H.T) + _NMF_EPS)
        obj = float(np.linalg.norm(M - W @ H))
        prev = history[-1]
        history.append(obj)
        if prev - obj <= tol * max(prev, _NMF_EPS):
            break
    rel = history[-1] / norm_m if norm_m > 0 else 0.0
    return FactorPair(
        W=W, H=H, relative_error=rel, objective_history=np.asarray(history)
    )


@dataclass(frozen=True)
class SynthesisResult:
    """A low-rank surrogate population and its summaries."""

    population: DiscreteDistribution
    intrinsic_dim: int
    relative_error: float
    mean_l0: float
    factors: FactorPair


def synthesize_low_dim(
    mu: DiscreteDistribution,
    rank: int,
    rng: np.random.Generator,
    max_iters: int = 500,
    tol: float = 1e-5,
) -> SynthesisResult:
    """Replace the atoms by their rank-``rank`` NMF reconstruction.

    Reconstructed rows are rescaled back onto the simplex; the reported
    relative error compares the rescaled rows against the originals, and the
    intrinsic dimension of the result never exceeds ``rank``.
    """
    M = mu.dense_matrix()
    factors = nmf(M, rank, rng, max_iters=max_iters, tol=tol)
    R = factors.W @ factors.H
    row_sums = R.sum(axis=1)
    keep = row_sums > 0.0
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.warning("dropping %d all-zero reconstructed rows", dropped)
        warnings.warn(f"dropping {dropped} all-zero reconstructed rows", stacklevel=2)
    if not np.any(keep):
        raise EmptyMatrixError("every reconstructed row collapsed to zero")
    R = R[keep] / row_sums[keep, None]
    rel = float(np.linalg.norm(R - M[keep]) / np.linalg.norm(M[keep]))
    atoms = [ExpressionProfile.from_dense(row) for row in R]
    weights = mu.weights[keep]
    population = DiscreteDistribution(atoms, weights / weights.sum())
    k, _ = pca_intrinsic_dim(population)
    stats = population_stats(population)
    return SynthesisResult(
        population=population,
        intrinsic_dim=k,
        relative_error=rel,
        mean_l0=stats.mean_l0,
        factors=factors,
    )
