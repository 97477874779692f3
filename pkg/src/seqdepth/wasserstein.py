"""Exact Wasserstein distances between finitely supported distributions.

The solver runs on an integer grid: atom weights are scaled to SUPPLY_GRID
with largest-remainder rounding and costs to COST_GRID, so the network
simplex pivots in exact integer arithmetic and terminates.  The returned
value, plan and dual potentials are then re-derived in floating point from
the optimal basis; when the float refit of the flows is degenerate the plan
falls back to the integer flows (marginals then sit on the supply grid,
still within MARGINAL_TOL of the inputs).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from ._netsimplex import _tree_flows, _tree_potentials, solve_transport
from .errors import (
    DimensionMismatchError,
    MassMismatchError,
    SizeLimitError,
    TooLargeError,
)
from .simplex import DiscreteDistribution, lq_distance

DEFAULT_Q = 2.0
MASS_TOL = 1e-6
MARGINAL_TOL = 1e-9
GAP_TOL = 1e-7
MAX_DENSE_ENTRIES = 10_000_000
SUPPLY_GRID = 10**9
COST_GRID = 2**42
ORACLE_MAX_ATOMS = 8
_REFIT_TOL = 1e-10
_GEMM_MIN_WORK = 2 * 10**7


def _check_orders(p: float, q: float):
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"transport order p must be in [1, 2], got {p}")
    if q < 1.0:
        raise ValueError(f"ground metric order q must be >= 1, got {q}")


def _cost_from_matrices(A: np.ndarray, B: np.ndarray, q: float, p: float) -> np.ndarray:
    """Pairwise l_q distances raised to the p-th power, shape (n_a, n_b)."""
    if math.isinf(q):
        D = cdist(A, B, "chebyshev")
    elif q == 1.0:
        D = cdist(A, B, "cityblock")
    elif q == 2.0:
        if A.shape[0] * B.shape[0] * A.shape[1] > _GEMM_MIN_WORK:
            # BLAS route; clamp the tiny negatives cancellation produces
            sqa = np.einsum("ij,ij->i", A, A)
            sqb = np.einsum("ij,ij->i", B, B)
            D2 = sqa[:, None] + sqb[None, :] - 2.0 * (A @ B.T)
            np.maximum(D2, 0.0, out=D2)
            if p == 2.0:
                return D2
            D = np.sqrt(D2, out=D2)
        else:
            D = cdist(A, B, "euclidean")
    else:
        D = cdist(A, B, "minkowski", p=q)
    if p == 1.0:
        return D
    if p == 2.0:
        return np.multiply(D, D, out=D)
    return np.power(D, p, out=D)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise ground costs lq(a_i, b_j)^p with the orders that built them."""

    entries: np.ndarray
    p: float
    q: float

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("cost entries must form a 2-d array")
        if np.any(entries < 0.0):
            raise ValueError("cost entries must be nonnegative")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def cost_matrix(
    mu_a: DiscreteDistribution,
    mu_b: DiscreteDistribution,
    p: float = 1.0,
    q: float = DEFAULT_Q,
    *,
    max_entries: int = MAX_DENSE_ENTRIES,
) -> CostMatrix:
    """Ground cost c[i, j] = lq(a_i, b_j)^p between all atom pairs."""
    _check_orders(p, q)
    if mu_a.dim != mu_b.dim:
        raise DimensionMismatchError(
            f"distributions live in different ambient dimensions ({mu_a.dim} vs {mu_b.dim})"
        )
    if mu_a.n_atoms * mu_b.n_atoms > max_entries:
        raise SizeLimitError(
            f"dense cost matrix would hold {mu_a.n_atoms * mu_b.n_atoms} entries "
            f"(limit {max_entries})"
        )
    entries = _cost_from_matrices(mu_a.dense_matrix(), mu_b.dense_matrix(), q, p)
    return CostMatrix(entries=entries, p=p, q=q)


def _integer_supplies(w: np.ndarray, grid: int) -> np.ndarray:
    """Largest-remainder rounding of nonnegative weights summing ~1 onto the
    integer grid; the result sums to ``grid`` exactly and each entry is less
    than one grid unit away from ``w * grid``."""
    scaled = w * grid
    base = np.floor(scaled).astype(np.int64)
    short = grid - int(base.sum())
    if short > 0:
        rem = scaled - base
        order = np.argsort(-rem, kind="stable")
        base[order[:short]] += 1
    return base


@dataclass(frozen=True)
class TransportPlan:
    """Optimal coupling between the atoms of two distributions.

    ``value`` is the optimal total cost sum(mass * lq^p), i.e. W_p^p.  The
    dual certificate compares that primal value against the dual objective of
    the potentials under the plan's own marginals (which sit within
    MARGINAL_TOL of the requested weights).
    """

    source_idx: np.ndarray
    target_idx: np.ndarray
    mass: np.ndarray
    value: float
    p: float
    q: float
    n_source: int
    n_target: int
    potentials_source: np.ndarray
    potentials_target: np.ndarray
    gap: float
    integer_fallback: bool

    @property
    def coupling(self) -> sp.coo_matrix:
        """The plan as a sparse n_source x n_target matrix."""
        return sp.coo_matrix(
            (self.mass, (self.source_idx, self.target_idx)),
            shape=(self.n_source, self.n_target),
        )

    def marginal_source(self) -> np.ndarray:
        return np.bincount(self.source_idx, weights=self.mass, minlength=self.n_source)

    def marginal_target(self) -> np.ndarray:
        return np.bincount(self.target_idx, weights=self.mass, minlength=self.n_target)

    def duality_gap(self) -> float:
        return self.gap


def emd(
    weights_a,
    weights_b,
    cost: CostMatrix,
    max_entries: int = MAX_DENSE_ENTRIES,
) -> tuple[float, TransportPlan]:
    """Exact optimal transport between weight vectors under a ground cost.

    Returns the optimal cost (sum of mass times cost entry) together with
    the plan that attains it.
    """
    wa = np.asarray(weights_a, dtype=np.float64).ravel()
    wb = np.asarray(weights_b, dtype=np.float64).ravel()
    if wa.size != cost.shape[0] or wb.size != cost.shape[1]:
        raise DimensionMismatchError(
            f"weights of sizes {wa.size} and {wb.size} do not match the "
            f"{cost.shape[0]} x {cost.shape[1]} cost matrix"
        )
    if np.any(wa < 0.0) or np.any(wb < 0.0):
        raise ValueError("weights must be nonnegative")
    if abs(float(wa.sum()) - float(wb.sum())) > MASS_TOL:
        raise MassMismatchError(
            f"weight sums differ by more than {MASS_TOL:g}: "
            f"{float(wa.sum())!r} vs {float(wb.sum())!r}"
        )
    if float(wa.sum()) <= 0.0:
        raise ValueError("weights must carry positive total mass")
    # zero-weight atoms carry no mass and are dropped before the solve
    ka = np.flatnonzero(wa > 0)
    kb = np.flatnonzero(wb > 0)
    n_a, n_b = ka.size, kb.size
    if n_a * n_b > max_entries:
        raise SizeLimitError(
            f"dense cost matrix would hold {n_a * n_b} entries (limit {max_entries})"
        )
    C = cost.entries[np.ix_(ka, kb)]

    wa_n = wa[ka] / float(wa[ka].sum())
    wb_n = wb[kb] / float(wb[kb].sum())
    sup = _integer_supplies(wa_n, SUPPLY_GRID)
    dem = _integer_supplies(wb_n, SUPPLY_GRID)

    max_c = float(C.max(initial=0.0))
    if max_c > 0.0:
        scale = COST_GRID / max_c
        c_int = np.rint(C * scale).astype(np.int64)
    else:
        scale = 1.0
        c_int = np.zeros_like(C, dtype=np.int64)

    res = solve_transport(c_int, sup, dem)
    del c_int
    parent, edge = res["parent"], res["edge"]
    S, T = res["S"], res["T"]
    n_nodes, n_real = res["n_nodes"], res["n_real"]

    # float refit of the flows on the optimal basis against the true weights;
    # falls back to the integer plan when the refit is degenerate
    d_float = np.concatenate([-wa_n, wb_n])
    flow, imbalance = _tree_flows(parent, edge, S, T, n_nodes, n_real, d_float)
    tree_arcs = edge[:n_nodes]
    real_tree = tree_arcs[tree_arcs < n_real]
    fallback = abs(imbalance) > _REFIT_TOL or (
        real_tree.size > 0 and float(flow[real_tree].min(initial=0.0)) < -_REFIT_TOL
    )
    if fallback:
        flow_real = res["x"][real_tree] / float(SUPPLY_GRID)
    else:
        flow_real = np.maximum(flow[real_tree], 0.0)

    cost_flat = C.ravel()
    arc_cost = cost_flat[real_tree]
    value = float(arc_cost @ flow_real)
    if value < 0.0:
        value = 0.0

    # dual potentials from the basis tree (artificial arcs keep their big-M
    # float cost so potentials stay consistent with the solved basis)
    m_float = res["faux_inf"] / scale
    arc_cost_full = np.concatenate([cost_flat, np.full(n_nodes, m_float)])
    y = _tree_potentials(parent, edge, S, T, n_nodes, arc_cost_full)
    y_a = y[:n_a]
    y_b = y[n_a:n_nodes]

    # certificate: dual objective under the plan's own marginals, plus a
    # feasibility repair term for the worst reduced-cost violation
    keep = flow_real > 0.0
    rows = S[real_tree[keep]]
    cols = T[real_tree[keep]] - n_a
    mass = flow_real[keep]
    marg_a = np.bincount(rows, weights=mass, minlength=n_a)
    marg_b = np.bincount(cols, weights=mass, minlength=n_b)
    dual = float(marg_b @ y_b) - float(marg_a @ y_a)
    R = C
    R += y_a[:, None]
    R -= y_b[None, :]
    r_min = float(R.min(initial=0.0))
    violation = max(0.0, -r_min)
    gap = max(0.0, value - dual + violation * float(mass.sum()))

    pot_a = np.zeros(wa.size)
    pot_b = np.zeros(wb.size)
    pot_a[ka] = y_a
    pot_b[kb] = y_b
    plan = TransportPlan(
        source_idx=ka[rows],
        target_idx=kb[cols],
        mass=mass,
        value=value,
        p=cost.p,
        q=cost.q,
        n_source=wa.size,
        n_target=wb.size,
        potentials_source=pot_a,
        potentials_target=pot_b,
        gap=gap,
        integer_fallback=bool(fallback),
    )
    return value, plan


def transport_plan(
    mu_a: DiscreteDistribution,
    mu_b: DiscreteDistribution,
    p: float = 1.0,
    q: float = DEFAULT_Q,
    max_entries: int = MAX_DENSE_ENTRIES,
) -> TransportPlan:
    """Optimal plan between two distributions (cost built internally)."""
    cm = cost_matrix(mu_a, mu_b, p, q, max_entries=max_entries)
    _, plan = emd(mu_a.weights, mu_b.weights, cm, max_entries=max_entries)
    return plan


def wasserstein_p(
    mu_a: DiscreteDistribution,
    mu_b: DiscreteDistribution,
    p: float = 1.0,
    q: float = DEFAULT_Q,
    max_entries: int = MAX_DENSE_ENTRIES,
) -> float:
    """W_p distance with l_q ground metric: emd value to the 1/p power."""
    cm = cost_matrix(mu_a, mu_b, p, q, max_entries=max_entries)
    value, _ = emd(mu_a.weights, mu_b.weights, cm, max_entries=max_entries)
    if p == 1.0:
        return value
    return value ** (1.0 / p)


def assignment_oracle(
    atoms_a,
    atoms_b,
    p: float = 1.0,
    q: float = DEFAULT_Q,
) -> float:
    """Brute-force W_p between uniform distributions on two atom lists.

    For uniform weights over k atoms on both sides the optimal coupling can
    be taken as a permutation matrix (the transport polytope's vertices are
    the permutations, and a linear objective attains its minimum at one), so
    the distance is the best of the k! assignments.  Deliberately independent
    of the simplex solver: distances come straight from the atoms.
    """
    _check_orders(p, q)
    atoms_a = list(atoms_a)
    atoms_b = list(atoms_b)
    k = len(atoms_a)
    if len(atoms_b) != k or k == 0:
        raise ValueError("assignment oracle needs equally many atoms on both sides")
    if k > ORACLE_MAX_ATOMS:
        raise TooLargeError(
            f"assignment oracle enumerates at most {ORACLE_MAX_ATOMS} atoms, got {k}"
        )
    D = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            D[i, j] = lq_distance(atoms_a[i], atoms_b[j], q) ** p
    best = math.inf
    for perm in itertools.permutations(range(k)):
        total = 0.0
        for i, j in enumerate(perm):
            total += D[i, j]
        if total < best:
            best = total
    value = best / k
    if p == 1.0:
        return value
    return value ** (1.0 / p)
