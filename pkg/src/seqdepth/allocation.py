"""Closed-form error bounds and the depth-versus-cells trade-off.

All quantities are driven by two population summaries (mean support size
E||P||_0 and mean squared l2 norm E||P||_2^2), the weight floor c_*, and the
intrinsic dimension k of the population.  Each formula drops asymptotic
remainder terms; ASYMPTOTIC_NOTES records which ones, keyed by function
name.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .simplex import DiscreteDistribution, population_stats

DEFAULT_ALLOCATION_CONST = 0.5

ASYMPTOTIC_NOTES = {
    "expected_error_upper": "omits an o_n(1) additive term",
    "min_reads": "finite-n bound; no terms omitted",
    "expected_error_lower": "omits the -c*n^(-1/k) empirical-vs-population correction",
    "full_lower_bound": "exact as stated; constant c in the n^(-1/k) term is not pinned",
    "optimal_cells": "balances the two rate terms up to constants",
    "rate_upper": "rate only; multiplicative constants dropped",
}


@dataclass(frozen=True)
class AllocationParams:
    """Population summaries the closed-form bounds consume.

    mean_l0: E||P||_0 >= 1.  mean_sq_l2: E||P||_2^2 in (0, 1].
    c_star: weight floor min_i n*u_i, in (0, 1].  k: intrinsic dimension, > 4.
    alpha: slack exponent in (0, 1).  p: transport order in [1, 2].
    """

    mean_l0: float
    mean_sq_l2: float
    c_star: float = 1.0
    k: float = 5.0
    alpha: float = 0.5
    p: float = 1.0

    def __post_init__(self):
        if self.mean_l0 < 1.0:
            raise ValueError(f"mean_l0 must be at least 1, got {self.mean_l0}")
        if not 0.0 < self.mean_sq_l2 <= 1.0:
            raise ValueError(f"mean_sq_l2 must lie in (0, 1], got {self.mean_sq_l2}")
        if not 0.0 < self.c_star <= 1.0:
            raise ValueError(f"c_star must lie in (0, 1], got {self.c_star}")
        if self.k <= 4.0:
            raise ValueError(f"intrinsic dimension k must exceed 4, got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"p must lie in [1, 2], got {self.p}")

    @classmethod
    def from_population(
        cls,
        mu: DiscreteDistribution,
        k: float,
        c_star: float = 1.0,
        alpha: float = 0.5,
        p: float = 1.0,
    ) -> "AllocationParams":
        stats = population_stats(mu)
        return cls(
            mean_l0=stats.mean_l0,
            mean_sq_l2=stats.mean_sq_l2,
            c_star=c_star,
            k=k,
            alpha=alpha,
            p=p,
        )


def _check_counts(n: int, m: int):
    if n < 1:
        raise ValueError(f"cell count must be at least 1, got n={n}")
    if m < 1:
        raise ValueError(f"read budget must be at least 1, got m={m}")


def expected_error_upper(n: int, m: int, params: AllocationParams) -> float:
    """Upper bound on E W_p(noisy empirical, sampled empirical):
    sqrt(8 * E||P||_0 * n / (c_* * m))."""
    _check_counts(n, m)
    return math.sqrt(8.0 * params.mean_l0 * n / (params.c_star * m))


def min_reads(n: int, eps: float, params: AllocationParams) -> float:
    """Smallest read budget guaranteeing E W_p <= eps (up to the stated slack).

    8(1+alpha) n E||P||_0 / c_* * (1/eps^2 - eps^(p-2) * sqrt(alpha log n / n)).
    """
    if n < 1:
        raise ValueError(f"cell count must be at least 1, got n={n}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    lead = 8.0 * (1.0 + params.alpha) * n * params.mean_l0 / params.c_star
    correction = eps ** (params.p - 2.0) * math.sqrt(params.alpha * math.log(n) / n)
    return lead * (1.0 / eps**2 - correction)


def lower_bound_valid(n: int, m: int, params: AllocationParams) -> bool:
    """Validity region of the lower bound: E||P||_2^2 < 1 and
    m >= 2 n log(4 / (1 - E||P||_2^2))."""
    _check_counts(n, m)
    if params.mean_sq_l2 >= 1.0:
        return False
    return m >= 2.0 * n * math.log(4.0 / (1.0 - params.mean_sq_l2))


def expected_error_lower(n: int, m: int, params: AllocationParams) -> float:
    """Lower bound on E W_p^p against the sampled empirical:
    (1 - E||P||_2^2) / 4 * n / m inside its validity region."""
    _check_counts(n, m)
    if not lower_bound_valid(n, m, params):
        warnings.warn(
            "lower bound evaluated outside its validity region "
            f"(n={n}, m={m}); value is not a guarantee",
            stacklevel=2,
        )
    return (1.0 - params.mean_sq_l2) / 4.0 * n / m


def full_lower_bound(
    n: int, m: int, params: AllocationParams, const_c: float = 1.0
) -> float:
    """Lower bound against the full population:
    ((1 - E||P||_2^2)/4 * n/m - const_c * n^(-1/k))_+ ."""
    _check_counts(n, m)
    value = (1.0 - params.mean_sq_l2) / 4.0 * n / m - const_c * n ** (-1.0 / params.k)
    return max(0.0, value)


def reads_floor(params: AllocationParams) -> float:
    """Smallest budget m0 the guarantees need: c_* m > 8 (1+alpha) E||P||_0."""
    return 8.0 * (1.0 + params.alpha) * params.mean_l0 / params.c_star


def optimal_cells(
    m: int,
    params: AllocationParams,
    const: float = DEFAULT_ALLOCATION_CONST,
) -> float:
    """Cell count balancing sequencing noise against sampling error:
    n = (const * m / E||P||_0)^(1 - 2/(k+2))."""
    if m < 1:
        raise ValueError(f"read budget must be at least 1, got m={m}")
    if m <= reads_floor(params):
        warnings.warn(
            f"read budget m={m} is below the floor m0={reads_floor(params):.3g}; "
            "the optimal-allocation formula is extrapolating",
            stacklevel=2,
        )
    exponent = 1.0 - 2.0 / (params.k + 2.0)
    return (const * m / params.mean_l0) ** exponent


def rate_upper(m: int, params: AllocationParams) -> float:
    """Error rate at the optimal allocation: (E||P||_0 / m)^(1/(k+2))."""
    if m < 1:
        raise ValueError(f"read budget must be at least 1, got m={m}")
    return (params.mean_l0 / m) ** (1.0 / (params.k + 2.0))


def theory_curve(
    m_grid,
    params: AllocationParams,
    const: float = DEFAULT_ALLOCATION_CONST,
) -> list[dict]:
    """Rows (m, n_opt, upper_rate, lower_bound) for each budget in the grid."""
    rows = []
    for m in m_grid:
        n_opt = optimal_cells(int(m), params, const=const)
        n_int = max(1, int(round(n_opt)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lower = expected_error_lower(n_int, int(m), params)
        rows.append(
            {
                "m": int(m),
                "n_opt": n_opt,
                "upper_rate": rate_upper(int(m), params),
                "lower_bound": lower,
            }
        )
    return rows
