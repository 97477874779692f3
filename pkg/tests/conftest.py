"""Shared fixtures: small deterministic populations and profile factories."""

import numpy as np
import pytest

from seqdepth.simplex import DiscreteDistribution, ExpressionProfile


def dirichlet_profiles(rng, count, dim, alpha=1.0):
    """Dense Dirichlet draws as profiles; strictly positive coordinates."""
    draws = rng.dirichlet(np.full(dim, alpha), size=count)
    return [ExpressionProfile.from_dense(row) for row in draws]


def sparse_profiles(rng, count, dim, support):
    """Profiles supported on `support` random coordinates each."""
    out = []
    for _ in range(count):
        idx = rng.choice(dim, size=support, replace=False)
        vals = rng.dirichlet(np.ones(support))
        out.append(ExpressionProfile(np.sort(idx), vals[np.argsort(idx)], dim))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def two_point_population():
    """Uniform mixture of the two vertices of the 1-simplex."""
    e1 = ExpressionProfile.from_dense([1.0, 0.0])
    e2 = ExpressionProfile.from_dense([0.0, 1.0])
    return DiscreteDistribution([e1, e2], None)


@pytest.fixture
def small_population():
    """Five 6-gene profiles with uniform weights, fixed seed."""
    gen = np.random.default_rng(99)
    return DiscreteDistribution(dirichlet_profiles(gen, 5, 6), None)
