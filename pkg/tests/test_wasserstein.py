"""Exact optimal transport: solver, oracle, plans, and certificates."""

import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from seqdepth.errors import (
    DimensionMismatchError,
    MassMismatchError,
    SizeLimitError,
    TooLargeError,
)
from seqdepth.simplex import DiscreteDistribution, ExpressionProfile, lq_distance
from seqdepth.wasserstein import (
    GAP_TOL,
    MARGINAL_TOL,
    CostMatrix,
    assignment_oracle,
    cost_matrix,
    emd,
    transport_plan,
    wasserstein_p,
)

from conftest import dirichlet_profiles, sparse_profiles


def random_uniform_pair(rng, k, d):
    a = dirichlet_profiles(rng, k, d)
    b = dirichlet_profiles(rng, k, d)
    return DiscreteDistribution(a, None), DiscreteDistribution(b, None)


class TestOracleAgreement:
    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(314)
        for trial in range(40):
            k = int(rng.integers(1, 6))
            d = int(rng.integers(2, 6))
            p = float(rng.choice([1.0, 2.0]))
            q = float(rng.choice([1.0, 2.0]))
            mu_a, mu_b = random_uniform_pair(rng, k, d)
            solver = wasserstein_p(mu_a, mu_b, p, q)
            oracle = assignment_oracle(list(mu_a.atoms), list(mu_b.atoms), p, q)
            assert solver == pytest.approx(oracle, abs=1e-9), (trial, k, d, p, q)

    def test_matches_hungarian_assignment(self):
        # independent cross-check: uniform same-size OT reduces to assignment
        rng = np.random.default_rng(1234)
        for _ in range(20):
            k = int(rng.integers(2, 12))
            d = int(rng.integers(2, 8))
            mu_a, mu_b = random_uniform_pair(rng, k, d)
            cm = cost_matrix(mu_a, mu_b, 1.0, 2.0)
            value, _ = emd(mu_a.weights, mu_b.weights, cm)
            rows, cols = linear_sum_assignment(cm.entries)
            hungarian = float(cm.entries[rows, cols].sum()) / k
            assert value == pytest.approx(hungarian, abs=1e-9)

    def test_oracle_size_cap(self):
        rng = np.random.default_rng(2)
        atoms = dirichlet_profiles(rng, 9, 3)
        with pytest.raises(TooLargeError):
            assignment_oracle(atoms, atoms, 1.0, 2.0)

    def test_oracle_needs_equal_sizes(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            assignment_oracle(dirichlet_profiles(rng, 2, 3), dirichlet_profiles(rng, 3, 3))


class TestCostMatrix:
    def test_entries_and_orders_recorded(self):
        e1 = ExpressionProfile.from_dense([1.0, 0.0])
        e2 = ExpressionProfile.from_dense([0.0, 1.0])
        mu = DiscreteDistribution([e1, e2], None)
        cm = cost_matrix(mu, mu, 2.0, 1.0)
        assert cm.p == 2.0 and cm.q == 1.0
        np.testing.assert_allclose(cm.entries, [[0.0, 4.0], [4.0, 0.0]], atol=1e-15)

    def test_matches_lq_distance(self):
        rng = np.random.default_rng(5)
        mu_a, mu_b = random_uniform_pair(rng, 3, 4)
        for p in (1.0, 2.0):
            for q in (1.0, 2.0, math.inf):
                cm = cost_matrix(mu_a, mu_b, p, q)
                for i in range(3):
                    for j in range(3):
                        want = lq_distance(mu_a.atoms[i], mu_b.atoms[j], q) ** p
                        assert cm.entries[i, j] == pytest.approx(want, abs=1e-12)

    def test_entries_bounded_by_simplex_diameter(self):
        rng = np.random.default_rng(6)
        mu_a = DiscreteDistribution(sparse_profiles(rng, 6, 15, 2), None)
        mu_b = DiscreteDistribution(sparse_profiles(rng, 6, 15, 4), None)
        for p in (1.0, 2.0):
            cm = cost_matrix(mu_a, mu_b, p, 1.0)
            assert float(cm.entries.max()) <= 2.0**p + 1e-12

    def test_dimension_mismatch(self):
        a = DiscreteDistribution([ExpressionProfile.from_dense([1.0, 0.0])], None)
        b = DiscreteDistribution([ExpressionProfile.from_dense([1.0, 0.0, 0.0])], None)
        with pytest.raises(DimensionMismatchError):
            cost_matrix(a, b)

    def test_order_validation(self):
        a = DiscreteDistribution([ExpressionProfile.from_dense([1.0, 0.0])], None)
        with pytest.raises(ValueError):
            cost_matrix(a, a, 3.0, 2.0)
        with pytest.raises(ValueError):
            cost_matrix(a, a, 1.0, 0.5)

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            CostMatrix(np.array([[-1.0]]), 1.0, 2.0)

    def test_size_guard(self):
        rng = np.random.default_rng(7)
        mu_a, mu_b = random_uniform_pair(rng, 4, 3)
        with pytest.raises(SizeLimitError):
            cost_matrix(mu_a, mu_b, 1.0, 2.0, max_entries=15)


class TestEmdPlan:
    def test_value_and_plan_consistent(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            k_a = int(rng.integers(1, 8))
            k_b = int(rng.integers(1, 8))
            mu_a = DiscreteDistribution(dirichlet_profiles(rng, k_a, 5), rng.random(k_a) + 0.05)
            mu_b = DiscreteDistribution(dirichlet_profiles(rng, k_b, 5), rng.random(k_b) + 0.05)
            cm = cost_matrix(mu_a, mu_b, 1.0, 1.0)
            value, plan = emd(mu_a.weights, mu_b.weights, cm)
            assert value >= 0.0
            assert np.all(plan.mass > 0.0)
            recomputed = float(cm.entries[plan.source_idx, plan.target_idx] @ plan.mass)
            assert value == pytest.approx(recomputed, rel=1e-12, abs=1e-15)
            np.testing.assert_allclose(plan.marginal_source(), mu_a.weights, atol=MARGINAL_TOL)
            np.testing.assert_allclose(plan.marginal_target(), mu_b.weights, atol=MARGINAL_TOL)
            assert plan.duality_gap() <= GAP_TOL

    def test_coupling_sparse_matrix(self):
        rng = np.random.default_rng(22)
        mu_a, mu_b = random_uniform_pair(rng, 4, 3)
        plan = transport_plan(mu_a, mu_b, 1.0, 2.0)
        coupling = plan.coupling
        assert coupling.shape == (4, 4)
        dense = coupling.toarray()
        assert dense.min() >= 0.0
        np.testing.assert_allclose(dense.sum(axis=1), mu_a.weights, atol=MARGINAL_TOL)
        np.testing.assert_allclose(dense.sum(axis=0), mu_b.weights, atol=MARGINAL_TOL)

    def test_zero_weight_atoms_dropped(self):
        e1 = ExpressionProfile.from_dense([1.0, 0.0])
        e2 = ExpressionProfile.from_dense([0.0, 1.0])
        mid = ExpressionProfile.from_dense([0.5, 0.5])
        mu_a = DiscreteDistribution([e1, mid], [1.0, 0.0])
        mu_b = DiscreteDistribution([e2], None)
        value = wasserstein_p(mu_a, mu_b, 1.0, 1.0)
        assert value == pytest.approx(2.0, abs=1e-9)

    def test_self_distance_zero(self):
        rng = np.random.default_rng(23)
        mu = DiscreteDistribution(dirichlet_profiles(rng, 5, 4), rng.random(5) + 0.1)
        for p in (1.0, 2.0):
            assert wasserstein_p(mu, mu, p, 2.0) == pytest.approx(0.0, abs=1e-9)

    def test_permuted_atoms_distance_zero(self):
        rng = np.random.default_rng(24)
        atoms = dirichlet_profiles(rng, 5, 4)
        w = rng.random(5) + 0.1
        w = w / w.sum()
        mu = DiscreteDistribution(atoms, w)
        perm = [3, 0, 4, 1, 2]
        nu = DiscreteDistribution([atoms[i] for i in perm], w[perm])
        assert wasserstein_p(mu, nu, 1.0, 2.0) == pytest.approx(0.0, abs=1e-9)

    def test_point_mass_closed_form(self):
        rng = np.random.default_rng(25)
        x, y, z = dirichlet_profiles(rng, 3, 6)
        dx = DiscreteDistribution.point_mass(x)
        mix = DiscreteDistribution([y, z], [0.25, 0.75])
        for q in (1.0, 2.0):
            want = 0.25 * lq_distance(x, y, q) + 0.75 * lq_distance(x, z, q)
            assert wasserstein_p(dx, mix, 1.0, q) == pytest.approx(want, abs=1e-9)

    def test_two_point_masses(self):
        rng = np.random.default_rng(26)
        x, y = dirichlet_profiles(rng, 2, 5)
        dx = DiscreteDistribution.point_mass(x)
        dy = DiscreteDistribution.point_mass(y)
        for p in (1.0, 2.0):
            for q in (1.0, 2.0):
                want = lq_distance(x, y, q)
                assert wasserstein_p(dx, dy, p, q) == pytest.approx(want, abs=1e-9)


class TestMetricProperties:
    def test_symmetry(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            mu_a, mu_b = random_uniform_pair(rng, 4, 5)
            ab = wasserstein_p(mu_a, mu_b, 1.0, 2.0)
            ba = wasserstein_p(mu_b, mu_a, 1.0, 2.0)
            assert ab == pytest.approx(ba, abs=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(32)
        for _ in range(10):
            mu_a, mu_b = random_uniform_pair(rng, 3, 4)
            mu_c = DiscreteDistribution(dirichlet_profiles(rng, 3, 4), None)
            for p in (1.0, 2.0):
                ab = wasserstein_p(mu_a, mu_b, p, 2.0)
                ac = wasserstein_p(mu_a, mu_c, p, 2.0)
                cb = wasserstein_p(mu_c, mu_b, p, 2.0)
                assert ab <= ac + cb + 1e-9

    def test_order_monotone(self):
        # W_1 <= W_2 for the same ground metric
        rng = np.random.default_rng(33)
        for _ in range(10):
            mu_a, mu_b = random_uniform_pair(rng, 4, 5)
            w1 = wasserstein_p(mu_a, mu_b, 1.0, 2.0)
            w2 = wasserstein_p(mu_a, mu_b, 2.0, 2.0)
            assert w1 <= w2 + 1e-9


class TestValidation:
    def test_mass_mismatch(self):
        cm = CostMatrix(np.zeros((1, 1)), 1.0, 2.0)
        with pytest.raises(MassMismatchError):
            emd(np.array([1.0]), np.array([0.99]), cm)

    def test_negative_weights(self):
        cm = CostMatrix(np.zeros((2, 2)), 1.0, 2.0)
        with pytest.raises(ValueError):
            emd(np.array([1.5, -0.5]), np.array([0.5, 0.5]), cm)

    def test_weight_shape_mismatch(self):
        cm = CostMatrix(np.zeros((2, 2)), 1.0, 2.0)
        with pytest.raises(DimensionMismatchError):
            emd(np.array([0.5, 0.3, 0.2]), np.array([0.5, 0.5]), cm)

    def test_size_limit(self):
        rng = np.random.default_rng(41)
        mu_a, mu_b = random_uniform_pair(rng, 5, 3)
        cm = cost_matrix(mu_a, mu_b, 1.0, 2.0)
        with pytest.raises(SizeLimitError):
            emd(mu_a.weights, mu_b.weights, cm, max_entries=24)

    def test_order_validation(self):
        rng = np.random.default_rng(42)
        mu_a, mu_b = random_uniform_pair(rng, 2, 3)
        with pytest.raises(ValueError):
            wasserstein_p(mu_a, mu_b, 0.5, 2.0)
        with pytest.raises(ValueError):
            wasserstein_p(mu_a, mu_b, 1.0, 0.9)


class TestLargerInstances:
    def test_rectangular_instance_certificate(self):
        rng = np.random.default_rng(51)
        mu_a = DiscreteDistribution(dirichlet_profiles(rng, 60, 8), rng.random(60) + 0.01)
        mu_b = DiscreteDistribution(dirichlet_profiles(rng, 45, 8), rng.random(45) + 0.01)
        cm = cost_matrix(mu_a, mu_b, 1.0, 2.0)
        value, plan = emd(mu_a.weights, mu_b.weights, cm)
        assert plan.duality_gap() <= GAP_TOL
        np.testing.assert_allclose(plan.marginal_source(), mu_a.weights, atol=MARGINAL_TOL)
        np.testing.assert_allclose(plan.marginal_target(), mu_b.weights, atol=MARGINAL_TOL)
        # plan support is a spanning forest: at most n_a + n_b - 1 arcs
        assert plan.mass.size <= 60 + 45 - 1

    def test_q_infinity(self):
        rng = np.random.default_rng(52)
        mu_a, mu_b = random_uniform_pair(rng, 4, 6)
        w = wasserstein_p(mu_a, mu_b, 1.0, math.inf)
        oracle = assignment_oracle(list(mu_a.atoms), list(mu_b.atoms), 1.0, math.inf)
        assert w == pytest.approx(oracle, abs=1e-9)
