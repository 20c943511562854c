import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gonodyn.claims import random_full_state, random_simplex, random_tensor
from gonodyn.errors import BadPartition, BadPattern, HalfForbidden, IndexOutOfRange, NotInSa
from gonodyn.model import FullState, HeredityTensor, MixingRate, NormalizedState, ReducedState, lift, normalize
from gonodyn.operators import (
    GonosomalOperator,
    QuadraticMap1D,
    build_C1,
    build_C2,
    build_C3,
    build_U,
    n2_tensor,
)


def brute_full(theta, a, x, y):
    """Independent triple loop for one application of the full operator."""
    n = len(x)
    sx, sy = sum(x), sum(y)
    s = [0.0] * n
    for i in range(n):
        for p in range(n):
            for k in range(n):
                s[k] += theta[i][p][k] * x[i] * y[p]
    return [a * v / (sx * sy) for v in s], [(1 - a) * v / (sx * sy) for v in s]


def u_double_sum(n, j, l, a, x):
    """Female map of the U family straight from its double-sum definition."""
    out = [0.0] * n
    for k in range(n):
        acc = 0.0
        for i in range(n):
            for p in range(n):
                if p == j:
                    coef = 1.0 if i == k else 0.0
                else:
                    coef = 1.0 if k == l else 0.0
                acc += coef * x[i] * x[p]
        out[k] = acc / a
    return out


seeds = st.integers(0, 2**32 - 1)


class TestFullOperator:
    def test_single_type(self):
        op = GonosomalOperator(HeredityTensor(np.ones((1, 1, 1))), MixingRate(0.3))
        z = op.apply_full(FullState([0.6], [0.4]))
        assert z.x.tolist() == [0.3] and z.y.tolist() == pytest.approx([0.7], abs=1e-16)

    def test_copy_mother_example(self):
        th = np.zeros((2, 2, 2))
        th[0, :, 0] = th[1, :, 1] = 1.0
        op = GonosomalOperator(HeredityTensor(th), MixingRate(0.5))
        z = op.apply_full(FullState([0.3, 0.2], [0.1, 0.4]))
        np.testing.assert_allclose(z.x, [0.3, 0.2], atol=1e-15)
        np.testing.assert_allclose(z.y, [0.3, 0.2], atol=1e-15)

    @settings(max_examples=150, deadline=None)
    @given(seeds, st.integers(1, 5))
    def test_matches_triple_loop(self, seed, n):
        rng = np.random.default_rng(seed)
        op = GonosomalOperator(random_tensor(n, rng), MixingRate(rng.uniform(0.05, 0.95)))
        z = random_full_state(n, rng)
        bx, by = brute_full(op.theta.theta.tolist(), op.a, z.x.tolist(), z.y.tolist())
        out = op.apply_full(z)
        np.testing.assert_allclose(out.x, bx, rtol=0, atol=1e-15)
        np.testing.assert_allclose(out.y, by, rtol=0, atol=1e-15)

    @settings(max_examples=150, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_lands_in_Sa_with_proportional_males(self, seed, n):
        rng = np.random.default_rng(seed)
        op = GonosomalOperator(random_tensor(n, rng), MixingRate(rng.uniform(0.05, 0.95)))
        z = op.apply_full(random_full_state(n, rng))
        assert z.in_Sa(op.a, tol=1e-12)
        assert np.max(np.abs(z.y - op.rate.beta * z.x)) < 1e-15

    def test_restricted_agrees_on_Sa(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 6))
            a = rng.uniform(0.05, 0.95)
            op = GonosomalOperator(random_tensor(n, rng), MixingRate(a))
            z = random_full_state(n, rng, female_mass=a)
            worst = max(worst, float(np.max(np.abs(op.apply_restricted(z).as_vector()
                                                   - op.apply_full(z).as_vector()))))
        assert worst < 1e-13

    def test_restricted_rejects_outside_Sa(self):
        op = GonosomalOperator(build_C3(0.4), MixingRate(0.5))
        with pytest.raises(NotInSa):
            op.apply_restricted(FullState([0.2, 0.1, 0.1], [0.2, 0.2, 0.2]))

    def test_c3_restricted_step(self):
        op = GonosomalOperator(build_C3(0.4), MixingRate(0.5))
        z = op.apply_restricted(lift(NormalizedState([0, 0, 1]), op.rate))
        np.testing.assert_allclose(z.x / 0.5, [0.4, 0.6, 0.0], atol=1e-15)


class TestReducedAndNormalized:
    def test_absorbing_vertex(self):
        th = np.zeros((2, 2, 2))
        th[:, :, 1] = 1.0
        th[0, 0] = [1.0, 0.0]
        op = GonosomalOperator(HeredityTensor(th), MixingRate(0.4))
        assert op.apply_reduced(ReducedState([0.4, 0.0], 0.4)).x.tolist() == pytest.approx([0.4, 0.0], abs=1e-16)

    def test_two_type_example(self):
        op = GonosomalOperator(n2_tensor(0.5, 0.5, 0.5), MixingRate(0.5))
        x = op.apply_reduced(ReducedState([0.25, 0.25], 0.5))
        assert x.x[0] == pytest.approx(0.1875, abs=1e-15)
        assert QuadraticMap1D(0.5, 0.5, 0.5, 0.5)(0.25) == pytest.approx(0.1875, abs=1e-15)

    def test_reduced_mass_preserved(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            a = rng.uniform(0.05, 0.95)
            op = GonosomalOperator(random_tensor(n, rng), MixingRate(a))
            x = op.apply_reduced(ReducedState(a * random_simplex(n, rng, 0.2), a))
            assert abs(x.x.sum() - a) < 1e-12

    @settings(max_examples=150, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_conjugacy(self, seed, n):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0.05, 0.95)
        op = GonosomalOperator(random_tensor(n, rng), MixingRate(a))
        x = ReducedState(a * random_simplex(n, rng, 0.3), a)
        lhs = normalize(op.apply_reduced(x)).u
        rhs = op.apply_normalized(normalize(x)).u
        assert np.max(np.abs(lhs - rhs)) < 1e-13

    @pytest.mark.parametrize("u,expected", [
        ([1, 0, 0], [0, 0, 1]),
        ([0, 0, 1], [0.4, 0.6, 0]),
        ([0.4, 0.6, 0], [0, 0, 1]),
    ])
    def test_c3_steps(self, u, expected):
        op = GonosomalOperator(build_C3(0.4), MixingRate(0.5))
        np.testing.assert_allclose(op.apply_normalized(NormalizedState(u)).u, expected, atol=1e-15)

    def test_step_stays_on_simplex(self):
        rng = np.random.default_rng(3)
        op = GonosomalOperator(random_tensor(5, rng), MixingRate(0.5))
        u = random_simplex(5, rng)
        for _ in range(10_000):
            u = op.step(u)
        assert abs(u.sum() - 1) < 1e-14 and u.min() >= 0


class TestJacobian:
    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(2, 5))
    def test_finite_differences(self, seed, n):
        rng = np.random.default_rng(seed)
        op = GonosomalOperator(random_tensor(n, rng), MixingRate(0.5))
        u = random_simplex(n, rng)
        J = op.jacobian_normalized(u)
        h = 1e-6
        fd = np.empty((n, n))
        for m in range(n):
            e = np.zeros(n)
            e[m] = h
            fd[:, m] = (op.bilinear(u + e, u + e) - op.bilinear(u - e, u - e)) / (2 * h)
        np.testing.assert_allclose(J, fd, atol=1e-8)

    def test_column_sums_are_two(self):
        rng = np.random.default_rng(5)
        op = GonosomalOperator(random_tensor(4, rng), MixingRate(0.5))
        J = op.jacobian_normalized(random_simplex(4, rng))
        np.testing.assert_allclose(J.sum(axis=0), 2.0, atol=1e-14)


class TestScalarMap:
    def test_involution(self):
        t = QuadraticMap1D(0, 1, 1, 0.6)
        for x in (0.0, 0.1, 0.3, 0.6):
            assert t(x) == pytest.approx(0.6 - x, abs=1e-16)
        assert t.derivative(0.3) == -1.0

    def test_identity(self):
        t = QuadraticMap1D(1, 1, 0, 0.4)
        assert t(0.123) == 0.123 and t.derivative(0.2) == 1.0

    def test_from_tensor_matches_reduced_operator(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a = rng.uniform(0.05, 0.95)
            op = GonosomalOperator(random_tensor(2, rng), MixingRate(a))
            t = op.quadratic_map()
            x1 = rng.uniform(0, a)
            assert op.apply_reduced(ReducedState([x1, a - x1], a)).x[0] == pytest.approx(t(x1), abs=1e-15)

    def test_maps_interval_to_itself(self):
        rng = np.random.default_rng(10)
        for _ in range(500):
            t = QuadraticMap1D(rng.uniform(), rng.uniform(0, 2), rng.uniform(), rng.uniform(0.05, 1))
            xs = np.linspace(0, t.a, 11)
            ys = t(xs)
            assert ys.min() >= -1e-15 and ys.max() <= t.a + 1e-15


class TestBuilders:
    def test_c1_valid(self):
        t = build_C1(2, {(0, 1): {0: 0.3, 1: 0.7}, (1, 0): {0: 0.6, 1: 0.4}})
        assert t.theta[0, 0, 0] == 1 and t.theta[1, 1, 1] == 1

    def test_c1_half_forbidden(self):
        with pytest.raises(HalfForbidden):
            build_C1(2, {(0, 1): {0: 0.5, 1: 0.5}})

    def test_c1_bad_pattern(self):
        with pytest.raises(BadPattern):
            build_C1(3, {(0, 1): {0: 0.4, 1: 0.3, 2: 0.3}})

    def test_c1_index_range(self):
        with pytest.raises(IndexOutOfRange):
            build_C1(2, {(0, 2): {0: 1.0}})

    def test_c2_uniform_cross(self):
        t = build_C2(3, 2, np.full((1, 1, 3), 1 / 3))
        assert t.theta[1, 2].tolist() == pytest.approx([1 / 3] * 3)
        for i, p in [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0), (2, 2)]:
            assert t.theta[i, p].tolist() == [1.0, 0.0, 0.0]
        op = GonosomalOperator(t, MixingRate(0.5))
        assert op.apply_normalized(NormalizedState([1, 0, 0])).u.tolist() == [1, 0, 0]

    def test_c2_partition_checked(self):
        with pytest.raises(BadPartition):
            build_C2(3, 3, np.zeros((2, 0, 3)))
        with pytest.raises(BadPartition):
            build_C2(4, 2, np.full((1, 1, 4), 0.25))

    def test_c3_vertices(self):
        op = GonosomalOperator(build_C3(1.0), MixingRate(0.5))
        assert op.apply_normalized(NormalizedState([0, 0, 1])).u.tolist() == [1, 0, 0]
        for c in (0.0, 0.3, 1.0):
            op = GonosomalOperator(build_C3(c), MixingRate(0.5))
            for e in ([1, 0, 0], [0, 1, 0]):
                assert op.apply_normalized(NormalizedState(e)).u.tolist() == [0, 0, 1]

    def test_u_hand_example(self):
        # j=1, l=2 (1-based), a=1
        uop = build_U(3, 0, 1)
        x = uop.apply_reduced(ReducedState([0.5, 0.3, 0.2], 1.0))
        np.testing.assert_allclose(x.x, [0.25, 0.65, 0.1], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 5))
    def test_u_simplified_matches_double_sum(self, seed, n):
        rng = np.random.default_rng(seed)
        j, l = int(rng.integers(n)), int(rng.integers(n))
        a = rng.uniform(0.05, 0.95)
        x = a * random_simplex(n, rng, 0.2)
        uop = build_U(n, j, l)
        want = u_double_sum(n, j, l, a, x.tolist())
        np.testing.assert_allclose(uop.apply_reduced(ReducedState(x, a)).x, want, atol=1e-15)
        np.testing.assert_allclose(uop.operator(MixingRate(a)).apply_reduced(ReducedState(x, a)).x, want,
                                   atol=1e-15)

    def test_u_vertices_fixed(self):
        a = 0.5
        uop = build_U(4, 0, 2)
        for k in (0, 2):
            e = ReducedState(a * np.eye(4)[k], a)
            assert uop.apply_reduced(e).x.tolist() == e.x.tolist()

    def test_u_index_checked(self):
        with pytest.raises(IndexOutOfRange):
            build_U(3, 3, 0)
