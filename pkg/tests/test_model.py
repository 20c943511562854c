import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gonodyn.errors import DegenerateRate, InvalidParams, InvalidState, NotStochastic, ZeroSexMass
from gonodyn.model import (
    FullState,
    HeredityTensor,
    MixingRate,
    NormalizedState,
    ReducedState,
    TemperatureParams,
    derive_rates,
    lift,
    normalize,
    reduce,
    validate_tensor,
)
from gonodyn.operators import build_C3


class TestRates:
    def test_transition_temperatures_give_even_split(self):
        r = derive_rates(TemperatureParams.from_mu((0, 0, 1), 0.9, 0.2))
        assert r.a == 0.5 and r.b == 0.5 and r.beta == 1.0

    def test_linear_combination(self):
        r = derive_rates(TemperatureParams.from_mu((0.5, 0.5, 0), 0.8, 0.3))
        assert r.a == pytest.approx(0.55, abs=1e-15)
        assert r.beta == pytest.approx(0.45 / 0.55, rel=1e-14)

    def test_all_female_is_degenerate(self):
        with pytest.raises(DegenerateRate):
            derive_rates(TemperatureParams.from_mu((1, 0, 0), 1.0, 0.0))

    @pytest.mark.parametrize("a", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_rate_bounds(self, a):
        with pytest.raises(DegenerateRate):
            MixingRate(a)

    def test_inconsistent_b(self):
        with pytest.raises(InvalidParams):
            MixingRate(0.3, 0.6)

    @pytest.mark.parametrize("tau,mu1,mu2", [
        ((0.5, 0.6, 0.0), 0.8, 0.2),   # taus do not sum to 1
        ((-0.1, 0.6, 0.5), 0.8, 0.2),
        ((0.3, 0.3, 0.4), 0.4, 0.2),   # feminizing environment favours males
        ((0.3, 0.3, 0.4), 0.8, 0.7),   # masculinizing environment favours females
    ])
    def test_temperature_constraints(self, tau, mu1, mu2):
        with pytest.raises(InvalidParams):
            TemperatureParams.from_mu(tau, mu1, mu2)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0.5, 1), st.floats(0, 0.5))
    def test_rates_sum_to_one(self, w1, w2, mu1, mu2):
        t1 = w1 * (1 - 1e-3)
        t2 = (1 - t1) * w2
        t3 = 1 - t1 - t2
        try:
            r = derive_rates(TemperatureParams.from_mu((t1, t2, t3), mu1, mu2))
        except DegenerateRate:
            return
        assert abs(r.a + r.b - 1) < 1e-12
        assert 0 < r.a < 1


class TestTensor:
    def test_copy_mother_tensor_passes(self):
        n = 3
        th = np.zeros((n, n, n))
        for i in range(n):
            th[i, :, i] = 1.0
        assert validate_tensor(th).ok

    def test_row_sum_violation_is_reported_not_raised(self):
        th = np.zeros((2, 2, 2))
        th[:, :, 0] = 1.0
        th[0, 0] = [0.5, 0.6]
        rep = validate_tensor(th)
        assert not rep.ok
        d = rep.as_dict()
        assert d["violations"] == [{"i": 1, "p": 1, "row_sum": pytest.approx(1.1), "min_entry": 0.5}]

    def test_every_violation_listed(self):
        th = np.full((2, 2, 2), 0.7)
        assert len(validate_tensor(th).violations) == 4

    def test_negative_entry(self):
        th = np.zeros((2, 2, 2))
        th[:, :, 0] = 1.0
        th[1, 1] = [1.5, -0.5]
        assert [(v.i, v.p) for v in validate_tensor(th).violations] == [(1, 1)]

    def test_shape_error(self):
        assert validate_tensor(np.zeros((2, 3, 2))).shape_error

    def test_builder_output_passes(self):
        assert validate_tensor(build_C3(0.4).theta).ok

    def test_constructor_raises(self):
        with pytest.raises(NotStochastic) as exc:
            HeredityTensor(np.full((2, 2, 2), 0.7))
        assert exc.value.report.violations

    def test_immutable(self):
        t = build_C3(0.4)
        with pytest.raises(ValueError):
            t.theta[0, 0, 0] = 0.5

    def test_from_sparse(self):
        t = HeredityTensor.from_sparse(1, [(0, 0, 0, 1.0)])
        assert t.theta.shape == (1, 1, 1)


class TestStates:
    def test_normalize(self):
        u = normalize(ReducedState([0.2, 0.3], 0.5))
        np.testing.assert_allclose(u.u, [0.4, 0.6], rtol=0, atol=1e-15)

    def test_normalize_vertex(self):
        assert normalize(ReducedState([0.3, 0, 0], 0.3)).u.tolist() == [1.0, 0.0, 0.0]

    def test_lift_examples(self):
        z = lift(NormalizedState([1, 0]), MixingRate(0.5))
        assert z.x.tolist() == [0.5, 0] and z.y.tolist() == [0.5, 0]
        z = lift(NormalizedState([0.4, 0.6]), MixingRate(0.55))
        np.testing.assert_allclose(z.x, [0.22, 0.33], atol=1e-15)
        np.testing.assert_allclose(z.y, [0.18, 0.27], atol=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3),
           st.floats(0.01, 0.99))
    def test_round_trip(self, raw, a):
        u = np.array(raw) / sum(raw)
        rate = MixingRate(a)
        x = ReducedState(a * u, a)
        z = lift(normalize(x), rate)
        assert np.max(np.abs(z.x - x.x)) <= 1e-15
        assert z.in_Sa(a)
        assert np.max(np.abs(reduce(z, rate).x - x.x)) <= 1e-15

    def test_full_state_checks(self):
        with pytest.raises(ZeroSexMass):
            FullState([0.0, 0.0], [0.5, 0.5])
        with pytest.raises(InvalidState):
            FullState([0.5, 0.1], [0.5, 0.1])
        with pytest.raises(InvalidState):
            FullState([-0.1, 0.6], [0.5, 0.0])
        with pytest.raises(InvalidState):
            FullState([0.5], [0.25, 0.25])

    def test_full_state_membership(self):
        z = FullState([0.2, 0.1], [0.3, 0.4])
        assert z.in_Sa(0.3) and not z.in_Sa(0.5)

    def test_reduced_sum_checked(self):
        with pytest.raises(InvalidState):
            ReducedState([0.2, 0.2], 0.5)

    def test_normalized_checks(self):
        with pytest.raises(InvalidState):
            NormalizedState([0.5, 0.6])
        with pytest.raises(InvalidState):
            NormalizedState([float("nan"), 1.0])
