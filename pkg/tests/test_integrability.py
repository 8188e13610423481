import math

import pytest
from hypothesis import given, settings, strategies as st

from ambit_kit.errors import ImproperTauMisuse
from ambit_kit.integrability import (INCONCLUSIVE, INTEGRABLE, NOT_INTEGRABLE, PROPER_TAU,
                                     TAU_ZERO_POSITIVE, TAU_ZERO_SUFFICIENT, IntegrandSpec,
                                     check_condition_drift, check_condition_gaussian,
                                     check_condition_jump, check_integrable,
                                     integrable_fraction, domination_constant, u_tilde)
from ambit_kit.measures import (CharacteristicTriplet, Colored, ControlMeasure,
                                JumpMeasureSpec, Orthogonal, SpaceMeasure, TimeMeasure,
                                TripletFlags, TruncationFunction)

HALF_LINE = ControlMeasure.null_spatial(0.0, math.inf)
INV = IntegrandSpec(lambda t, x: 1.0 / (1.0 + t), name="1/(1+t)")
ZERO = IntegrandSpec.constant(0.0)
ONE = IntegrandSpec.constant(1.0)


def compensated_poisson(bound=1.0):
    return CharacteristicTriplet(-1.0, Orthogonal(0.0), JumpMeasureSpec.atom(1.0, 1.0),
                                 HALF_LINE, tau=TruncationFunction.standard(bound))


def assorted_triplets():
    unit = ControlMeasure(TimeMeasure((0.0, 1.0)), SpaceMeasure.lebesgue([(0.0, 1.0)]))
    return [
        compensated_poisson(),
        CharacteristicTriplet(2.0, Orthogonal(1.0), JumpMeasureSpec.stable_alpha(1.5), unit),
        CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.exponential_tilt(0.7, 1.0),
                              HALF_LINE),
        CharacteristicTriplet(0.0, Colored(lambda z: 1.0), JumpMeasureSpec.zero(), unit,
                              TripletFlags(orthogonal=False)),
    ]


class TestUTilde:
    def test_pure_drift(self):
        tri = CharacteristicTriplet(2.0, Orthogonal(0.0), JumpMeasureSpec.zero(), HALF_LINE)
        assert u_tilde(0.0, 0.0, 3.0, tri) == pytest.approx((6.0, 6.0))

    def test_single_atom(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.atom(1.0, 1.0),
                                    HALF_LINE)
        u, _ = u_tilde(0.0, 0.0, 0.5, tri)
        assert u == pytest.approx(0.5, abs=1e-12)

    def test_zero_argument(self):
        assert u_tilde(0.0, 0.0, 0.0, compensated_poisson()) == (0.0, 0.0)

    def test_needs_proper_tau(self):
        with pytest.raises(ImproperTauMisuse):
            u_tilde(0.0, 0.0, 1.0, compensated_poisson(), TruncationFunction.zero())

    @settings(max_examples=10)
    @given(a=st.floats(-3.0, 3.0))
    def test_sup_dominates(self, a):
        tri = CharacteristicTriplet(0.3, Orthogonal(0.0), JumpMeasureSpec.stable_alpha(1.2),
                                    HALF_LINE)
        u, ut = u_tilde(0.0, 0.0, a, tri, resolution=41)
        assert ut >= u - 1e-12


class TestConditions:
    def test_gaussian_orthogonal(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(1.0), JumpMeasureSpec.zero(), HALF_LINE)
        v = check_condition_gaussian(INV, tri)
        assert v.value == pytest.approx(1.0, rel=1e-6)

    def test_gaussian_colored(self):
        tri = CharacteristicTriplet(
            0.0, Colored(lambda z: 0.5 * (1 + math.cos(z))), JumpMeasureSpec.zero(),
            ControlMeasure(TimeMeasure((0.0, math.inf)),
                           SpaceMeasure.lebesgue([(0.0, 2 * math.pi)])),
            TripletFlags(orthogonal=False))
        H = IntegrandSpec(lambda t, x: t * math.sin(2 * x))
        signed = check_condition_gaussian(H, tri)
        strict = check_condition_gaussian(H, tri, strict=True)
        assert signed.is_finite and abs(signed.value) <= 1e-8
        assert strict.is_infinite

    def test_gaussian_absent(self):
        v = check_condition_gaussian(INV, compensated_poisson())
        assert v.is_finite and v.value == 0.0

    def test_jump_inverse(self):
        v = check_condition_jump(INV, compensated_poisson())
        assert v.value == pytest.approx(1.0, rel=1e-6)

    def test_jump_constant_diverges(self):
        assert check_condition_jump(ONE, compensated_poisson()).is_infinite

    def test_jump_absent(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(1.0), JumpMeasureSpec.zero(), HALF_LINE)
        assert check_condition_jump(INV, tri).value == 0.0

    def test_drift_zero_integrand(self):
        v = check_condition_drift(ZERO, compensated_poisson())
        assert v.is_finite and v.value == 0.0


class TestCheckIntegrable:
    def test_compensated_poisson(self):
        rep = check_integrable(INV, compensated_poisson())
        assert rep.conjunction == INTEGRABLE and rep.integrable
        assert rep.variant == PROPER_TAU

    def test_compensated_poisson_tau_zero(self):
        rep = check_integrable(INV, compensated_poisson(), TruncationFunction.zero())
        assert rep.variant == TAU_ZERO_SUFFICIENT
        assert rep.cond1.is_infinite and rep.cond3.is_infinite
        assert rep.conjunction == INCONCLUSIVE

    def test_tau_zero_one_signed(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.atom(1.0, 1.0),
                                    HALF_LINE, TripletFlags(one_signed=True),
                                    TruncationFunction.zero())
        rep = check_integrable(INV, tri)
        assert rep.variant == TAU_ZERO_POSITIVE
        assert rep.conjunction == NOT_INTEGRABLE

    def test_tau_zero_needs_summable_jumps(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.stable_alpha(1.5),
                                    HALF_LINE)
        with pytest.raises(ImproperTauMisuse):
            check_integrable(INV, tri, TruncationFunction.zero())

    @pytest.mark.parametrize("bound", [0.5, 1.0, 2.0])
    def test_tau_robustness(self, bound):
        rep = check_integrable(INV, compensated_poisson(1.0), TruncationFunction.standard(bound))
        assert rep.conjunction == INTEGRABLE

    @pytest.mark.parametrize("tri", assorted_triplets(), ids=lambda t: type(t.gaussian).__name__)
    def test_zero_integrand(self, tri):
        rep = check_integrable(ZERO, tri)
        assert rep.conjunction == INTEGRABLE
        for v in (rep.cond1, rep.cond2, rep.cond3):
            assert v.is_finite and v.value == 0.0

    def test_not_integrable(self):
        rep = check_integrable(ONE, compensated_poisson())
        assert rep.conjunction == NOT_INTEGRABLE

    def test_rows(self):
        rows = check_integrable(INV, compensated_poisson()).rows()
        assert [r[0] for r in rows] == ["cond1", "cond2", "cond3"]
        assert all(r[1] == "finite" for r in rows)

    def test_sigma_paths(self):
        paths = [lambda t, x: 1.0, lambda t, x: 2.0, lambda t, x: 1.0 + t]
        frac, reps = integrable_fraction(INV, compensated_poisson(), paths)
        assert frac == pytest.approx(2 / 3)
        assert reps[2].conjunction == NOT_INTEGRABLE


@settings(max_examples=10)
@given(c=st.floats(0.0, 1.0), p=st.floats(0.2, 3.0), dq=st.floats(0.0, 2.0))
def test_domination(c, p, dq):
    tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.stable_alpha(1.5),
                                HALF_LINE)
    big = IntegrandSpec(lambda t, x: (1 + t) ** -p)
    small = IntegrandSpec(lambda t, x: -c * (1 + t) ** -(p + dq))
    vb = check_condition_jump(big, tri)
    if vb.is_finite:
        vs = check_condition_jump(small, tri)
        assert not vs.is_infinite


@pytest.mark.parametrize("bound", [0.5, 1.0, 2.0])
def test_domination_constant_finite(bound):
    tri = CharacteristicTriplet(
        0.2, Orthogonal(0.0),
        JumpMeasureSpec.mixture([JumpMeasureSpec.atom(1.0, 1.0),
                                 JumpMeasureSpec.stable_alpha(1.3, 1.0, 3.0)], [1.0, 1.0]),
        HALF_LINE, tau=TruncationFunction.standard(1.0))
    samples = [(0.0, 0.0, a) for a in (-3.0, -1.0, -0.2, 0.1, 0.5, 1.0, 2.5, 10.0)]
    kappa = domination_constant(tri, samples, TruncationFunction.standard(bound))
    assert math.isfinite(kappa)
