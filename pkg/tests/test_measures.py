import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ambit_kit.errors import ColoredUnsupported, NonFiniteRegion
from ambit_kit.measures import (CharacteristicTriplet, Colored, ControlMeasure,
                                JumpMeasureSpec, Orthogonal, Region, SpaceMeasure, TimeMeasure,
                                TripletFlags, TruncationFunction, levy_khintchine_exponent,
                                retruncate, validate_triplet)

UNIT_SQUARE = ControlMeasure(TimeMeasure((0.0, 1.0)), SpaceMeasure.lebesgue([(0.0, 1.0)]))
UNIT_TIME = ControlMeasure(TimeMeasure((0.0, 1.0)), SpaceMeasure.point())


def gaussian_triplet():
    return CharacteristicTriplet(0.0, Orthogonal(1.0), JumpMeasureSpec.zero(), UNIT_SQUARE)


def poisson_triplet(mass=2.0, tau=None):
    return CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.atom(1.0, mass),
                                 UNIT_TIME, tau=tau or TruncationFunction.zero())


def mixed_triplet(tau=None):
    K = JumpMeasureSpec.mixture([JumpMeasureSpec.atom(0.7, 1.5),
                                 JumpMeasureSpec.stable_alpha(1.3, 0.5, 2.0)], [1.0, 1.0])
    return CharacteristicTriplet(0.3, Orthogonal(0.4), K, UNIT_TIME,
                                 tau=tau or TruncationFunction.standard(1.0))


class TestTruncation:
    def test_standard(self):
        tau = TruncationFunction.standard(1.0)
        assert tau(0.5) == 0.5 and tau(1.0) == 0.0 and tau(-2.0) == 0.0
        np.testing.assert_array_equal(tau(np.array([0.2, 3.0])), [0.2, 0.0])

    def test_zero(self):
        tau = TruncationFunction.zero()
        assert tau(0.3) == 0.0 and not tau.is_proper

    def test_invalid(self):
        with pytest.raises(ValueError):
            TruncationFunction.standard(0.0)
        with pytest.raises(ValueError):
            TruncationFunction("other")


class TestValidate:
    def test_gaussian_only_is_valid(self):
        assert validate_triplet(gaussian_triplet()) == []

    def test_atom_at_zero(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec(atoms=((0.0, 1.0),)),
                                    UNIT_TIME)
        assert [v.message for v in validate_triplet(tri)] == ["atom at zero"]

    def test_non_levy_density(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(0.0), JumpMeasureSpec.stable_alpha(2.0),
                                    UNIT_TIME)
        msgs = [v.message for v in validate_triplet(tri)]
        assert msgs == ["∫(1∧y²)dν diverges"]
        assert validate_triplet(tri)[0].point is not None

    def test_negative_variance(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(-1.0), JumpMeasureSpec.zero(), UNIT_TIME)
        assert any("negative Gaussian" in v.message for v in validate_triplet(tri))

    def test_colored_kernel_checks(self):
        good = CharacteristicTriplet(0.0, Colored(lambda z: 0.5 * (1 + math.cos(z))),
                                     JumpMeasureSpec.zero(), UNIT_SQUARE,
                                     TripletFlags(orthogonal=False))
        assert validate_triplet(good) == []
        bad = CharacteristicTriplet(0.0, Colored(lambda z: z), JumpMeasureSpec.zero(),
                                    UNIT_SQUARE, TripletFlags(orthogonal=False))
        assert validate_triplet(bad)


class TestExponent:
    def test_gaussian(self):
        psi = levy_khintchine_exponent(gaussian_triplet(), Region((0.0, 1.0)), 1.0)
        assert psi == pytest.approx(-0.5, abs=1e-12)

    def test_compound_poisson(self):
        psi = levy_khintchine_exponent(poisson_triplet(2.0), Region((0.0, 1.0)), math.pi)
        assert psi.real == pytest.approx(-4.0, abs=1e-12)
        assert abs(psi.imag) < 1e-12

    def test_zero_frequency(self):
        assert levy_khintchine_exponent(mixed_triplet(), Region((0.0, 1.0)), 0.0) == 0

    def test_infinite_region(self):
        tri = CharacteristicTriplet(0.0, Orthogonal(1.0), JumpMeasureSpec.zero(),
                                    ControlMeasure(TimeMeasure((0.0, math.inf))))
        with pytest.raises(NonFiniteRegion):
            levy_khintchine_exponent(tri, Region((0.0, math.inf)), 1.0)

    def test_colored_unsupported(self):
        tri = CharacteristicTriplet(0.0, Colored(lambda z: 1.0), JumpMeasureSpec.zero(),
                                    UNIT_SQUARE, TripletFlags(orthogonal=False))
        with pytest.raises(ColoredUnsupported):
            levy_khintchine_exponent(tri, Region((0.0, 1.0)), 1.0)

    def test_time_dependent_drift(self):
        # int_0^1 i u t dt = i u / 2
        tri = CharacteristicTriplet(lambda t, x: t, Orthogonal(0.0), JumpMeasureSpec.zero(),
                                    UNIT_TIME)
        psi = levy_khintchine_exponent(tri, Region((0.0, 1.0)), 2.0)
        assert psi == pytest.approx(1j, abs=1e-10)


@given(u=st.floats(-20.0, 20.0))
def test_hermitian_symmetry(u):
    tri = mixed_triplet()
    r = Region((0.0, 1.0))
    a = levy_khintchine_exponent(tri, r, u)
    b = levy_khintchine_exponent(tri, r, -u)
    assert b == pytest.approx(a.conjugate(), rel=1e-9, abs=1e-12)


@given(split=st.floats(0.05, 0.95), u=st.floats(0.1, 5.0))
def test_region_additivity(split, u):
    tri = CharacteristicTriplet(lambda t, x: math.sin(t), Orthogonal(lambda t, x: 1 + t),
                                JumpMeasureSpec.atom(1.0, 2.0), UNIT_TIME)
    whole = levy_khintchine_exponent(tri, Region((0.0, 1.0)), u)
    parts = (levy_khintchine_exponent(tri, Region((0.0, split)), u)
             + levy_khintchine_exponent(tri, Region((split, 1.0)), u))
    assert abs(whole - parts) <= 1e-10 * abs(whole)


@given(b1=st.floats(0.2, 3.0), b2=st.floats(0.2, 3.0), u=st.floats(0.1, 5.0))
def test_retruncation_consistency(b1, b2, u):
    tri = mixed_triplet(TruncationFunction.standard(b1))
    moved = retruncate(tri, TruncationFunction.standard(b2))
    r = Region((0.0, 1.0))
    assert moved.gaussian == tri.gaussian and moved.K is tri.K
    psi1 = levy_khintchine_exponent(tri, r, u)
    psi2 = levy_khintchine_exponent(moved, r, u)
    assert abs(psi1 - psi2) <= 1e-8


class TestJumpMeasure:
    def test_image_of_atoms(self):
        img = JumpMeasureSpec.atom(1.0, 3.0).image(-2.0)
        assert img.atoms == ((-2.0, 3.0),)
        assert JumpMeasureSpec.atom(1.0, 3.0).image(0.0).is_zero

    def test_image_preserves_density_mass(self):
        spec = JumpMeasureSpec.exponential_tilt(0.5, 2.0)
        from ambit_kit.quadrature import integrate_jump
        m = integrate_jump(lambda y: 1.0 if abs(y) > 0.1 else 0.0, spec)
        mi = integrate_jump(lambda y: 1.0 if abs(y) > 0.3 else 0.0, spec.image(3.0))
        assert mi.value == pytest.approx(m.value, rel=1e-8)

    def test_mixture_merges_atoms(self):
        mix = JumpMeasureSpec.mixture([JumpMeasureSpec.atom(1.0, 1.0),
                                       JumpMeasureSpec.atom(1.0, 2.0)], [1.0, 0.5])
        assert mix.atoms == ((1.0, 2.0),)

    def test_control_mass(self):
        A = ControlMeasure(TimeMeasure((0.0, 2.0)), SpaceMeasure.finite_grid([0.0, 1.0],
                                                                            [0.5, 1.5]))
        assert A.mass() == pytest.approx(4.0)
        assert A.mass(Region((0.0, 1.0), (1,))) == pytest.approx(1.5)
