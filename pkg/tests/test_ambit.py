import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from ambit_kit.ambit import (IN_L10, NOT_IN_L0, KernelSpec, check_heatex,
                             classify_colored_example, coarsen, evaluate_ambit, heat_green,
                             heat_lp_verdict, refinement_study)
from ambit_kit.basis import BasisRealization, GridSpec, simulate_basis_sample, simulate_levy_basis
from ambit_kit.errors import SingularEvaluation
from ambit_kit.measures import (CharacteristicTriplet, ControlMeasure, JumpMeasureSpec,
                                Orthogonal, Region)


def null_triplet(T, b=0.0, c=0.0, K=None):
    return CharacteristicTriplet(b, Orthogonal(c), K or JumpMeasureSpec.zero(),
                                 ControlMeasure.null_spatial(0.0, T))


def one_jump(s0, y0, size=1.0, T=2.0):
    grid = GridSpec(0.0, T, 4, ((y0, 1.0),))
    z = np.zeros(grid.n_cells)
    return BasisRealization(grid, z.copy(), z.copy(), z.copy(), np.array([s0]),
                            np.array([int(s0 // (T / 4))]), np.array([size]), "none", 0.0,
                            z.copy(), z.copy(), 0)


def heat_lp_exact(p, d, t):
    # int_0^t (4 pi r)^{d(1-p)/2} p^{-d/2} dr
    beta = d * (1 - p) / 2
    return (4 * math.pi) ** beta * p ** (-d / 2) * t ** (beta + 1) / (beta + 1)


class TestHeatGreen:
    def test_plug_in(self):
        assert heat_green(1 / (4 * math.pi), 0.0, 0.0, 0.0, 1) == pytest.approx(1.0, rel=1e-14)

    def test_causal(self):
        assert heat_green(1.0, 2.0, 0.0, 0.3) == 0.0

    def test_singular(self):
        with pytest.raises(SingularEvaluation):
            heat_green(1.0, 1.0, 0.5, 0.5)
        assert heat_green(1.0, 1.0, 0.5, 0.7) == 0.0

    @given(lag=st.floats(0.01, 10.0), x=st.floats(-3.0, 3.0))
    def test_normalized_1d(self, lag, x):
        val, _ = integrate.quad(lambda y: heat_green(lag, 0.0, x, y, 1), -np.inf, np.inf,
                                points=None, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("lag", [0.05, 1.0])
    def test_normalized_2d(self, lag):
        R = 12 * math.sqrt(lag)
        val, _ = integrate.dblquad(lambda y2, y1: heat_green(lag, 0.0, (0, 0), (y1, y2), 2),
                                   -R, R, -R, R, epsabs=1e-11)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_kernel_kinds(self):
        assert KernelSpec.exponential(2.0)(1.0, 0.5) == pytest.approx(math.exp(-1.0))
        assert KernelSpec.exponential(2.0)(0.5, 1.0) == 0.0
        tab = KernelSpec.tabulated([0.0, 1.0], [1.0, 0.0])
        assert tab(1.0, 0.75) == pytest.approx(0.75)
        assert tab(3.0, 0.0) == 0.0
        with pytest.raises(ValueError):
            KernelSpec("nope")


class TestHeatLp:
    @pytest.mark.parametrize("d,p,finite", [(1, 2.0, True), (2, 2.1, False), (2, 1.9, True)])
    def test_threshold_examples(self, d, p, finite):
        v = heat_lp_verdict(p, d)
        assert v.is_finite is finite
        assert v.is_infinite is not finite

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 1.6])
    @pytest.mark.parametrize("t", [1.0, 2.5])
    def test_closed_form_value(self, d, p, t):
        if p >= 1 + 2 / d - 0.05:
            pytest.skip("above the threshold")
        v = heat_lp_verdict(p, d, t)
        assert v.value == pytest.approx(heat_lp_exact(p, d, t), rel=1e-6)

    def test_grid_no_misclassification(self):
        for d in (1, 2, 3):
            thr = 1 + 2 / d
            for p in np.arange(0.5, 3.51, 0.25):
                if abs(p - thr) < 0.05:
                    continue
                v = heat_lp_verdict(float(p), d)
                assert not v.is_inconclusive, (d, p)
                assert v.is_finite == (p < thr), (d, p)

    def test_invalid(self):
        with pytest.raises(ValueError):
            heat_lp_verdict(0.0, 1)
        with pytest.raises(ValueError):
            heat_lp_verdict(1.0, 4)


class TestHeatex:
    def test_both_finite(self):
        res = check_heatex(1.5, JumpMeasureSpec.stable_alpha(1.2), 1.0, 3)
        assert res.kernel.is_finite and res.jumps.is_finite and res.sufficient
        # 2 int_0^1 y^{1.5 - 2.2} dy = 2 / 0.3
        assert res.jumps.value == pytest.approx(2 / 0.3, rel=1e-6)

    def test_kernel_side_fails(self):
        res = check_heatex(1.8, JumpMeasureSpec.stable_alpha(1.2), 1.0, 3)
        assert res.kernel.is_infinite and not res.sufficient

    def test_no_jumps(self):
        res = check_heatex(1.5, JumpMeasureSpec.zero(), 1.0, 3)
        assert res.jumps.is_finite and res.jumps.value == 0.0

    def test_p_range(self):
        with pytest.raises(ValueError):
            check_heatex(2.5, JumpMeasureSpec.zero(), 1.0, 2)


class TestEvaluate:
    def test_constant_kernel_is_mass(self):
        tri = null_triplet(2.0, b=0.3, c=1.0, K=JumpMeasureSpec.atom(1.0, 5.0))
        r = simulate_levy_basis(tri, GridSpec(0.0, 2.0, 8), seed=3)
        for t in (0.5, 1.0, 2.0):
            y = evaluate_ambit(KernelSpec.constant(1.0), 1.0, r, [(t, 0.0)])[0]
            assert y == pytest.approx(r.value(Region((0.0, t))), abs=1e-12)

    def test_single_heat_jump(self):
        r = one_jump(0.3, 0.2)
        for t, x in [(0.5, 0.0), (1.0, 1.0), (1.9, -0.4)]:
            y = evaluate_ambit(KernelSpec.heat(1), 1.0, r, [(t, x)])[0]
            assert y == heat_green(t, 0.3, x, 0.2, 1)
        assert evaluate_ambit(KernelSpec.heat(1), 1.0, r, [(0.2, 0.0)])[0] == 0.0

    def test_sigma_modulation(self):
        r = one_jump(0.3, 0.2, size=2.0)
        y = evaluate_ambit(KernelSpec.constant(1.0), lambda s, x: s + x, r, [(1.0, 0.0)])[0]
        assert y == pytest.approx(2.0 * 0.5)

    def test_shot_noise_mean(self):
        lam, eta, n = 2.0, 1.0, 10_000
        tri = null_triplet(20.0, K=JumpMeasureSpec.atom(1.0, lam))
        sample = simulate_basis_sample(tri, GridSpec(0.0, 20.0, 1), seed=8, n=n)
        k = KernelSpec.exponential(eta)
        ys = np.array([evaluate_ambit(k, 1.0, r, [(20.0, 0.0)])[0]
                       for r in sample.realizations()])
        target = lam / eta * (1 - math.exp(-20.0 * eta))
        assert abs(ys.mean() - target) <= 3 * ys.std(ddof=1) / math.sqrt(n)

    def test_linear_in_realization(self):
        tri = null_triplet(2.0, K=JumpMeasureSpec.atom(1.0, 3.0))
        grid = GridSpec(0.0, 2.0, 4)
        a = simulate_levy_basis(tri, grid, seed=1)
        b = simulate_levy_basis(tri, grid, seed=2)
        mixed = replace(a, jump_times=np.concatenate([a.jump_times, b.jump_times]),
                        jump_cells=np.concatenate([a.jump_cells, b.jump_cells]),
                        jump_sizes=np.concatenate([a.jump_sizes, -2.0 * b.jump_sizes]))
        q = [(0.7, 0.0), (2.0, 0.0)]
        k = KernelSpec.exponential(1.5)
        lhs = evaluate_ambit(k, 1.0, mixed, q)
        rhs = evaluate_ambit(k, 1.0, a, q) - 2.0 * evaluate_ambit(k, 1.0, b, q)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13)

    def test_ou_recursion(self):
        eta = 0.7
        tri = null_triplet(10.0, K=JumpMeasureSpec.atom(1.0, 2.0))
        r = simulate_levy_basis(tri, GridSpec(0.0, 10.0, 10), seed=5)
        k = KernelSpec.exponential(eta)
        ts = np.linspace(0.0, 10.0, 41)
        y = evaluate_ambit(k, 1.0, r, [(t, 0.0) for t in ts])
        for t0, t1, y0, y1 in zip(ts[:-1], ts[1:], y[:-1], y[1:]):
            new = [math.exp(-eta * (t1 - s)) * v for s, v in zip(r.jump_times, r.jump_sizes)
                   if t0 < s <= t1]
            assert y1 == pytest.approx(math.exp(-eta * (t1 - t0)) * y0 + math.fsum(new),
                                       abs=1e-12)


class TestRefinement:
    def test_coarsen_keeps_mass(self):
        tri = null_triplet(1.0, b=0.2, c=1.0, K=JumpMeasureSpec.atom(1.0, 4.0))
        r = simulate_levy_basis(tri, GridSpec(0.0, 1.0, 8), seed=2)
        c = coarsen(r, 4)
        assert c.grid.n_steps == 2
        assert c.total() == pytest.approx(r.total(), abs=1e-13)
        with pytest.raises(ValueError):
            coarsen(r, 3)

    def test_study_drift_shrinks(self):
        tri = null_triplet(1.0, c=1.0)
        r = simulate_levy_basis(tri, GridSpec(0.0, 1.0, 64), seed=6)
        study = refinement_study(KernelSpec.exponential(1.0), 1.0, r, [(1.0, 0.0)], levels=4)
        assert study.n_steps == (8, 16, 32, 64)
        d = study.drifts
        assert d[-1] < d[0]


class TestClassify:
    def test_bounded_compact(self):
        res = classify_colored_example(lambda t, x: 1.0, lambda z: 1.0,
                                       time_interval=(0.0, 1.0), space_box=(0.0, 1.0))
        assert res.label == IN_L10
        assert res.strict.value == pytest.approx(1.0, rel=1e-8)

    def test_constant_all_time(self):
        res = classify_colored_example(lambda t, x: 1.0, lambda z: 1.0,
                                       time_interval=(0.0, math.inf), space_box=(0.0, 1.0))
        assert res.label == NOT_IN_L0
        assert res.strict.is_infinite and res.signed.is_infinite
