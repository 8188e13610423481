"""Integrability of deterministic (or pathwise) integrands against a triplet.

A kernel ``H`` is integrable iff the report fields ``cond1`` (drift
functional), ``cond2`` (Gaussian energy) and ``cond3`` (jump functional)
are all finite integrals against the control measure.  Under the improper
truncation ``tau = 0`` the drift and jump conditions switch to their
summable-jump variants.  These are sufficient only, and become necessary
for one-signed measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ImproperTauMisuse
from .measures import (CharacteristicTriplet, JumpMeasureSpec, TruncationFunction, retruncate,
                       sample_points)
from .quadrature import (DEFAULT_CONFIG, QuadConfig, Verdict, bimeasure_integral,
                         integrate_improper, integrate_jump)

INTEGRABLE = "Integrable"
NOT_INTEGRABLE = "NotIntegrable"
INCONCLUSIVE = "Inconclusive"

PROPER_TAU = "proper_tau"
TAU_ZERO_SUFFICIENT = "tau_zero_sufficient"
TAU_ZERO_POSITIVE = "tau_zero_positive_measure"


@dataclass(frozen=True)
class IntegrandSpec:
    """Integrand H(t, x), optionally modulated by a volatility field sigma(t, x)."""

    H: Callable = field(compare=False)
    singular_times: tuple = ()
    support: tuple | None = None
    sigma: Callable | None = field(default=None, compare=False)
    name: str = ""

    @classmethod
    def constant(cls, c: float) -> "IntegrandSpec":
        return cls(lambda t, x: c, name=f"{c:g}")

    def __call__(self, t, x=0.0) -> float:
        h = float(self.H(t, x))
        if self.sigma is not None:
            h *= float(self.sigma(t, x))
        return h

    def absolute(self) -> "IntegrandSpec":
        return replace(self, H=lambda t, x: abs(self.H(t, x)),
                       sigma=None if self.sigma is None else (lambda t, x: abs(self.sigma(t, x))))

    def with_sigma(self, sigma: Callable) -> "IntegrandSpec":
        return replace(self, sigma=sigma)


@dataclass(frozen=True)
class IntegrabilityReport:
    cond1: Verdict
    cond2: Verdict
    cond3: Verdict
    conjunction: str
    tau_used: TruncationFunction
    variant: str
    # colored Gaussian part only: the absolute-value (strict) energy
    cond2_strict: Verdict | None = None

    @property
    def integrable(self) -> bool:
        return self.conjunction == INTEGRABLE

    def rows(self):
        names = ("cond1", "cond2", "cond3_var" if self.variant != PROPER_TAU else "cond3")
        out = []
        for name, v in zip(names, (self.cond1, self.cond2, self.cond3)):
            out.append((name, v.outcome, v.value, v.err if v.is_finite else v.slope))
        if self.cond2_strict is not None:
            v = self.cond2_strict
            out.append(("cond2_strict", v.outcome, v.value, v.err if v.is_finite else v.slope))
        return out

    def __str__(self):
        lines = [f"tau: {self.tau_used}", f"variant: {self.variant}"]
        lines += [f"{name}: {outcome} value={value} err={err}"
                  for name, outcome, value, err in self.rows()]
        lines.append(f"conjunction: {self.conjunction}")
        return "\n".join(lines)


class _InnerNotFinite(Exception):
    def __init__(self, verdict, point):
        self.verdict = verdict
        self.point = point


def _time_domain(triplet, H):
    a, b = triplet.A.time.interval
    if H is not None and H.support is not None:
        a, b = max(a, H.support[0]), min(b, H.support[1])
    return a, b


def integrate_over_control(F: Callable, triplet: CharacteristicTriplet,
                           cfg: QuadConfig | None = None, *, H: IntegrandSpec | None = None,
                           nonnegative: bool = True) -> Verdict:
    """Integrate F(t, x) against the control measure of ``triplet``."""
    cfg = cfg or DEFAULT_CONFIG
    A = triplet.A
    t0, t1 = _time_domain(triplet, H)
    sing = tuple(H.singular_times) if H is not None else ()
    w = A.time.weight
    try:
        if A.space.is_discrete:
            pts = list(zip(A.space.points, A.space.weights))

            def G(t):
                return w(t) * math.fsum(wx * F(t, x) for x, wx in pts if wx != 0)

            return integrate_improper(G, (t0, t1), cfg, singular=sing, nonnegative=nonnegative)
        box = list(A.space.box)

        def G(t, *xs):
            x = xs[0] if len(xs) == 1 else tuple(xs)
            return w(t) * F(t, x)

        return integrate_improper(G, [(t0, t1)] + box, cfg, singular={0: sing},
                                  nonnegative=nonnegative)
    except _InnerNotFinite as exc:
        v = exc.verdict
        if v.is_infinite:
            return Verdict.infinite(v.slope, reason=f"inner jump integral infinite at {exc.point}")
        return Verdict.inconclusive(f"inner jump integral undecided at {exc.point}: {v.reason}")


class _JumpIntegralCache:
    """Memoizes inner jump integrals by (measure identity, scalar argument)."""

    def __init__(self, cfg, nonnegative=True):
        self.cfg = cfg
        self.nonnegative = nonnegative
        self.store = {}

    def __call__(self, make_g, spec: JumpMeasureSpec, a: float, point, breaks=()):
        key = (id(spec), a)
        entry = self.store.get(key)
        if entry is None:
            hit = integrate_jump(make_g(a), spec, self.cfg, nonnegative=self.nonnegative,
                                 breaks=breaks)
            # holding ``spec`` keeps its id from being recycled while cached
            self.store[key] = (spec, hit)
        else:
            hit = entry[1]
        if not hit.is_finite:
            raise _InnerNotFinite(hit, point)
        return hit.value


def _drift_functional(triplet, tau, cfg):
    cache = _JumpIntegralCache(cfg, nonnegative=False)

    def make_g(a):
        return lambda y: tau(a * y) - a * tau(y)

    def U(t, x, a):
        if a == 0:
            return 0.0
        val = a * triplet.drift(t, x)
        if tau.is_proper and triplet.has_jumps:
            spec = triplet.jumps(t, x)
            if not spec.is_zero:
                val += cache(make_g, spec, a, (t, x),
                             tau.breaks + tuple(b / abs(a) for b in tau.breaks))
        return abs(val)

    return U


def u_tilde(t, x, a: float, triplet: CharacteristicTriplet, tau: TruncationFunction | None = None,
            cfg: QuadConfig | None = None, resolution: int = 201) -> tuple[float, float]:
    """(U, sup_{|c|<=1} U(c a)) with the sup taken on a grid refined once around its argmax."""
    tau = tau or triplet.tau
    if not tau.is_proper:
        raise ImproperTauMisuse("u_tilde needs a proper truncation function")
    if tau != triplet.tau:
        triplet = retruncate(triplet, tau, cfg)
    U = _drift_functional(triplet, tau, cfg or DEFAULT_CONFIG)
    base = U(t, x, a)
    if a == 0:
        return 0.0, 0.0
    cs = np.linspace(-1.0, 1.0, resolution)
    vals = [U(t, x, float(c) * a) for c in cs]
    i = int(np.argmax(vals))
    step = cs[1] - cs[0]
    fine = np.linspace(max(-1.0, cs[i] - step), min(1.0, cs[i] + step), resolution)
    best = max(max(vals), max(U(t, x, float(c) * a) for c in fine))
    return base, max(best, base)


def _effective(triplet, tau, cfg):
    if tau is None or tau == triplet.tau:
        return triplet, triplet.tau
    return retruncate(triplet, tau, cfg), tau


def check_condition_drift(H: IntegrandSpec, triplet: CharacteristicTriplet,
                          tau: TruncationFunction | None = None,
                          cfg: QuadConfig | None = None) -> Verdict:
    cfg = cfg or DEFAULT_CONFIG
    triplet, tau = _effective(triplet, tau, cfg)
    U = _drift_functional(triplet, tau, cfg)
    return integrate_over_control(lambda t, x: U(t, x, H(t, x)), triplet, cfg, H=H)


def check_condition_gaussian(H: IntegrandSpec, triplet: CharacteristicTriplet,
                             cfg: QuadConfig | None = None, *, strict: bool = False) -> Verdict:
    """Gaussian energy of H.

    Orthogonal part: ``int H^2 c dA``.  Colored part: the bimeasure integral
    of (H, H) against f, or of (|H|, |H|) when ``strict``.
    """
    cfg = cfg or DEFAULT_CONFIG
    if not triplet.is_colored:
        if not triplet.has_gaussian:
            return Verdict.finite(0.0)
        return integrate_over_control(lambda t, x: H(t, x) ** 2 * triplet.variance(t, x),
                                      triplet, cfg, H=H)
    A = triplet.A
    if A.space.is_discrete or len(A.space.box) != 1:
        raise ValueError("colored Gaussian check needs a one-dimensional Lebesgue space box")
    h = H.absolute() if strict else H
    if A.time.density is not None:
        w = A.time.weight
        hw = lambda t, x: math.sqrt(w(t)) * h(t, x)  # noqa: E731
    else:
        hw = h
    return bimeasure_integral(hw, hw, triplet.gaussian.f, _time_domain(triplet, H),
                              A.space.box[0], cfg, singular_times=H.singular_times)


def check_condition_jump(H: IntegrandSpec, triplet: CharacteristicTriplet,
                         cfg: QuadConfig | None = None, *, summable: bool = False) -> Verdict:
    """``int int (1 ∧ (H y)^2) K dA``; with ``summable`` the ``1 ∧ |H y|`` variant."""
    cfg = cfg or DEFAULT_CONFIG
    if not triplet.has_jumps:
        return Verdict.finite(0.0)
    cache = _JumpIntegralCache(cfg)
    if summable:
        def make_g(a):
            return lambda y: min(1.0, abs(a * y))
    else:
        def make_g(a):
            return lambda y: min(1.0, (a * y) ** 2)

    def F(t, x):
        a = H(t, x)
        if a == 0:
            return 0.0
        spec = triplet.jumps(t, x)
        return 0.0 if spec.is_zero else cache(make_g, spec, abs(a), (t, x))

    return integrate_over_control(F, triplet, cfg, H=H)


def _has_summable_jumps(triplet, cfg) -> bool:
    if not triplet.has_jumps:
        return True
    seen = set()
    for t, x in sample_points(triplet.A):
        spec = triplet.jumps(t, x)
        if id(spec) in seen:
            continue
        seen.add(id(spec))
        if not integrate_jump(lambda y: min(1.0, abs(y)), spec, cfg).is_finite:
            return False
    return True


def check_integrable(H: IntegrandSpec, triplet: CharacteristicTriplet,
                     tau: TruncationFunction | None = None,
                     cfg: QuadConfig | None = None) -> IntegrabilityReport:
    """Evaluate all three conditions and their conjunction."""
    cfg = cfg or DEFAULT_CONFIG
    tau = tau or triplet.tau
    if tau.is_proper:
        variant = PROPER_TAU
    else:
        if triplet.flags.one_signed:
            variant = TAU_ZERO_POSITIVE
        elif _has_summable_jumps(triplet, cfg):
            variant = TAU_ZERO_SUFFICIENT
        else:
            raise ImproperTauMisuse(
                "tau = 0 needs summable jumps or a one-signed random measure")
    eff, _ = _effective(triplet, tau, cfg)
    cond1 = check_condition_drift(H, eff, tau, cfg)
    cond2 = check_condition_gaussian(H, eff, cfg)
    strict = check_condition_gaussian(H, eff, cfg, strict=True) if eff.is_colored else None
    cond3 = check_condition_jump(H, eff, cfg, summable=not tau.is_proper)
    conds = (cond1, cond2, cond3)
    if all(v.is_finite for v in conds):
        conj = INTEGRABLE
    elif any(v.is_infinite for v in conds):
        if variant == TAU_ZERO_SUFFICIENT and not cond2.is_infinite:
            conj = INCONCLUSIVE
        else:
            conj = NOT_INTEGRABLE
    else:
        conj = INCONCLUSIVE
    return IntegrabilityReport(cond1, cond2, cond3, conj, tau, variant, strict)


def integrable_fraction(H: IntegrandSpec, triplet: CharacteristicTriplet,
                        sigma_paths: Sequence[Callable], tau: TruncationFunction | None = None,
                        cfg: QuadConfig | None = None) -> tuple[float, list[IntegrabilityReport]]:
    """Share of volatility paths for which H * sigma passes all conditions."""
    reports = [check_integrable(H.with_sigma(s), triplet, tau, cfg) for s in sigma_paths]
    if not reports:
        return math.nan, reports
    return sum(r.integrable for r in reports) / len(reports), reports


def domination_constant(triplet: CharacteristicTriplet, samples, tau: TruncationFunction | None = None,
                cfg: QuadConfig | None = None) -> float:
    """Smallest kappa with Ũ <= U + kappa * int (1 ∧ (a y)^2) K(dy) on ``samples``.

    ``samples`` is an iterable of (t, x, a).  Returns ``inf`` when no finite
    constant works on the sample.
    """
    cfg = cfg or DEFAULT_CONFIG
    kappa = 0.0
    for t, x, a in samples:
        u, ut = u_tilde(t, x, a, triplet, tau, cfg)
        excess = ut - u
        if excess <= 1e-12 * max(1.0, ut):
            continue
        m = integrate_jump(lambda y: min(1.0, (a * y) ** 2), triplet.jumps(t, x), cfg)
        if not m.is_finite or m.value <= 0:
            return math.inf
        kappa = max(kappa, excess / m.value)
    return kappa


__all__ = [
    "IntegrandSpec", "IntegrabilityReport", "u_tilde", "check_condition_drift",
    "check_condition_gaussian", "check_condition_jump", "check_integrable",
    "integrable_fraction", "integrate_over_control", "domination_constant",
    "INTEGRABLE", "NOT_INTEGRABLE", "INCONCLUSIVE",
]

