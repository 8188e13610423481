"""Ambit processes, the heat kernel and the colored-noise classification example.

An ambit field is ``Y(t, x) = int h(t, s; x, y) sigma(s, y) M(ds, dy)``.  On a
simulated basis the integral is a finite sum: continuous cell contributions
use the kernel at the cell centre, jumps use the kernel at the jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .basis import BasisRealization, GridSpec
from .errors import SingularEvaluation
from .measures import JumpMeasureSpec
from .quadrature import DEFAULT_CONFIG, QuadConfig, Verdict, bimeasure_integral, \
    integrate_improper, integrate_jump

IN_L10 = "InL10"
IN_L0_ONLY = "InL0_only"
NOT_IN_L0 = "NotInL0"
INCONCLUSIVE = "Inconclusive"


def _sqdist(x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(np.sum((x - y) ** 2))


def heat_green(t: float, s: float, x, y, d: int = 1) -> float:
    """Whole-space heat kernel ``exp(-|x-y|^2/(4(t-s))) / (4 pi (t-s))^{d/2}`` for s < t."""
    if d not in (1, 2, 3):
        raise ValueError("heat kernel is provided for d in {1, 2, 3}")
    if s > t:
        return 0.0
    r2 = _sqdist(x, y)
    if s == t:
        if r2 == 0:
            raise SingularEvaluation(f"heat kernel is singular at s = t = {t}, x = y")
        return 0.0
    tau = t - s
    return math.exp(-r2 / (4.0 * tau)) / (4.0 * math.pi * tau) ** (d / 2.0)


@dataclass(frozen=True)
class KernelSpec:
    """Deterministic kernel h(t, s; x, y).

    ``kind`` is one of ``heat`` (needs ``d``), ``exponential`` (needs ``eta``),
    ``tabulated`` (``table`` maps the lag ``t - s`` onto values, linear
    interpolation, zero beyond the last node) or ``custom`` (``func``).
    """

    kind: str = "custom"
    d: int = 1
    eta: float = 1.0
    table: tuple = ()
    func: Callable | None = field(default=None, compare=False)
    causal: bool = True

    def __post_init__(self):
        if self.kind not in ("heat", "exponential", "tabulated", "custom"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "exponential" and not self.eta > 0:
            raise ValueError("exponential kernel needs eta > 0")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom kernel needs func")
        if self.kind == "tabulated" and len(self.table) < 2:
            raise ValueError("tabulated kernel needs at least two (lag, value) nodes")

    @classmethod
    def heat(cls, d: int = 1) -> "KernelSpec":
        return cls("heat", d=d)

    @classmethod
    def exponential(cls, eta: float) -> "KernelSpec":
        return cls("exponential", eta=eta)

    @classmethod
    def tabulated(cls, lags, values, causal: bool = True) -> "KernelSpec":
        return cls("tabulated", table=tuple(zip(map(float, lags), map(float, values))),
                   causal=causal)

    @classmethod
    def custom(cls, func: Callable, causal: bool = True) -> "KernelSpec":
        return cls("custom", func=func, causal=causal)

    @classmethod
    def constant(cls, c: float = 1.0) -> "KernelSpec":
        return cls.custom(lambda t, s, x, y: c)

    def __call__(self, t: float, s: float, x=0.0, y=0.0) -> float:
        if self.causal and s > t:
            return 0.0
        if self.kind == "heat":
            return heat_green(t, s, x, y, self.d)
        if self.kind == "exponential":
            return math.exp(-self.eta * (t - s))
        if self.kind == "tabulated":
            lags, vals = zip(*self.table)
            return float(np.interp(t - s, lags, vals, left=0.0, right=0.0))
        return float(self.func(t, s, x, y))


# ---------------------------------------------------------------------------
# heat kernel integrability


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def heat_lp_verdict(p: float, d: int, t: float = 1.0, x=0.0,
                    cfg: QuadConfig | None = None) -> Verdict:
    """Verdict on ``int_0^t int_{R^d} G(t, s; x, y)^p dy ds``.

    Works in the lag ``r = t - s`` and the scaled radius ``rho = |x-y| / sqrt(4 r)``.
    In these variables the integrand is a product, so the two axes get their
    own ladders: the singular end ``r -> 0`` and the infinite radius.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if not t > 0:
        raise ValueError("t must be positive")
    cfg = cfg or DEFAULT_CONFIG
    area = _sphere_area(d)

    def lag(r):
        return (4.0 * math.pi * r) ** (-d * p / 2.0) * (4.0 * r) ** (d / 2.0) if r > 0 else 0.0

    def radial(rho):
        return area * rho ** (d - 1) * math.exp(-p * rho * rho)

    vr = integrate_improper(lag, (0.0, t), cfg, singular=(0.0,))
    vrho = integrate_improper(radial, (0.0, math.inf), cfg)
    for v in (vr, vrho):
        if not v.is_finite:
            return v
    value = vr.value * vrho.value
    err = vr.err * vrho.value + vrho.err * vr.value
    return Verdict.finite(value, err, ladder=vr.ladder)


@dataclass(frozen=True)
class HeatexResult:
    kernel: Verdict
    jumps: Verdict

    @property
    def sufficient(self) -> bool:
        """True when both sides are finite; False does not prove nonexistence."""
        return self.kernel.is_finite and self.jumps.is_finite


def check_heatex(p: float, nu: JumpMeasureSpec, sigma_p_moment: float, d: int, t: float = 1.0,
                 x=0.0, cfg: QuadConfig | None = None) -> HeatexResult:
    """Sufficient existence check for the mild heat solution with pure-jump noise."""
    if not 0 < p < 2:
        raise ValueError("p must lie in (0, 2)")
    if sigma_p_moment < 0:
        raise ValueError("sigma_p_moment must be nonnegative")
    cfg = cfg or DEFAULT_CONFIG
    kern = heat_lp_verdict(p, d, t, x, cfg)
    if kern.is_finite:
        kern = kern.scaled(sigma_p_moment)
    elif sigma_p_moment == 0:
        kern = Verdict.finite(0.0, 0.0)
    jumps = integrate_jump(lambda y: abs(y) ** p if abs(y) <= 1 else 0.0, nu, cfg)
    return HeatexResult(kern, jumps)


# ---------------------------------------------------------------------------
# evaluation on simulated bases


def _sigma_fn(sigma):
    if sigma is None:
        return lambda s, y: 1.0
    if callable(sigma):
        return sigma
    c = float(sigma)
    return lambda s, y: c


def evaluate_ambit(kernel: KernelSpec, sigma, realization: BasisRealization,
                   queries: Sequence[tuple]) -> np.ndarray:
    """Y at each query ``(t, x)``.

    Cells count once they are complete at ``t``; jumps count when ``s_j <= t``.
    """
    sig = _sigma_fn(sigma)
    grid = realization.grid
    e = grid.edges
    cont = realization.gaussian + realization.drift + realization.small
    tol = 1e-12 * max(1.0, abs(grid.t1))
    out = np.empty(len(queries))
    for q, (t, x) in enumerate(queries):
        terms = []
        n_done = int(np.searchsorted(e[1:], t + tol, side="right"))
        for i in range(n_done):
            s_c = 0.5 * (e[i] + e[i + 1])
            for j, (y, _) in enumerate(grid.space):
                c = i * grid.n_space + j
                if cont[c] != 0:
                    terms.append(kernel(t, s_c, x, y) * sig(s_c, y) * cont[c])
        for s, c, size in zip(realization.jump_times, realization.jump_cells,
                              realization.jump_sizes):
            if s > t:
                continue
            y = grid.space[c % grid.n_space][0]
            terms.append(kernel(t, s, x, y) * sig(s, y) * size)
        out[q] = math.fsum(terms)
    return out


def coarsen(realization: BasisRealization, factor: int = 2) -> BasisRealization:
    """Merge ``factor`` consecutive time steps; jumps are kept as they are."""
    g = realization.grid
    if g.n_steps % factor:
        raise ValueError("n_steps must be divisible by the coarsening factor")
    n_new = g.n_steps // factor
    grid = GridSpec(g.t0, g.t1, n_new, g.space, g.time_density)

    def merge(a):
        return a.reshape(n_new, factor, g.n_space).sum(axis=1).ravel()

    i, j = np.divmod(realization.jump_cells, g.n_space)
    cells = (i // factor) * g.n_space + j
    return replace(realization, grid=grid, gaussian=merge(realization.gaussian),
                   drift=merge(realization.drift), small=merge(realization.small),
                   jump_cells=cells.astype(int),
                   small_jump_variance=merge(realization.small_jump_variance),
                   small_jump_bias=merge(realization.small_jump_bias))


@dataclass(frozen=True)
class RefinementStudy:
    n_steps: tuple
    values: np.ndarray  # (levels, queries)

    @property
    def drifts(self) -> np.ndarray:
        """Max change in Y between consecutive levels, finest last."""
        return np.max(np.abs(np.diff(self.values, axis=0)), axis=1)


def refinement_study(kernel: KernelSpec, sigma, realization: BasisRealization,
                     queries: Sequence[tuple], levels: int = 3) -> RefinementStudy:
    """Evaluate Y on the realization and on successively halved time resolutions."""
    reals = [realization]
    for _ in range(levels - 1):
        reals.append(coarsen(reals[-1], 2))
    reals.reverse()
    vals = np.array([evaluate_ambit(kernel, sigma, r, queries) for r in reals])
    return RefinementStudy(tuple(r.grid.n_steps for r in reals), vals)


# ---------------------------------------------------------------------------
# colored Gaussian example


@dataclass(frozen=True)
class ColoredClassification:
    label: str
    strict: Verdict
    signed: Verdict
    inner_ok: bool


def _as_h(H):
    return H if not hasattr(H, "H") else (lambda t, x: H(t, x))


def classify_colored_example(H, f: Callable, cfg: QuadConfig | None = None,
                             time_interval=(0.0, math.inf), space_box=(0.0, 2 * math.pi), *,
                             n_inner_checks: int = 5, singular_times=()) -> ColoredClassification:
    """Compare the energies of (|H|, |H|) and (H, H) against the covariance ``f``."""
    cfg = cfg or DEFAULT_CONFIG
    h = _as_h(H)

    def habs(t, x):
        return abs(h(t, x))

    a, b = space_box
    t0, t1 = time_interval
    upper = t1 if math.isfinite(t1) else t0 + 10.0
    inner_ok = True
    for t in np.linspace(t0, upper, n_inner_checks + 2)[1:-1]:
        val, err = integrate.dblquad(lambda xp, x: habs(t, x) * habs(t, xp) * f(x - xp),
                                     a, b, a, b)
        if not (math.isfinite(val) and math.isfinite(err)):
            inner_ok = False
    strict = bimeasure_integral(habs, habs, f, time_interval, space_box, cfg,
                                singular_times=singular_times)
    signed = bimeasure_integral(h, h, f, time_interval, space_box, cfg,
                                singular_times=singular_times)
    if strict.is_finite:
        label = IN_L10
    elif signed.is_infinite or not inner_ok:
        label = NOT_IN_L0
    elif strict.is_infinite and signed.is_finite:
        label = IN_L0_ONLY
    else:
        label = INCONCLUSIVE
    return ColoredClassification(label, strict, signed, inner_ok)
