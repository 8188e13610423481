"""COGARCH and supCOGARCH volatility driven by a compound Poisson process.

Between jumps the volatility solves ``dV = (beta - eta V) dt`` exactly; at a
jump of size ``y`` the price moves by ``sqrt(V_-) y`` and the volatility by
``phi V_- y^2``.  The superposition mixes components over a finite grid of
``phi`` values: every jump carries an independent mark ``phi_j`` and moves
the aggregate by ``phi_j V^{phi_j}_- y^2`` while every component takes the
jump with its own coefficient.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .basis import JumpSampler
from .errors import InadmissiblePhi, NoFiniteRoot
from .measures import JumpMeasureSpec
from .quadrature import DEFAULT_CONFIG, QuadConfig, Verdict, integrate_jump
from .rng import child_seed, stream

_JUMPS, _MARKS = 0, 1


def _log_integral(nu: JumpMeasureSpec, phi: float, cfg=None) -> float:
    v = integrate_jump(lambda y: math.log1p(phi * y * y), nu, cfg)
    if not v.is_finite:
        return math.inf
    return v.value


def phi_max(nu: JumpMeasureSpec, eta: float, tol: float = 1e-12, *, strict: bool = False,
            phi_cap: float = 1e300, cfg: QuadConfig | None = None) -> float:
    """Root of ``phi -> int log(1 + phi y^2) nu(dy) - eta``.

    Returns ``inf`` (with a warning) when the integral stays below ``eta`` up
    to ``phi_cap``; raises ``NoFiniteRoot`` instead when ``strict``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")

    def F(phi):
        return _log_integral(nu, phi, cfg) - eta

    hi = 1.0
    while F(hi) < 0:
        hi *= 4.0
        if hi > phi_cap:
            msg = f"log-moment stays below eta={eta:g} for phi up to {phi_cap:g}"
            if strict:
                raise NoFiniteRoot(msg)
            warnings.warn(msg, stacklevel=2)
            return math.inf
    lo = 0.0 if hi == 1.0 else hi / 4.0
    root = optimize.bisect(F, lo, hi, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps,
                           maxiter=2000)
    return float(root)


def phi_residual(nu: JumpMeasureSpec, eta: float, phi: float, cfg=None) -> float:
    return _log_integral(nu, phi, cfg) - eta


def _check_driver(driver: JumpMeasureSpec):
    # inter-jump dynamics are exact only for compound Poisson drivers
    if driver.density is not None and (driver.alpha0 is None or driver.alpha0 >= 0):
        raise ValueError("the driver must have finite activity (density with alpha0 < 0)")


@dataclass(frozen=True)
class CogarchParams:
    beta: float
    eta: float
    phi: float
    driver: JumpMeasureSpec = field(default_factory=lambda: JumpMeasureSpec.atom(1.0, 1.0))

    def __post_init__(self):
        if not (self.beta > 0 and self.eta > 0):
            raise ValueError("beta and eta must be positive")
        if not self.phi >= 0:
            raise ValueError("phi must be nonnegative")
        _check_driver(self.driver)

    @property
    def level(self) -> float:
        return self.beta / self.eta


@dataclass(frozen=True)
class SupCogarchParams:
    beta: float
    eta: float
    phis: tuple
    probs: tuple
    driver: JumpMeasureSpec = field(default_factory=lambda: JumpMeasureSpec.atom(1.0, 1.0))

    def __post_init__(self):
        object.__setattr__(self, "phis", tuple(float(p) for p in self.phis))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if not (self.beta > 0 and self.eta > 0):
            raise ValueError("beta and eta must be positive")
        if len(self.phis) != len(self.probs) or not self.phis:
            raise ValueError("phis and probs must be non-empty and of equal length")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector")
        if any(p < 0 for p in self.phis):
            raise ValueError("phi values must be nonnegative")
        _check_driver(self.driver)

    @classmethod
    def degenerate(cls, p: CogarchParams) -> "SupCogarchParams":
        return cls(p.beta, p.eta, (p.phi,), (1.0,), p.driver)

    @property
    def level(self) -> float:
        return self.beta / self.eta

    def check_admissible(self, cfg=None) -> float:
        pm = phi_max(self.driver, self.eta, cfg=cfg) if not self.driver.is_zero else math.inf
        bad = [p for p in self.phis if p >= pm]
        if bad:
            raise InadmissiblePhi(f"phi values {bad} are not below phi_max={pm:.6g}")
        return pm


def _ode(v, dt, level, eta):
    return level + (v - level) * math.exp(-eta * dt)


def jump_stream(driver: JumpMeasureSpec, T: float, seed: int):
    """Jump times (sorted) and sizes on (0, T]; shared by every model using ``seed``."""
    if driver.is_zero:
        return np.zeros(0), np.zeros(0)
    sampler = JumpSampler(driver, 0.0)
    rng = stream(seed, _JUMPS)
    n = int(rng.poisson(sampler.rate * T))
    times = np.sort(rng.uniform(0.0, T, n))
    sizes = sampler.sample(rng, n)
    return times, sizes


@dataclass
class CogarchPath:
    T: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    V_pre: np.ndarray
    V_post: np.ndarray
    G_pre: np.ndarray
    G_post: np.ndarray
    V0: float
    params: CogarchParams
    dV: np.ndarray = None       # jump increments as applied
    dG: np.ndarray = None

    def V(self, t: float) -> float:
        """Right-continuous volatility at time ``t``."""
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        if k == 0:
            return _ode(self.V0, t, self.params.level, self.params.eta)
        return _ode(self.V_post[k - 1], t - self.jump_times[k - 1], self.params.level,
                    self.params.eta)

    def G(self, t: float) -> float:
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return 0.0 if k == 0 else float(self.G_post[k - 1])

    def time_average(self, a: float, b: float) -> float:
        """``(b - a)^{-1} int_a^b V dt`` in closed form along the exponential pieces."""
        level, eta = self.params.level, self.params.eta
        knots = [a] + [t for t in self.jump_times if a < t < b] + [b]
        parts = []
        for s, u in zip(knots[:-1], knots[1:]):
            v = self.V(s)
            parts.append(level * (u - s) + (v - level) * (-math.expm1(-eta * (u - s))) / eta)
        return math.fsum(parts) / (b - a)

    def rows(self, step: float | None = None):
        """(t, V, G) at jump times (post-jump values) and on a uniform grid."""
        ts = list(self.jump_times)
        if step:
            ts += list(np.arange(0.0, self.T + 0.5 * step, step))
        for t in sorted(set(ts)):
            yield float(t), self.V(t), self.G(t)


def simulate_cogarch(params: CogarchParams, T: float, seed: int = 0,
                     V0: float | None = None) -> CogarchPath:
    times, sizes = jump_stream(params.driver, T, seed)
    level, eta, phi = params.level, params.eta, params.phi
    v0 = level if V0 is None else float(V0)
    n = len(times)
    V_pre, V_post = np.empty(n), np.empty(n)
    G_pre, G_post = np.empty(n), np.empty(n)
    dV, dG = np.empty(n), np.empty(n)
    v, g, last = v0, 0.0, 0.0
    for k in range(n):
        v = _ode(v, times[k] - last, level, eta)
        y = sizes[k]
        V_pre[k], G_pre[k] = v, g
        dG[k] = math.sqrt(v) * y
        dV[k] = phi * v * y * y
        g = g + dG[k]
        v = v + dV[k]
        V_post[k], G_post[k] = v, g
        last = times[k]
    return CogarchPath(T, times, sizes, V_pre, V_post, G_pre, G_post, v0, params, dV, dG)


@dataclass
class SupCogarchPath:
    T: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    marks: np.ndarray           # index into params.phis
    Vbar_pre: np.ndarray
    Vbar_post: np.ndarray
    comp_pre: np.ndarray        # (jumps, components)
    comp_post: np.ndarray
    V0: float
    params: SupCogarchParams

    def _at(self, t, post, v0):
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        if k == 0:
            return _ode(v0, t, self.params.level, self.params.eta)
        return _ode(post[k - 1], t - self.jump_times[k - 1], self.params.level, self.params.eta)

    def Vbar(self, t: float) -> float:
        return self._at(t, self.Vbar_post, self.V0)

    def component(self, t: float, i: int) -> float:
        return self._at(t, self.comp_post[:, i], self.V0)

    def closed_form(self, t: float) -> float:
        """Aggregate volatility as a direct sum over past jumps."""
        p = self.params
        sel = self.jump_times <= t
        phis = np.asarray(p.phis)[self.marks[sel]]
        pre = self.comp_pre[sel, self.marks[sel]]
        w = np.exp(-p.eta * (t - self.jump_times[sel])) * phis * pre * self.jump_sizes[sel] ** 2
        return p.level + (self.V0 - p.level) * math.exp(-p.eta * t) + math.fsum(w)

    def consistency_error(self, step: float | None = None) -> float:
        """Sup-norm gap between the evolved aggregate and the closed form."""
        ts = list(self.jump_times) + list(np.arange(0.0, self.T, step or self.T / 64)) + [self.T]
        return max(abs(self.Vbar(t) - self.closed_form(t)) for t in ts)

    def rows(self, step: float | None = None):
        ts = list(self.jump_times)
        if step:
            ts += list(np.arange(0.0, self.T + 0.5 * step, step))
        for t in sorted(set(ts)):
            yield (float(t), self.Vbar(t)) + tuple(self.component(t, i)
                                                  for i in range(len(self.params.phis)))


def simulate_supcogarch(params: SupCogarchParams, T: float, seed: int = 0,
                        V0: float | None = None, *, check: bool = True,
                        check_tol: float = 1e-8) -> SupCogarchPath:
    """Aggregate and component paths driven by one jump stream.

    With ``check`` the closed-form sum is evaluated at every jump and on a
    grid, and a ``RuntimeError`` is raised if the two disagree by more than
    ``check_tol``.
    """
    params.check_admissible()
    times, sizes = jump_stream(params.driver, T, seed)
    n, m = len(times), len(params.phis)
    if m == 1:
        marks = np.zeros(n, dtype=int)
    else:
        marks = stream(seed, _MARKS).choice(m, size=n, p=np.asarray(params.probs))
    level, eta = params.level, params.eta
    v0 = level if V0 is None else float(V0)
    phis = params.phis
    vbar = v0
    comp = [v0] * m
    Vb_pre, Vb_post = np.empty(n), np.empty(n)
    C_pre, C_post = np.empty((n, m)), np.empty((n, m))
    last = 0.0
    for k in range(n):
        dt = times[k] - last
        vbar = _ode(vbar, dt, level, eta)
        comp = [_ode(c, dt, level, eta) for c in comp]
        y = sizes[k]
        j = marks[k]
        Vb_pre[k] = vbar
        C_pre[k] = comp
        vbar = vbar + phis[j] * comp[j] * y * y
        comp = [c + phi * c * y * y for c, phi in zip(comp, phis)]
        Vb_post[k] = vbar
        C_post[k] = comp
        last = times[k]
    path = SupCogarchPath(T, times, sizes, marks, Vb_pre, Vb_post, C_pre, C_post, v0, params)
    if check:
        gap = path.consistency_error()
        if not gap < check_tol * max(1.0, float(np.max(Vb_post, initial=v0))):
            raise RuntimeError(f"aggregate volatility deviates from its closed form by {gap:.3g}")
    return path


def _existence_integral(path: SupCogarchPath, T_ladder, cfg) -> list[float]:
    """``int_0^T sum_phi pi(phi) int 1 ∧ (y^2 phi e^{-eta s} V^phi_s) nu(dy) ds`` for each T."""
    p = path.params
    nu = p.driver
    knots = np.concatenate([[0.0], path.jump_times])
    starts = np.vstack([np.full(len(p.phis), path.V0)[None, :], path.comp_post])

    def inner(s, i, piece):
        v = _ode(starts[piece, i], s - knots[piece], p.level, p.eta)
        a = p.phis[i] * math.exp(-p.eta * s) * v
        if a == 0:
            return 0.0
        r = integrate_jump(lambda y: min(1.0, a * y * y), nu, cfg)
        return r.value if r.is_finite else math.inf

    edges = sorted(set(list(knots) + list(T_ladder)))
    acc, vals = 0.0, {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        piece = int(np.searchsorted(knots, lo, side="right")) - 1
        for i, (phi, w) in enumerate(zip(p.phis, p.probs)):
            if phi == 0 or w == 0:
                continue
            acc += w * integrate.quad(inner, lo, hi, args=(i, piece), limit=100)[0]
        vals[hi] = acc
    return [vals.get(T, 0.0) for T in T_ladder]


def check_supcog_existence(params: SupCogarchParams, T_ladder=(10.0, 20.0, 40.0, 80.0),
                           n_paths: int = 100, seed: int = 0, cfg: QuadConfig | None = None,
                           *, tol: float = 1e-4, min_fraction: float = 0.99) -> Verdict:
    """Monte Carlo ladder test of the triple-integral existence condition.

    A path counts as convergent when its last ladder increment is below
    ``tol`` relative to its value.  This is statistical evidence only.
    """
    cfg = cfg or DEFAULT_CONFIG
    T_ladder = tuple(sorted(float(t) for t in T_ladder))
    if params.driver.is_zero or all(phi == 0 for phi in params.phis):
        return Verdict.finite(0.0, 0.0, detail={"fraction": 1.0, "paths": n_paths})
    finals, ok, grow = [], 0, 0
    ladders = []
    for r in range(n_paths):
        path = simulate_supcogarch(params, T_ladder[-1], child_seed(seed, r), check=False)
        vals = _existence_integral(path, T_ladder, cfg)
        ladders.append(vals)
        inc = vals[-1] - vals[-2] if len(vals) > 1 else 0.0
        if abs(inc) <= tol * max(1.0, abs(vals[-1])):
            ok += 1
        elif len(vals) > 2 and inc >= vals[-2] - vals[-3] > 0:
            grow += 1
        finals.append(vals[-1])
    frac = ok / n_paths
    finals = np.asarray(finals)
    mean = float(finals.mean())
    se = float(finals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    ladder = tuple(np.mean(ladders, axis=0))
    detail = {"fraction": frac, "paths": n_paths, "T_ladder": T_ladder, "statistical": True}
    if frac >= min_fraction:
        return Verdict.finite(mean, se, ladder=ladder, detail=detail)
    if grow / n_paths >= min_fraction:
        slope = math.log(ladder[-1] / ladder[-2]) / math.log(T_ladder[-1] / T_ladder[-2])
        return Verdict.infinite(slope, ladder=ladder, detail=detail)
    return Verdict.inconclusive(f"only {frac:.0%} of paths settle on the ladder",
                                ladder=ladder, detail=detail)
