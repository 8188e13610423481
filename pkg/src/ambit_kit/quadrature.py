"""Improper integrals with a three-valued convergence verdict.

Every integral is evaluated along a geometric exhaustion ("ladder") of its
domain: infinite ends are cut at distance ``L * base**k`` from the finite
end ``e`` of the segment (``L = max(1, |e|)``) and declared singular
points are approached at distance ``len * base**-(k+1)``.  The shell
contributions of consecutive rungs decide the outcome:

* shells that vanish, or decay geometrically with a stable rate, give a
  ``finite`` verdict (the geometric remainder is added as a tail estimate);
* shells that stop decaying while the truncated integrals keep growing with
  a log-log slope above ``divergence_slope`` give an ``infinite`` verdict;
* anything else is ``inconclusive``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import EvaluationError

FINITE = "finite"
INFINITE = "infinite"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-6
    max_subdivisions: int = 200
    ladder_base: float = 2.0
    ladder_max: int = 20
    divergence_slope: float = 0.05
    # shells decaying slower than base**-min_decay per rung count as non-decaying
    min_decay: float = 0.005
    # first rung at which steady shell growth may be declared divergent
    early_divergence_rung: int = 10
    quad_epsrel: float = 1e-10
    quad_epsabs: float = 1e-13
    singularities: tuple = ()

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.ladder_base > 1 or self.ladder_max < 4:
            raise ValueError("ladder must be strictly increasing with at least 4 rungs")

    @property
    def ladder(self) -> tuple[float, ...]:
        return tuple(self.ladder_base**k for k in range(self.ladder_max + 1))

    def with_overrides(self, **kw) -> "QuadConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT_CONFIG = QuadConfig()


@dataclass(frozen=True)
class Verdict:
    """Outcome of a convergence decision.

    ``value``/``err`` are set for finite verdicts, ``slope`` (the fitted
    growth exponent of the truncated integrals) for infinite ones and
    ``reason`` for inconclusive ones.  ``ladder`` records the truncated
    integrals that led to the decision.
    """

    outcome: str
    value: float | None = None
    err: float | None = None
    slope: float | None = None
    reason: str = ""
    ladder: tuple = ()
    detail: dict = field(default_factory=dict, compare=False)

    @classmethod
    def finite(cls, value, err=0.0, **kw) -> "Verdict":
        return cls(FINITE, value=float(value), err=float(abs(err)), **kw)

    @classmethod
    def infinite(cls, slope=math.inf, **kw) -> "Verdict":
        return cls(INFINITE, slope=float(slope), **kw)

    @classmethod
    def inconclusive(cls, reason, **kw) -> "Verdict":
        return cls(INCONCLUSIVE, reason=reason, **kw)

    @property
    def is_finite(self) -> bool:
        return self.outcome == FINITE

    @property
    def is_infinite(self) -> bool:
        return self.outcome == INFINITE

    @property
    def is_inconclusive(self) -> bool:
        return self.outcome == INCONCLUSIVE

    def scaled(self, c: float) -> "Verdict":
        if self.is_finite:
            return replace(self, value=c * self.value, err=abs(c) * self.err,
                           ladder=tuple(c * v for v in self.ladder))
        if self.is_infinite and c == 0:
            return Verdict.inconclusive("zero times infinity")
        return self

    def __str__(self) -> str:
        if self.is_finite:
            return f"Finite({self.value:.10g}, err={self.err:.3g})"
        if self.is_infinite:
            return f"Infinite(slope={self.slope:.4g})"
        return f"Inconclusive({self.reason})"


def combine_sum(verdicts: Sequence[Verdict]) -> Verdict:
    """Verdict of a sum of integrals over disjoint pieces."""
    verdicts = list(verdicts)
    if not verdicts:
        return Verdict.finite(0.0)
    if len(verdicts) == 1:
        return verdicts[0]
    for v in verdicts:
        if v.is_infinite:
            return v
    if all(v.is_finite for v in verdicts):
        return Verdict.finite(math.fsum(v.value for v in verdicts),
                              math.fsum(v.err for v in verdicts))
    reasons = "; ".join(v.reason for v in verdicts if v.is_inconclusive)
    return Verdict.inconclusive(reasons)


# ---------------------------------------------------------------------------
# domain bookkeeping


@dataclass(frozen=True)
class _Segment:
    lo: float
    hi: float
    improper: str | None  # None, "lo" or "hi"

    def truncated(self, k: int, base: float) -> tuple[float, float]:
        if self.improper is None:
            return self.lo, self.hi
        # infinite ends are cut relative to the size of the finite end, so a
        # tail starting far from the origin is not mistaken for growth
        if self.improper == "hi":
            if math.isinf(self.hi):
                return self.lo, self.lo + max(1.0, abs(self.lo)) * base**k
            return self.lo, self.hi - (self.hi - self.lo) * base ** (-k - 1)
        if math.isinf(self.lo):
            return self.hi - max(1.0, abs(self.hi)) * base**k, self.hi
        return self.lo + (self.hi - self.lo) * base ** (-k - 1), self.hi


def _segments(lo: float, hi: float, singular: Sequence[float],
              breaks: Sequence[float] = ()) -> list[_Segment]:
    if not lo < hi:
        return []
    pts = sorted({float(lo), float(hi)} | {float(s) for s in singular if lo <= s <= hi}
                 | {float(s) for s in breaks if lo < s < hi and math.isfinite(s)})
    sing = {float(s) for s in singular}
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        bad_lo = math.isinf(a) or a in sing
        bad_hi = math.isinf(b) or b in sing
        if bad_lo and bad_hi:
            if math.isinf(a) and math.isinf(b):
                m = 0.0
            elif math.isinf(a):
                m = b - 1.0
            elif math.isinf(b):
                m = a + 1.0
            else:
                m = 0.5 * (a + b)
            out += [_Segment(a, m, "lo"), _Segment(m, b, "hi")]
        elif bad_lo:
            out.append(_Segment(a, b, "lo"))
        elif bad_hi:
            out.append(_Segment(a, b, "hi"))
        else:
            out.append(_Segment(a, b, None))
    return out


def _shell_boxes(segs: Sequence[_Segment], k: int, base: float):
    """Disjoint boxes covering D_k minus D_{k-1} for the improper axes."""
    cur = [s.truncated(k, base) for s in segs]
    prev = [s.truncated(k - 1, base) for s in segs]
    boxes = []
    improper = [i for i, s in enumerate(segs) if s.improper is not None]
    for j_pos, j in enumerate(improper):
        box = []
        for i, s in enumerate(segs):
            if i == j:
                continue
            if s.improper is None:
                box.append(cur[i])
            elif improper.index(i) < j_pos:
                box.append(cur[i])
            else:
                box.append(prev[i])
        # the shell on axis j is one interval: between the previous and the current cut
        if segs[j].improper == "hi":
            piece = (prev[j][1], cur[j][1])
        else:
            piece = (cur[j][0], prev[j][0])
        box.insert(j, piece)
        boxes.append(tuple(box))
    return boxes


class _Integrator:
    def __init__(self, f, cfg: QuadConfig):
        self.f = f
        self.cfg = cfg

    def _guarded(self, *args):
        val = self.f(*args)
        if val != val:  # NaN
            raise EvaluationError(f"integrand returned NaN at {args}", point=args)
        return val

    def box(self, box) -> tuple[float, float]:
        if any(b - a <= 0 for a, b in box):
            return 0.0, 0.0
        cfg = self.cfg
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            if len(box) == 1:
                val, err = integrate.quad(self._guarded, box[0][0], box[0][1],
                                          epsabs=cfg.quad_epsabs, epsrel=cfg.quad_epsrel,
                                          limit=cfg.max_subdivisions)
            else:
                opts = {"epsabs": cfg.quad_epsabs, "epsrel": cfg.quad_epsrel,
                        "limit": cfg.max_subdivisions}
                val, err = integrate.nquad(self._guarded, list(box), opts=[opts] * len(box))
        return float(val), float(err)


def _growth_slope(xs, ys) -> float:
    ys = np.asarray(ys, float)
    if np.any(ys <= 0):
        return -math.inf
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _decay_rates(shells, base) -> list[float]:
    rates = []
    for a, b in zip(shells[:-1], shells[1:]):
        a, b = abs(a), abs(b)
        if a == 0 and b == 0:
            rates.append(math.inf)
        elif b == 0:
            rates.append(math.inf)
        elif a == 0:
            rates.append(-math.inf)
        else:
            rates.append(math.log(a / b) / math.log(base))
    return rates


def _tail_sum(shell: float, rates: Sequence[float], base: float) -> float:
    """Remainder after ``shell`` when the per-rung decay rates settle geometrically.

    The last two rate increments fix a contraction factor; future rates are
    extrapolated along it (Aitken) and the shells summed.
    """
    r = rates[-1]
    d1, d0 = rates[-1] - rates[-2], rates[-2] - rates[-3]
    if d0 != 0 and 0 < d1 / d0 < 0.9:
        rho = d1 / d0
        r_inf = r + d1 * rho / (1 - rho)
        j = np.arange(1, 4001)
        future = r_inf - (r_inf - r) * rho**j
        if np.any(future <= 0):
            return math.inf
        logs = -np.cumsum(future) * math.log(base)
        head = float(np.sum(np.exp(logs)))
        q = base ** (-r_inf)
        rest = math.exp(logs[-1]) * q / (1 - q)
        return shell * (head + rest)
    q = base ** (-r)
    return shell * q / (1.0 - q)


def _extrapolate(partial, shells, base: float, min_decay: float):
    """Extrapolated limit and its Cauchy error from the last two rungs, or None."""
    if len(shells) < 6:
        return None
    rates = _decay_rates(shells[-6:], base)
    if not all(math.isfinite(r) and r > min_decay for r in rates):
        return None
    now = partial[-1] + _tail_sum(shells[-1], rates[-3:], base)
    before = partial[-2] + _tail_sum(shells[-2], rates[-4:-1], base)
    if not (math.isfinite(now) and math.isfinite(before)):
        return None
    return now, abs(now - before)


def _ladder(integ: _Integrator, segs, cfg: QuadConfig, nonnegative: bool) -> Verdict:
    base = cfg.ladder_base
    scale = [base**k for k in range(cfg.ladder_max + 1)]
    first = tuple(s.truncated(0, base) for s in segs)
    total, qerr = integ.box(first)
    partial = [total]
    shells = [total]
    for k in range(1, cfg.ladder_max + 1):
        d = 0.0
        for box in _shell_boxes(segs, k, base):
            v, e = integ.box(box)
            d += v
            qerr += e
        total += d
        shells.append(d)
        partial.append(total)
        if not math.isfinite(total):
            return Verdict.infinite(math.inf, ladder=tuple(partial))
        if k < 3:
            continue
        tol = cfg.rel_tol * max(1.0, abs(total))
        if shells[-1] == 0 and shells[-2] == 0:
            return Verdict.finite(total, qerr, ladder=tuple(partial))
        rates = _decay_rates(shells[-4:], base)
        if all(r >= 2 for r in rates[-2:]) and abs(shells[-1]) <= 1e-3 * tol:
            return Verdict.finite(total, qerr + abs(shells[-1]), ladder=tuple(partial))
        ext = _extrapolate(partial, shells, base, cfg.min_decay)
        if ext is not None:
            value, err = ext[0], ext[1] + qerr
            if err <= 0.5 * cfg.rel_tol * max(1.0, abs(value)):
                return Verdict.finite(value, err, ladder=tuple(partial),
                                      detail={"tail": value - total})
        if k >= cfg.early_divergence_rung and all(r <= -0.25 for r in rates) and _rising(partial, nonnegative):
            slope = _growth_slope(scale[k - 3:k + 1], partial[-4:])
            if slope > cfg.divergence_slope:
                return Verdict.infinite(slope, ladder=tuple(partial))

    rates = _decay_rates(shells[-4:], base)
    slope = _growth_slope(scale[-4:], partial[-4:])
    if (_rising(partial, nonnegative) and all(r < cfg.min_decay for r in rates)
            and slope > cfg.divergence_slope):
        return Verdict.infinite(slope, ladder=tuple(partial))
    ext = _extrapolate(partial, shells, base, cfg.min_decay)
    if ext is not None:
        value, err = ext[0], ext[1] + qerr
        if err < cfg.rel_tol * max(1.0, abs(value)):
            return Verdict.finite(value, err, ladder=tuple(partial),
                                  detail={"tail": value - total})
        return Verdict.inconclusive(
            f"geometric tail not certified (decay {rates[-1]:.4g}, err {err:.3g})",
            ladder=tuple(partial), detail={"estimate": value, "err": err})
    return Verdict.inconclusive(
        f"no convergence pattern (decay rates {['%.3g' % r for r in rates]}, "
        f"growth slope {slope:.3g})", ladder=tuple(partial))


def _rising(partial, nonnegative) -> bool:
    tail = [abs(p) for p in partial[-4:]]
    if nonnegative:
        return all(b >= a for a, b in zip(tail[:-1], tail[1:])) and tail[-1] > tail[0]
    return tail[-1] > tail[0]


def _normalize_domain(domain):
    if len(domain) == 2 and all(np.isscalar(v) for v in domain):
        return [tuple(map(float, domain))]
    return [tuple(map(float, d)) for d in domain]


def _normalize_singular(singular, ndim, cfg):
    if singular is None:
        singular = cfg.singularities
    if isinstance(singular, dict):
        return [tuple(singular.get(i, ())) for i in range(ndim)]
    singular = tuple(singular)
    if ndim == 1 and all(np.isscalar(s) for s in singular):
        return [singular]
    out = [tuple(s) for s in singular]
    return out + [()] * (ndim - len(out))


def integrate_improper(f: Callable, domain, cfg: QuadConfig | None = None, *,
                       singular=None, nonnegative: bool = True, breaks=None) -> Verdict:
    """Integrate ``f`` over a (possibly unbounded) box of dimension <= 3.

    ``domain`` is ``(lo, hi)`` for one dimension or a list of such pairs;
    ``f`` takes one scalar per axis, in the same order.  ``singular`` lists
    known singular coordinates, either flat (1-d) or per axis (list of lists
    or ``{axis: points}``).  Set ``nonnegative=False`` for signed integrands
    that are absolutely integrable on bounded sub-boxes.  ``breaks`` (same
    layout as ``singular``) lists points where ``f`` jumps but stays bounded;
    they only split the domain.
    """
    cfg = cfg or DEFAULT_CONFIG
    dom = _normalize_domain(domain)
    if len(dom) > 3:
        raise ValueError("at most three dimensions are supported")
    sing = _normalize_singular(singular, len(dom), cfg)
    brk = _normalize_singular(breaks or (), len(dom), QuadConfig())
    axes = [_segments(lo, hi, s, b) for (lo, hi), s, b in zip(dom, sing, brk)]
    if any(not a for a in axes):
        return Verdict.finite(0.0)
    integ = _Integrator(f, cfg)
    pieces = []
    for segs in itertools.product(*axes):
        if all(s.improper is None for s in segs):
            v, e = integ.box(tuple((s.lo, s.hi) for s in segs))
            pieces.append(Verdict.finite(v, e))
        else:
            pieces.append(_ladder(integ, segs, cfg, nonnegative))
    return combine_sum(pieces)


def integrate_jump(g: Callable, spec, cfg: QuadConfig | None = None, *,
                   nonnegative: bool = True, breaks=()) -> Verdict:
    """Integrate ``g`` against a jump measure (atoms exactly, density by ladder).

    ``breaks`` are jump points of ``g`` (for example truncation bounds).
    """
    cfg = cfg or DEFAULT_CONFIG
    atom_part = math.fsum(m * float(g(y)) for y, m in spec.atoms)
    if not math.isfinite(atom_part):
        return Verdict.infinite(math.inf, reason="atom contribution not finite")
    if spec.density is None:
        return Verdict.finite(atom_part, 0.0)
    rho = spec.density
    lo, hi = spec.support
    singular = (0.0,)
    dens = integrate_improper(lambda y: g(y) * rho(y) if y != 0 else 0.0,
                              (lo, hi), cfg, singular=singular, nonnegative=nonnegative,
                              breaks=tuple(breaks))
    if dens.is_finite:
        return Verdict.finite(atom_part + dens.value, dens.err, ladder=dens.ladder)
    return dens


def bimeasure_integral(h1: Callable, h2: Callable, f: Callable, time_interval,
                       space_box, cfg: QuadConfig | None = None, *,
                       singular_times=()) -> Verdict:
    """Integrate h1(t,x) h2(t,x') f(x - x') over time x space x space (space 1-d).

    When ``h1 is h2`` only the half x' <= x is integrated and doubled.
    Inner spatial integrals whose magnitude is within their own quadrature
    error are taken as exactly zero.
    """
    cfg = cfg or DEFAULT_CONFIG
    (a, b) = space_box
    symmetric = h1 is h2
    opts = {"epsabs": cfg.quad_epsabs, "epsrel": cfg.quad_epsrel,
            "limit": cfg.max_subdivisions}
    if symmetric:
        ranges, factor = [lambda x, t: (a, x), (a, b)], 2.0
    else:
        ranges, factor = [(a, b), (a, b)], 1.0

    def g(xp, x, t):
        return h1(t, x) * h2(t, xp) * f(x - xp)

    probe = np.linspace(a, b, 17)

    def inner(t):
        # absolute tolerance scaled to the size of |g| on a coarse probe grid,
        # so that exact cancellations do not exhaust the subdivision budget
        scale = max(abs(g(xp, x, t)) for x in probe for xp in probe) * (b - a) ** 2
        o = dict(opts, epsabs=max(cfg.quad_epsabs, cfg.quad_epsrel * scale))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.nquad(g, ranges, args=(t,), opts=[o, o])
        if abs(val) <= 10 * err:
            return 0.0
        return factor * val

    return integrate_improper(inner, time_interval, cfg, singular=list(singular_times),
                              nonnegative=False)
