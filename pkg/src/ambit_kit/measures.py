"""Truncation functions, jump measures, control measures and characteristic triplets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import ColoredUnsupported, NonFiniteRegion

INF = math.inf


# ---------------------------------------------------------------------------
# truncation


@dataclass(frozen=True)
class TruncationFunction:
    """Bounded function equal to the identity near zero.

    ``standard(b)`` is ``y * 1{|y| < b}``; ``zero()`` is the improper
    truncation used for measures with summable jumps.
    """

    kind: str = "standard"
    bound: float = 1.0
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("standard", "zero", "custom"):
            raise ValueError(f"unknown truncation kind {self.kind!r}")
        if self.kind != "zero" and not self.bound > 0:
            raise ValueError("truncation bound must be positive")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom truncation needs a callable")

    @classmethod
    def standard(cls, bound: float = 1.0) -> "TruncationFunction":
        return cls("standard", float(bound))

    @classmethod
    def zero(cls) -> "TruncationFunction":
        return cls("zero", 0.0)

    @classmethod
    def custom(cls, func: Callable, bound: float) -> "TruncationFunction":
        return cls("custom", float(bound), func)

    @property
    def is_proper(self) -> bool:
        return self.kind != "zero"

    @property
    def breaks(self) -> tuple:
        """Points where the truncation function jumps."""
        return (-self.bound, self.bound) if self.kind == "standard" else ()

    def __call__(self, y):
        if self.kind == "standard":
            if isinstance(y, (float, int)):
                return float(y) if abs(y) < self.bound else 0.0
            y = np.asarray(y, dtype=float)
            out = np.where(np.abs(y) < self.bound, y, 0.0)
            return float(out) if out.ndim == 0 else out
        if self.kind == "zero":
            return 0.0 * np.asarray(y, dtype=float) if np.ndim(y) else 0.0
        return self.func(y)

    def __str__(self):
        return "zero" if self.kind == "zero" else f"{self.kind}:{self.bound:g}"


# ---------------------------------------------------------------------------
# jump measures


def _stable_density(alpha, scale, bound, two_sided):
    def rho(y):
        a = np.abs(np.asarray(y, dtype=float))
        inside = (a > 0) & (a <= bound)
        if not two_sided:
            inside &= np.asarray(y) > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside, scale * a ** (-1.0 - alpha), 0.0)
        return float(out) if out.ndim == 0 else out
    return rho


def _tempered_density(alpha, lam, scale, two_sided):
    def rho(y):
        a = np.abs(np.asarray(y, dtype=float))
        inside = a > 0
        if not two_sided:
            inside &= np.asarray(y) > 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(inside, scale * a ** (-1.0 - alpha) * np.exp(-lam * a), 0.0)
        return float(out) if out.ndim == 0 else out
    return rho


@dataclass(frozen=True)
class JumpMeasureSpec:
    """Lévy-type measure: finitely many atoms plus an optional density.

    ``alpha0`` declares ``rho(y) ~ |y|**(-1-alpha0)`` near zero and
    ``alpha_inf`` the power decay of the tails (``inf`` for exponential or
    bounded support).  ``support`` bounds the density.
    """

    atoms: tuple = ()
    density: Callable | None = field(default=None, compare=False)
    alpha0: float | None = None
    alpha_inf: float | None = None
    support: tuple = (-INF, INF)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(y), float(m)) for y, m in self.atoms))

    @classmethod
    def zero(cls) -> "JumpMeasureSpec":
        return cls(name="zero")

    @classmethod
    def atom(cls, size: float, mass: float) -> "JumpMeasureSpec":
        return cls(atoms=((size, mass),), name=f"atom({size:g},{mass:g})")

    @classmethod
    def stable_alpha(cls, alpha: float, scale: float = 1.0, bound: float = 1.0,
                     two_sided: bool = True) -> "JumpMeasureSpec":
        lo = -bound if two_sided else 0.0
        return cls(density=_stable_density(alpha, scale, bound, two_sided), alpha0=alpha,
                   alpha_inf=INF, support=(lo, bound),
                   name=f"stable_alpha(alpha={alpha:g},scale={scale:g},bound={bound:g})")

    @classmethod
    def exponential_tilt(cls, alpha: float, lam: float, scale: float = 1.0,
                         two_sided: bool = True) -> "JumpMeasureSpec":
        lo = -INF if two_sided else 0.0
        return cls(density=_tempered_density(alpha, lam, scale, two_sided), alpha0=alpha,
                   alpha_inf=INF, support=(lo, INF),
                   name=f"exponential_tilt(alpha={alpha:g},lam={lam:g},scale={scale:g})")

    @property
    def is_zero(self) -> bool:
        return self.density is None and all(m == 0 for _, m in self.atoms)

    @property
    def atom_mass(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    def rho(self, y):
        if self.density is None:
            return 0.0 * np.asarray(y, dtype=float)
        return self.density(y)

    def image(self, h: float) -> "JumpMeasureSpec":
        """Image measure under ``y -> h*y`` (mass at ``h*y = 0`` is dropped)."""
        if h == 0:
            return JumpMeasureSpec.zero()
        atoms = tuple((h * y, m) for y, m in self.atoms)
        if self.density is None:
            return replace(self, atoms=atoms, name=f"image({self.name},{h:g})")
        rho = self.density

        def dens(z):
            return rho(np.asarray(z, dtype=float) / h) / abs(h)

        lo, hi = sorted((h * self.support[0], h * self.support[1]))
        return JumpMeasureSpec(atoms, dens, self.alpha0, self.alpha_inf, (lo, hi),
                               f"image({self.name},{h:g})")

    def scaled(self, c: float) -> "JumpMeasureSpec":
        atoms = tuple((y, c * m) for y, m in self.atoms)
        if self.density is None:
            return replace(self, atoms=atoms)
        rho = self.density
        return replace(self, atoms=atoms, density=lambda y: c * rho(y))

    @classmethod
    def mixture(cls, specs: Sequence["JumpMeasureSpec"], weights: Sequence[float]
                ) -> "JumpMeasureSpec":
        """Weighted sum of jump measures; atoms at equal sizes are merged."""
        merged: dict[float, float] = {}
        dens = []
        for s, w in zip(specs, weights):
            if w == 0:
                continue
            for y, m in s.atoms:
                if y != 0:
                    merged[y] = merged.get(y, 0.0) + w * m
            if s.density is not None:
                dens.append((s, w))
        atoms = tuple(sorted(merged.items()))
        if not dens:
            return cls(atoms=atoms, name="mixture")
        if len(dens) == 1 and dens[0][1] == 1.0:
            s = dens[0][0]
            return replace(s, atoms=atoms)

        def rho(y):
            return sum(w * s.density(y) for s, w in dens)

        lo = min(s.support[0] for s, _ in dens)
        hi = max(s.support[1] for s, _ in dens)
        a0 = [s.alpha0 for s, _ in dens if s.alpha0 is not None]
        return cls(atoms, rho, max(a0) if a0 else None, None, (lo, hi), "mixture")

    def __str__(self):
        return self.name or f"JumpMeasure(atoms={self.atoms})"


# ---------------------------------------------------------------------------
# control measures


@dataclass(frozen=True)
class TimeMeasure:
    interval: tuple = (0.0, INF)
    density: Callable | None = field(default=None, compare=False)

    @classmethod
    def lebesgue(cls, t0: float = 0.0, t1: float = INF) -> "TimeMeasure":
        return cls((float(t0), float(t1)))

    def weight(self, t) -> float:
        return 1.0 if self.density is None else float(self.density(t))

    def mass(self, a: float, b: float) -> float:
        a, b = max(a, self.interval[0]), min(b, self.interval[1])
        if b <= a:
            return 0.0
        if self.density is None:
            return b - a
        if math.isinf(a) or math.isinf(b):
            from .quadrature import integrate_improper
            v = integrate_improper(self.density, (a, b))
            return v.value if v.is_finite else INF
        return integrate.quad(self.density, a, b, limit=200)[0]


@dataclass(frozen=True)
class SpaceMeasure:
    """Spatial factor of a control measure.

    ``kind="points"`` covers finite grids and probability atoms: ``points``
    are representative locations carrying ``weights``.  ``kind="lebesgue"``
    is Lebesgue measure on ``box`` (one pair per dimension).
    """

    kind: str = "points"
    points: tuple = (0.0,)
    weights: tuple = (1.0,)
    box: tuple = ()

    @classmethod
    def point(cls) -> "SpaceMeasure":
        return cls()

    @classmethod
    def finite_grid(cls, cells, weights) -> "SpaceMeasure":
        if len(cells) != len(weights):
            raise ValueError("cells and weights differ in length")
        return cls("points", tuple(_as_point(c) for c in cells), tuple(map(float, weights)))

    @classmethod
    def probability(cls, atoms, probs) -> "SpaceMeasure":
        if not math.isclose(sum(probs), 1.0, rel_tol=1e-9):
            raise ValueError("probability weights must sum to one")
        return cls.finite_grid(atoms, probs)

    @classmethod
    def lebesgue(cls, box) -> "SpaceMeasure":
        box = tuple((float(a), float(b)) for a, b in box)
        return cls("lebesgue", (), (), box)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "points"

    @property
    def dim(self) -> int:
        if self.is_discrete:
            p = self.points[0]
            return 1 if np.isscalar(p) else len(p)
        return len(self.box)

    @property
    def total(self) -> float:
        if self.is_discrete:
            return math.fsum(self.weights)
        return math.prod(b - a for a, b in self.box)

    def cells(self, n_per_dim: int = 16):
        """Midpoint discretization: list of (point, weight)."""
        if self.is_discrete:
            return list(zip(self.points, self.weights))
        if any(math.isinf(a) or math.isinf(b) for a, b in self.box):
            raise NonFiniteRegion("cannot discretize an unbounded spatial box")
        axes = []
        for a, b in self.box:
            edges = np.linspace(a, b, n_per_dim + 1)
            axes.append((0.5 * (edges[:-1] + edges[1:]), np.diff(edges)))
        out = []
        for idx in np.ndindex(*(n_per_dim,) * len(self.box)):
            pt = tuple(float(axes[d][0][i]) for d, i in enumerate(idx))
            w = math.prod(float(axes[d][1][i]) for d, i in enumerate(idx))
            out.append((pt[0] if len(pt) == 1 else pt, w))
        return out


def _as_point(c):
    if np.isscalar(c):
        return float(c)
    c = tuple(float(v) for v in c)
    return c[0] if len(c) == 1 else c


@dataclass(frozen=True)
class ControlMeasure:
    time: TimeMeasure = TimeMeasure()
    space: SpaceMeasure = SpaceMeasure()

    @classmethod
    def null_spatial(cls, t0: float = 0.0, t1: float = INF) -> "ControlMeasure":
        return cls(TimeMeasure.lebesgue(t0, t1), SpaceMeasure.point())

    def mass(self, region: "Region | None" = None) -> float:
        region = region or Region(self.time.interval)
        tm = self.time.mass(*region.time)
        sm = self.space_mass(region.space)
        if tm == 0 or sm == 0:
            return 0.0
        return tm * sm

    def space_mass(self, space) -> float:
        if space is None:
            return self.space.total
        if self.space.is_discrete:
            return math.fsum(self.space.weights[i] for i in space)
        own = self.space.box
        m = 1.0
        for (a, b), (c, d) in zip(space, own):
            m *= max(0.0, min(b, d) - max(a, c))
        return m


@dataclass(frozen=True)
class Region:
    """Product set: a time interval times a spatial selection.

    ``space`` is ``None`` (all of space), a tuple of point indices for
    discrete spatial measures, or a box for Lebesgue space.
    """

    time: tuple = (0.0, INF)
    space: tuple | None = None


# ---------------------------------------------------------------------------
# triplets


@dataclass(frozen=True)
class Orthogonal:
    c: Union[float, Callable] = 0.0

    def __call__(self, t, x) -> float:
        return float(self.c(t, x)) if callable(self.c) else float(self.c)


@dataclass(frozen=True)
class Colored:
    """Spatially homogeneous covariance ``f(x - x')``, white in time."""

    f: Callable = field(compare=False)
    name: str = ""


@dataclass(frozen=True)
class TripletFlags:
    orthogonal: bool = True
    different_discontinuity_times: bool = True
    no_fixed_discontinuities: bool = True
    # the measure is positive (or negative); makes the tau=0 conditions necessary
    one_signed: bool = False


@dataclass(frozen=True)
class CharacteristicTriplet:
    """Densities (b, c or f, K) of the characteristics against a control measure A."""

    b: Union[float, Callable] = 0.0
    gaussian: Union[Orthogonal, Colored] = Orthogonal(0.0)
    K: Union[JumpMeasureSpec, Callable] = JumpMeasureSpec()
    A: ControlMeasure = ControlMeasure()
    flags: TripletFlags = TripletFlags()
    tau: TruncationFunction = TruncationFunction()

    def drift(self, t, x=0.0) -> float:
        return float(self.b(t, x)) if callable(self.b) else float(self.b)

    def variance(self, t, x=0.0) -> float:
        if isinstance(self.gaussian, Colored):
            raise ColoredUnsupported("colored Gaussian part has no pointwise variance density")
        return self.gaussian(t, x)

    def jumps(self, t, x=0.0) -> JumpMeasureSpec:
        return self.K if isinstance(self.K, JumpMeasureSpec) else self.K(t, x)

    @property
    def is_colored(self) -> bool:
        return isinstance(self.gaussian, Colored)

    @property
    def is_homogeneous(self) -> bool:
        """Constant densities in (t, x)."""
        return (not callable(self.b) and isinstance(self.K, JumpMeasureSpec)
                and isinstance(self.gaussian, Orthogonal) and not callable(self.gaussian.c))

    @property
    def has_jumps(self) -> bool:
        return not (isinstance(self.K, JumpMeasureSpec) and self.K.is_zero)

    @property
    def has_gaussian(self) -> bool:
        if self.is_colored:
            return True
        return callable(self.gaussian.c) or self.gaussian.c != 0


def retruncate(triplet: CharacteristicTriplet, tau: TruncationFunction, cfg=None
               ) -> CharacteristicTriplet:
    """Same random measure stated against another truncation function.

    Only the drift changes: ``b + int (tau_new - tau_old) dK``.
    """
    from .quadrature import integrate_jump

    old = triplet.tau
    if not triplet.has_jumps:
        return replace(triplet, tau=tau)

    def shift(spec):
        v = integrate_jump(lambda y: tau(y) - old(y), spec, cfg, nonnegative=False,
                           breaks=tau.breaks + old.breaks)
        if not v.is_finite:
            raise ValueError(f"retruncation shift not finite: {v}")
        return v.value

    if isinstance(triplet.K, JumpMeasureSpec) and not callable(triplet.b):
        return replace(triplet, b=float(triplet.b) + shift(triplet.K), tau=tau)

    base = triplet

    def b_new(t, x):
        return base.drift(t, x) + shift(base.jumps(t, x))

    return replace(triplet, b=b_new, tau=tau)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    message: str
    point: tuple | None = None

    def __str__(self):
        return self.message if self.point is None else f"{self.message} at {self.point}"


def _time_samples(interval, n):
    a, b = interval
    if math.isinf(a) and math.isinf(b):
        return [0.0, -1.0, 1.0, -10.0, 10.0, 100.0, -100.0][:max(n, 3)]
    if math.isinf(b):
        return [a + d for d in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0)][:max(n, 3)]
    if math.isinf(a):
        return [b - d for d in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0)][:max(n, 3)]
    return list(np.linspace(a, b, n))


def sample_points(A: ControlMeasure, n_time: int = 8, n_space: int = 8):
    ts = _time_samples(A.time.interval, n_time)
    if A.space.is_discrete:
        xs = list(A.space.points[:n_space])
    else:
        grids = [np.linspace(a if math.isfinite(a) else -10.0, b if math.isfinite(b) else 10.0,
                             max(2, int(round(n_space ** (1 / len(A.space.box))))))
                 for a, b in A.space.box]
        xs = [p[0] if len(p) == 1 else tuple(p) for p in
              (tuple(float(v) for v in c) for c in np.array(np.meshgrid(*grids)).reshape(
                  len(grids), -1).T)]
    return [(float(t), x) for t in ts for x in xs]


def validate_jump_measure(spec: JumpMeasureSpec, cfg=None, point=None) -> list[Violation]:
    from .quadrature import integrate_jump

    out = []
    for y, m in spec.atoms:
        if y == 0:
            out.append(Violation("atom at zero", point))
        if not m > 0:
            out.append(Violation("non-positive atom mass", point))
    if spec.density is not None:
        lo, hi = spec.support
        probe = [v for v in np.concatenate([-np.logspace(-6, 3, 19), np.logspace(-6, 3, 19)])
                 if lo <= v <= hi]
        if any(float(spec.density(v)) < 0 for v in probe):
            out.append(Violation("negative jump density", point))
    if out:
        return out
    v = integrate_jump(lambda y: min(1.0, y * y), spec, cfg)
    if v.is_infinite:
        out.append(Violation("∫(1∧y²)dν diverges", point))
    elif v.is_inconclusive:
        out.append(Violation(f"∫(1∧y²)dν undecided: {v.reason}", point))
    return out


def validate_triplet(triplet: CharacteristicTriplet, cfg=None, n_time: int = 8,
                     n_space: int = 8) -> list[Violation]:
    """Every violated invariant, with the sample point witnessing it."""
    out: list[Violation] = []
    A = triplet.A
    if A.space.is_discrete and any(w < 0 for w in A.space.weights):
        out.append(Violation("negative spatial weight"))
    if not A.space.is_discrete and any(b <= a for a, b in A.space.box):
        out.append(Violation("empty spatial box"))
    tau = triplet.tau
    if tau.is_proper:
        probe = np.linspace(-tau.bound / 2, tau.bound / 2, 41) * 0.999
        if np.max(np.abs(np.asarray([tau(y) for y in probe]) - probe)) > 1e-12:
            out.append(Violation("truncation is not the identity near zero"))
        wide = np.linspace(-100 * tau.bound, 100 * tau.bound, 401)
        if np.max(np.abs([tau(y) for y in wide])) > tau.bound:
            out.append(Violation("truncation exceeds its bound"))
        if tau(0.0) != 0:
            out.append(Violation("truncation nonzero at zero"))

    points = sample_points(A, n_time, n_space)
    if triplet.is_colored:
        if triplet.flags.orthogonal:
            out.append(Violation("colored Gaussian part flagged orthogonal"))
        f = triplet.gaussian.f
        for z in np.linspace(0.05, 10.0, 25):
            if not math.isclose(f(z), f(-z), rel_tol=1e-9, abs_tol=1e-12):
                out.append(Violation("covariance kernel not symmetric", (float(z),)))
                break
        for z in np.linspace(-10.0, 10.0, 51):
            if f(z) < 0:
                out.append(Violation("covariance kernel negative", (float(z),)))
                break
    else:
        for t, x in points:
            if triplet.variance(t, x) < 0:
                out.append(Violation("negative Gaussian density c", (t, x)))
                break

    seen = set()
    for t, x in points:
        spec = triplet.jumps(t, x)
        if id(spec) in seen:
            continue
        seen.add(id(spec))
        out += validate_jump_measure(spec, cfg, (t, x))
        if len(seen) > 64:
            break
    return out


# ---------------------------------------------------------------------------
# Lévy-Khintchine exponent


def jump_exponent(spec: JumpMeasureSpec, u: float, tau: TruncationFunction, cfg=None) -> complex:
    """``int (e^{iuy} - 1 - iu tau(y)) spec(dy)``."""
    from .quadrature import integrate_jump

    if u == 0 or spec.is_zero:
        return 0j
    re = integrate_jump(lambda y: math.cos(u * y) - 1.0, spec, cfg, nonnegative=False)
    im = integrate_jump(lambda y: math.sin(u * y) - u * tau(y), spec, cfg, nonnegative=False,
                        breaks=tau.breaks)
    if not (re.is_finite and im.is_finite):
        raise ValueError(f"Lévy-Khintchine jump integral not finite: {re}, {im}")
    return complex(re.value, im.value)


def unit_exponent(triplet: CharacteristicTriplet, t, x, u: float, cfg=None) -> complex:
    """Exponent density per unit of control mass at (t, x)."""
    return (1j * u * triplet.drift(t, x) - 0.5 * u * u * triplet.variance(t, x)
            + jump_exponent(triplet.jumps(t, x), u, triplet.tau, cfg))


def levy_khintchine_exponent(triplet: CharacteristicTriplet, region: Region, u: float,
                             cfg=None) -> complex:
    """psi(u) with E exp(iu M(region)) = exp(psi(u)) for an independently scattered basis."""
    if triplet.is_colored:
        raise ColoredUnsupported("exponent per region needs an orthogonal Gaussian part")
    A = triplet.A
    mass = A.mass(region)
    if not math.isfinite(mass):
        raise NonFiniteRegion(f"region {region} has infinite control mass")
    if u == 0 or mass == 0:
        return 0j
    if triplet.is_homogeneous:
        return mass * unit_exponent(triplet, 0.0, 0.0, u, cfg)

    t0, t1 = max(region.time[0], A.time.interval[0]), min(region.time[1], A.time.interval[1])
    w = A.time.weight
    if A.space.is_discrete:
        idx = range(len(A.space.points)) if region.space is None else region.space
        total = 0j
        for i in idx:
            x, wx = A.space.points[i], A.space.weights[i]
            re = integrate.quad(lambda t: (w(t) * unit_exponent(triplet, t, x, u, cfg)).real,
                                t0, t1, limit=200)[0]
            im = integrate.quad(lambda t: (w(t) * unit_exponent(triplet, t, x, u, cfg)).imag,
                                t0, t1, limit=200)[0]
            total += wx * complex(re, im)
        return total
    box = region.space or A.space.box
    box = [(max(a, c), min(b, d)) for (a, b), (c, d) in zip(box, A.space.box)]

    def part(which):
        def g(*args):
            t, xs = args[-1], args[:-1]
            x = xs[0] if len(xs) == 1 else tuple(xs)
            z = w(t) * unit_exponent(triplet, t, x, u, cfg)
            return z.real if which == 0 else z.imag
        return integrate.nquad(g, list(box) + [(t0, t1)])[0]

    return complex(part(0), part(1))
