"""Characteristics of the integral process H·M and Monte Carlo cross-checks.

For an orthogonal triplet the process ``t -> int_{(0,t] x E} H dM`` has
null-spatial characteristics

* drift ``int_E [H b + int (tau(H y) - H tau(y)) K(dy)] A(dx)``,
* Gaussian density ``int_E H^2 c A(dx)``,
* jump kernel: the image of ``K`` under ``y -> H y``, aggregated over space.

Spatial aggregation is a finite mixture of image measures, one per spatial
cell of the control measure.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .basis import GridSpec, BasisRealization, simulate_basis_sample, DIFFUSION
from .errors import NotIntegrableError
from .integrability import INCONCLUSIVE, NOT_INTEGRABLE, IntegrandSpec, check_integrable
from .measures import (CharacteristicTriplet, ControlMeasure, JumpMeasureSpec, Orthogonal,
                       Region, SpaceMeasure, TimeMeasure, TruncationFunction, jump_exponent,
                       retruncate)
from .quadrature import DEFAULT_CONFIG, QuadConfig, integrate_jump
from .rng import child_seed

CHUNK = 20000


@dataclass(frozen=True)
class NullSpatialTriplet:
    """Time-only characteristic densities against ``time``."""

    drift: Callable = field(compare=False)
    gaussian: Callable = field(compare=False)
    jumps: Callable = field(compare=False)
    time: TimeMeasure = TimeMeasure()
    tau: TruncationFunction = TruncationFunction()

    def unit_exponent(self, t: float, u: float, cfg=None) -> complex:
        return (1j * u * self.drift(t) - 0.5 * u * u * self.gaussian(t)
                + jump_exponent(self.jumps(t), u, self.tau, cfg))

    def exponent(self, u: float, t0: float, t1: float, cfg=None, *, points=None) -> complex:
        """``int_{t0}^{t1} psi_t(u) time(dt)`` by adaptive quadrature."""
        if u == 0 or t1 <= t0:
            return 0j
        w = self.time.weight
        a, b = max(t0, self.time.interval[0]), min(t1, self.time.interval[1])
        parts = []
        for k in (0, 1):
            def g(t, k=k):
                z = w(t) * self.unit_exponent(t, u, cfg)
                return z.real if k == 0 else z.imag
            parts.append(integrate.quad(g, a, b, limit=400, epsabs=1e-12, epsrel=1e-11,
                                        points=points)[0])
        return complex(*parts)

    def to_triplet(self) -> CharacteristicTriplet:
        return CharacteristicTriplet(
            b=lambda t, x: self.drift(t),
            gaussian=Orthogonal(lambda t, x: self.gaussian(t)),
            K=lambda t, x: self.jumps(t),
            A=ControlMeasure(self.time, SpaceMeasure.point()),
            tau=self.tau)

    def retruncate(self, tau: TruncationFunction, cfg=None) -> "NullSpatialTriplet":
        old = self.tau

        def drift(t):
            v = integrate_jump(lambda y: tau(y) - old(y), self.jumps(t), cfg, nonnegative=False,
                               breaks=tau.breaks + old.breaks)
            if not v.is_finite:
                raise ValueError(f"retruncation shift not finite at t={t}: {v}")
            return self.drift(t) + v.value

        return NullSpatialTriplet(drift, self.gaussian, self.jumps, self.time, tau)

    def rows(self, times: Sequence[float]):
        """(t, drift, gaussian, jump description) for display."""
        for t in times:
            yield t, self.drift(t), self.gaussian(t), str(self.jumps(t))


def _space_cells(A: ControlMeasure, n_space_cells: int):
    return list(A.space.cells(n_space_cells))


def pushforward_characteristics(triplet: CharacteristicTriplet, H: IntegrandSpec,
                                tau: TruncationFunction | None = None,
                                cfg: QuadConfig | None = None, *, check: bool = True,
                                n_space_cells: int = 16) -> NullSpatialTriplet:
    """Characteristics of H·M stated against ``tau``."""
    cfg = cfg or DEFAULT_CONFIG
    if triplet.is_colored:
        raise ValueError("pushforward needs an orthogonal triplet")
    tau = tau or triplet.tau
    if tau != triplet.tau:
        triplet = retruncate(triplet, tau, cfg)
    if check:
        report = check_integrable(H, triplet, tau, cfg)
        if report.conjunction == NOT_INTEGRABLE:
            raise NotIntegrableError(f"integrand {H.name or H} is not integrable:\n{report}")
        if report.conjunction == INCONCLUSIVE:
            warnings.warn("integrability is inconclusive; pushing forward anyway", stacklevel=2)
    cells = _space_cells(triplet.A, n_space_cells)
    tri = triplet

    def drift(t):
        total = []
        for x, w in cells:
            h = H(t, x)
            if h == 0 or w == 0:
                continue
            val = h * tri.drift(t, x)
            spec = tri.jumps(t, x)
            if tau.is_proper and h != 1 and not spec.is_zero:
                v = integrate_jump(lambda y: tau(h * y) - h * tau(y), spec, cfg,
                                   nonnegative=False,
                                   breaks=tau.breaks + tuple(b / abs(h) for b in tau.breaks))
                if not v.is_finite:
                    raise ValueError(f"pushforward drift integral not finite at t={t}: {v}")
                val += v.value
            total.append(w * val)
        return math.fsum(total)

    def gaussian(t):
        return math.fsum(w * H(t, x) ** 2 * tri.variance(t, x) for x, w in cells if w != 0)

    def jumps(t):
        specs, weights = [], []
        for x, w in cells:
            h = H(t, x)
            if h == 0 or w == 0:
                continue
            spec = tri.jumps(t, x)
            specs.append(spec if h == 1 else spec.image(h))
            weights.append(w)
        if not specs:
            return JumpMeasureSpec.zero()
        if len(specs) == 1 and weights[0] == 1:
            return specs[0]
        return JumpMeasureSpec.mixture(specs, weights)

    return NullSpatialTriplet(drift, gaussian, jumps, triplet.A.time, tau)


def simple_integral(S: Sequence[tuple[float, Region]], realization: BasisRealization) -> float:
    """``sum a_i M(A_i)`` for cell-aligned regions."""
    cells = realization.cell_values()
    return math.fsum(a * float(cells[realization.grid.cells_in(r)].sum()) for a, r in S)


@dataclass
class PathIntegral:
    """Paths of ``(H·M)_t`` at the grid time edges; ``values`` has shape (n_paths, n_steps+1)."""

    times: np.ndarray
    values: np.ndarray
    seed: int

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[:, -1]


def _path_chunk(H: IntegrandSpec, triplet, grid: GridSpec, eps, seed, n, mode):
    sample = simulate_basis_sample(triplet, grid, eps, seed, n, small_jump_mode=mode)
    e = grid.edges
    mids = 0.5 * (e[:-1] + e[1:])
    h_cell = np.array([H(mids[i], grid.space[j][0])
                       for i in range(grid.n_steps) for j in range(grid.n_space)])
    contrib = (sample.gaussian + sample.small + sample.drift[None, :]) * h_cell[None, :]
    if len(sample.jump_sizes):
        xs = [grid.space[c % grid.n_space][0] for c in sample.jump_cells]
        hj = np.fromiter((H(t, x) for t, x in zip(sample.jump_times, xs)), float,
                         count=len(xs))
        flat = sample.jump_rep * grid.n_cells + sample.jump_cells
        contrib += np.bincount(flat, weights=hj * sample.jump_sizes,
                               minlength=n * grid.n_cells).reshape(contrib.shape)
    per_step = contrib.reshape(n, grid.n_steps, grid.n_space).sum(axis=2)
    return np.concatenate([np.zeros((n, 1)), np.cumsum(per_step, axis=1)], axis=1)


def simulate_path_integral(H: IntegrandSpec, triplet: CharacteristicTriplet, T: float,
                           n_steps: int = 100, seed: int = 0, n_paths: int = 1,
                           eps: float = 1e-3, *, n_space_cells: int = 16,
                           small_jump_mode: str = DIFFUSION, threads: int = 1,
                           chunk: int = CHUNK) -> PathIntegral:
    """Simulate ``(H·M)_t`` on ``[t0, T]`` where t0 is the start of the control time axis.

    Replications are generated in fixed-size chunks, each with a seed derived
    from the root seed, so results do not depend on ``threads``.
    """
    t0 = triplet.A.time.interval[0]
    grid = GridSpec.from_control(triplet.A, t0, T, n_steps, n_space_cells)
    sizes = [min(chunk, n_paths - k) for k in range(0, n_paths, chunk)]
    jobs = [(child_seed(seed, i), m) for i, m in enumerate(sizes)]

    def run(job):
        return _path_chunk(H, triplet, grid, eps, job[0], job[1], small_jump_mode)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return PathIntegral(grid.edges, np.concatenate(parts, axis=0), int(seed))


@dataclass(frozen=True)
class CFRow:
    u: float
    emp: complex
    theo: complex
    se_re: float
    se_im: float

    @property
    def z(self) -> float:
        def one(d, se):
            if se > 0:
                return abs(d) / se
            return 0.0 if abs(d) <= 1e-12 else math.inf
        d = self.emp - self.theo
        return max(one(d.real, self.se_re), one(d.imag, self.se_im))

    def as_tuple(self):
        return (self.u, self.emp.real, self.emp.imag, self.theo.real, self.theo.imag, self.z)


@dataclass(frozen=True)
class CFReport:
    rows: tuple
    n_samples: int

    @property
    def distance(self) -> float:
        return max(abs(r.emp - r.theo) for r in self.rows)

    @property
    def max_z(self) -> float:
        return max(r.z for r in self.rows)


def cf_distance(H: IntegrandSpec, triplet: CharacteristicTriplet,
                tau: TruncationFunction | None, T: float, u_grid: Sequence[float],
                n_samples: int, seed: int = 0, cfg: QuadConfig | None = None, *,
                n_steps: int = 50, eps: float = 1e-3, threads: int = 1,
                n_space_cells: int = 16) -> CFReport:
    """Empirical CF of ``(H·M)_T`` against the exponent of the pushed-forward triplet."""
    paths = simulate_path_integral(H, triplet, T, n_steps, seed, n_samples, eps,
                                   n_space_cells=n_space_cells, threads=threads)
    x = paths.endpoint
    ns = pushforward_characteristics(triplet, H, tau, cfg, n_space_cells=n_space_cells)
    t0 = triplet.A.time.interval[0]
    pts = [s for s in H.singular_times if t0 < s < T] or None
    rows = []
    n = len(x)
    for u in u_grid:
        z = np.exp(1j * u * x)
        se_re = float(z.real.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        se_im = float(z.imag.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        theo = complex(np.exp(ns.exponent(u, t0, T, cfg, points=pts)))
        rows.append(CFRow(float(u), complex(z.mean()), theo, se_re, se_im))
    return CFReport(tuple(rows), n)
