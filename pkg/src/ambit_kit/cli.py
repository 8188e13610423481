"""Command-line interface: ``ambit-kit <subcommand> [options]``.

Exit codes: 0 success, 2 validation failure, 1 internal error, 64 usage error.
Results go to standard output as CSV with a header row (or into
``--out-dir``); logs go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .ambit import KernelSpec, evaluate_ambit, heat_lp_verdict
from .basis import BasisRealization, GridSpec, simulate_levy_basis, write_sample_csv
from .config import expression, load_integrand, load_triplet, parse_nu, parse_tau
from .errors import AmbitKitError, ConfigError
from .integrability import check_integrable
from .measures import validate_triplet
from .pushforward import cf_distance, pushforward_characteristics
from .quadrature import QuadConfig
from .rng import check_seed
from .volmod import (CogarchParams, SupCogarchParams, phi_max, phi_residual, simulate_cogarch,
                     simulate_supcogarch)

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("ambit_kit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class ValidationFailure(Exception):
    def __init__(self, violations):
        super().__init__(f"{len(violations)} violation(s)")
        self.violations = violations


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


class _Output:
    """CSV sink: a file in ``out_dir`` when given, otherwise standard output."""

    def __init__(self, args, default_name):
        self.path = None
        if args.out_dir:
            d = Path(args.out_dir)
            d.mkdir(parents=True, exist_ok=True)
            self.path = d / (args.output or default_name)

    def write(self, header, rows):
        fh = open(self.path, "w", newline="") if self.path else sys.stdout
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        finally:
            if self.path:
                fh.close()
                log.info("wrote %s", self.path)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _cfg(args) -> QuadConfig:
    kw = {}
    if args.rel_tol is not None:
        kw["rel_tol"] = args.rel_tol
    if args.ladder_max is not None:
        kw["ladder_max"] = args.ladder_max
    if args.divergence_slope is not None:
        kw["divergence_slope"] = args.divergence_slope
    try:
        return QuadConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _validated(path):
    tri = load_triplet(path)
    bad = validate_triplet(tri)
    if bad:
        raise ValidationFailure(bad)
    return tri


def _parse_grid(text: str, A):
    """``t0:t1:n_steps[:n_space]``."""
    try:
        parts = text.split(":")
        t0, t1, n = float(parts[0]), float(parts[1]), int(parts[2])
        ns = int(parts[3]) if len(parts) > 3 else 16
    except (ValueError, IndexError):
        raise UsageError(f"grid must look like t0:t1:n_steps[:n_space], got {text!r}") from None
    return GridSpec.from_control(A, t0, t1, n, ns)


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args):
    tri = _validated(args.triplet)
    H = load_integrand(args.integrand)
    tau = parse_tau(args.tau) if args.tau else None
    rep = check_integrable(H, tri, tau, _cfg(args))
    print(rep, file=sys.stderr)
    rows = [r + (rep.conjunction, str(rep.tau_used), rep.variant) for r in rep.rows()]
    _Output(args, "check.csv").write(
        ["condition", "outcome", "value", "err", "conjunction", "tau", "variant"], rows)


def cmd_pushforward(args):
    tri = _validated(args.triplet)
    H = load_integrand(args.integrand)
    tau = parse_tau(args.tau) if args.tau else None
    ns = pushforward_characteristics(tri, H, tau, _cfg(args))

    def rows():
        for t in _floats(args.times):
            spec = ns.jumps(t)
            atoms = ";".join(f"{y!r}@{m!r}" for y, m in spec.atoms)
            dens = spec.name if spec.density is not None else ""
            yield t, ns.drift(t), ns.gaussian(t), atoms, dens

    _Output(args, "pushforward.csv").write(
        ["t", "drift", "gaussian", "jump_atoms", "jump_density"], rows())


def cmd_cfcheck(args):
    tri = _validated(args.triplet)
    H = load_integrand(args.integrand)
    tau = parse_tau(args.tau) if args.tau else None
    rep = cf_distance(H, tri, tau, args.T, _floats(args.u), args.n, args.seed, _cfg(args),
                      n_steps=args.steps, eps=args.eps, threads=args.threads)
    log.info("sup distance %.3g, max z %.3g", rep.distance, rep.max_z)
    _Output(args, "cfcheck.csv").write(["u", "emp_re", "emp_im", "theo_re", "theo_im", "z"],
                                       (r.as_tuple() for r in rep.rows))


def cmd_simulate_basis(args):
    tri = _validated(args.triplet)
    grid = _parse_grid(args.grid, tri.A)
    r = simulate_levy_basis(tri, grid, args.eps, args.seed, small_jump_mode=args.small_jumps)
    cells, jumps = write_sample_csv(r, args.out_dir or ".", args.stem)
    print(f"{cells}\n{jumps}")


def _kernel(text: str) -> KernelSpec:
    kind, _, arg = text.partition(":")
    try:
        if kind == "heat":
            return KernelSpec.heat(int(arg or 1))
        if kind == "exponential":
            return KernelSpec.exponential(float(arg))
        if kind == "constant":
            return KernelSpec.constant(float(arg or 1.0))
        if kind == "expr":
            return KernelSpec.custom(expression(arg, ("t", "s", "x", "y")))
    except (ValueError, ConfigError) as exc:
        raise UsageError(f"bad kernel {text!r}: {exc}") from None
    raise UsageError(f"unknown kernel {text!r}")


def cmd_ambit(args):
    kernel = _kernel(args.kernel)
    space = None
    if args.space:
        space = tuple((x, 1.0) for x in _floats(args.space))
    r = BasisRealization.from_csv(args.cells, args.jumps, space)
    sigma = expression(args.sigma, ("s", "y")) if args.sigma else None
    queries = []
    for item in args.points.split(";"):
        vals = _floats(item)
        if len(vals) < 2:
            raise UsageError(f"query point {item!r} needs t,x")
        queries.append((vals[0], vals[1]))
    ys = evaluate_ambit(kernel, sigma, r, queries)
    _Output(args, "ambit.csv").write(["t", "x", "Y"],
                                     ((t, x, y) for (t, x), y in zip(queries, ys)))


def cmd_heat(args):
    v = heat_lp_verdict(args.p, args.d, args.t, 0.0, _cfg(args))
    print(f"verdict: {v}", file=sys.stderr)
    _Output(args, "heat.csv").write(
        ["d", "p", "threshold", "outcome", "value", "err_or_slope"],
        [(args.d, args.p, 1.0 + 2.0 / args.d, v.outcome, v.value,
          v.err if v.is_finite else v.slope)])


def cmd_cogarch(args):
    p = CogarchParams(args.beta, args.eta, args.phi, parse_nu(args.nu))
    path = simulate_cogarch(p, args.T, args.seed, args.v0)
    _Output(args, "cogarch.csv").write(["t", "V", "G"], path.rows(args.step))


def cmd_supcogarch(args):
    phis, probs = _floats(args.phis), _floats(args.probs)
    p = SupCogarchParams(args.beta, args.eta, phis, probs, parse_nu(args.nu))
    path = simulate_supcogarch(p, args.T, args.seed, args.v0)
    header = ["t", "Vbar"] + [f"V_phi={phi:g}" for phi in p.phis]
    _Output(args, "supcogarch.csv").write(header, path.rows(args.step))


def cmd_phimax(args):
    nu = parse_nu(args.nu)
    root = phi_max(nu, args.eta, args.tol)
    res = phi_residual(nu, args.eta, root) if math.isfinite(root) else math.nan
    _Output(args, "phimax.csv").write(["phi_max", "residual"], [(root, res)])


def cmd_selftest(args):
    only = set(int(v) for v in _floats(args.only)) if args.only else None
    results = acceptance.run_all(only, stream=sys.stdout)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_INVALID


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    def common_options(suppress):
        # subcommands repeat the global flags without overriding values given earlier
        def d(v):
            return argparse.SUPPRESS if suppress else v
        c = _Parser(add_help=False)
        g = c.add_argument_group("global options")
        g.add_argument("--seed", type=int, default=d(0), help="root seed (64-bit unsigned)")
        g.add_argument("--threads", type=int, default=d(1),
                       help="worker cap for Monte Carlo chunks")
        g.add_argument("--out-dir", default=d(None),
                       help="write CSV files here instead of stdout")
        g.add_argument("--output", default=d(None), help="file name inside --out-dir")
        g.add_argument("--rel-tol", type=float, default=d(None),
                       help="quadrature relative tolerance")
        g.add_argument("--ladder-max", type=int, default=d(None),
                       help="highest truncation rung")
        g.add_argument("--divergence-slope", type=float, default=d(None),
                       help="log-log growth slope above which a ladder is called divergent")
        g.add_argument("-v", "--verbose", action="store_true", default=d(False),
                       help="log progress to stderr")
        return c

    common = common_options(False)
    sub_common = common_options(True)

    parser = _Parser(prog="ambit-kit", parents=[common],
                     description="Integrability checks and simulation for space-time "
                                 "random measures.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[sub_common], help=help_text, description=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("check", cmd_check, "evaluate the three integrability conditions")
    p.add_argument("--triplet", required=True, help="triplet TOML file")
    p.add_argument("--integrand", required=True, help="integrand TOML file")
    p.add_argument("--tau", help="truncation: zero or standard:B (default: the triplet's)")

    p = add("pushforward", cmd_pushforward, "characteristics of H·M at sampled times")
    p.add_argument("--triplet", required=True)
    p.add_argument("--integrand", required=True)
    p.add_argument("--tau")
    p.add_argument("--times", default="0,0.5,1,2,5", help="comma-separated times")

    p = add("cfcheck", cmd_cfcheck, "empirical versus theoretical CF of (H·M)_T")
    p.add_argument("--triplet", required=True)
    p.add_argument("--integrand", required=True)
    p.add_argument("--tau")
    p.add_argument("--T", type=float, required=True, help="horizon")
    p.add_argument("--u", default="0.5,1,2", help="comma-separated CF arguments")
    p.add_argument("--n", type=int, default=10000, help="Monte Carlo paths")
    p.add_argument("--steps", type=int, default=50, help="time steps of the basis grid")
    p.add_argument("--eps", type=float, default=1e-3, help="small-jump cutoff")

    p = add("simulate-basis", cmd_simulate_basis, "simulate one Lévy basis realization")
    p.add_argument("--triplet", required=True)
    p.add_argument("--grid", required=True, help="t0:t1:n_steps[:n_space]")
    p.add_argument("--eps", type=float, default=1e-3, help="small-jump cutoff")
    p.add_argument("--small-jumps", choices=("diffusion_approx", "dropped"),
                   default="diffusion_approx")
    p.add_argument("--stem", default="basis", help="output file stem")

    p = add("ambit", cmd_ambit, "evaluate an ambit field on a saved realization")
    p.add_argument("--kernel", required=True,
                   help="heat:D | exponential:ETA | constant:C | expr:<h(t,s,x,y)>")
    p.add_argument("--cells", required=True, help="cells CSV from simulate-basis")
    p.add_argument("--jumps", required=True, help="jumps CSV from simulate-basis")
    p.add_argument("--points", required=True, help="queries 't,x;t,x;...'")
    p.add_argument("--sigma", help="volatility expression in s, y")
    p.add_argument("--space", help="coordinates of the space ids (default: the ids)")

    p = add("heat", cmd_heat, "L^p integrability of the heat kernel")
    p.add_argument("--d", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)

    for name, fn, text in (("cogarch", cmd_cogarch, "simulate a COGARCH path"),
                           ("supcogarch", cmd_supcogarch, "simulate a supCOGARCH path")):
        p = add(name, fn, text)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--eta", type=float, default=1.0)
        p.add_argument("--nu", default="atom:1:1", help="driver jump measure, e.g. atom:1:1")
        p.add_argument("--T", type=float, default=100.0)
        p.add_argument("--step", type=float, default=1.0, help="output grid step")
        p.add_argument("--v0", type=float, default=None, help="initial volatility")
        if name == "cogarch":
            p.add_argument("--phi", type=float, required=True)
        else:
            p.add_argument("--phis", required=True, help="comma-separated phi grid")
            p.add_argument("--probs", required=True, help="comma-separated weights")

    p = add("phimax", cmd_phimax, "upper end of the admissible phi range")
    p.add_argument("--nu", required=True, help="driver jump measure, e.g. atom:1:1")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("selftest", cmd_selftest, "run the reference acceptance experiments")
    p.add_argument("--only", help="comma-separated criterion numbers")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        check_seed(args.seed)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        code = args.func(args)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        print(f"ambit-kit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ValueError) as exc:
        print(f"ambit-kit: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AmbitKitError as exc:
        print(f"ambit-kit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"ambit-kit: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
