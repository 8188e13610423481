"""TOML configuration for triplets and integrands, plus compact CLI specs.

Scalar fields accept numbers or short expressions in the variables ``t``,
``x`` (and ``z`` for covariance kernels) using the functions of ``math``.
Expressions are parsed and restricted to arithmetic, comparisons,
conditional expressions and calls of whitelisted functions.
"""

from __future__ import annotations

import ast
import math
from pathlib import Path
from typing import Callable

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .integrability import IntegrandSpec
from .measures import (CharacteristicTriplet, Colored, ControlMeasure, JumpMeasureSpec,
                       Orthogonal, SpaceMeasure, TimeMeasure, TripletFlags, TruncationFunction)

_FUNCS = {name: getattr(math, name) for name in (
    "sin", "cos", "tan", "exp", "log", "log1p", "expm1", "sqrt", "sinh", "cosh", "tanh",
    "atan", "floor", "ceil", "erf", "gamma")}
_FUNCS.update(abs=abs, min=min, max=max)
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.IfExp,
          ast.Call, ast.Name, ast.Load, ast.Constant, ast.operator, ast.unaryop, ast.boolop,
          ast.cmpop)


def expression(src: str, variables=("t", "x")) -> Callable:
    """Compile ``src`` into a function of ``variables``."""
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {src!r}: {exc.msg}") from None
    allowed = set(variables) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"expression {src!r}: {type(node).__name__} is not allowed")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ConfigError(f"expression {src!r}: unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ConfigError(f"expression {src!r}: only plain function calls are allowed")
    code = compile(tree, "<expr>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def f(*args):
        return float(eval(code, env, dict(zip(variables, args))))

    f.__doc__ = src
    return f


def _scalar_or_expr(v, variables=("t", "x")):
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return expression(v, variables)
    raise ConfigError(f"expected a number or expression, got {v!r}")


def _num(v) -> float:
    if isinstance(v, str):
        return float(v.replace("infinity", "inf"))
    return float(v)


def parse_tau(text: str) -> TruncationFunction:
    """``zero`` or ``standard:B``."""
    kind, _, arg = text.partition(":")
    if kind == "zero":
        return TruncationFunction.zero()
    if kind == "standard":
        return TruncationFunction.standard(float(arg) if arg else 1.0)
    raise ConfigError(f"unknown truncation {text!r}; use zero or standard:B")


def parse_nu(text: str) -> JumpMeasureSpec:
    """Comma-separated parts: ``atom:SIZE:MASS``, ``stable:ALPHA[:SCALE[:BOUND]]``,
    ``tilt:ALPHA:LAMBDA[:SCALE]`` or ``zero``."""
    parts = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, *args = item.split(":")
        try:
            vals = [float(a) for a in args]
        except ValueError:
            raise ConfigError(f"bad number in jump measure {item!r}") from None
        if name == "zero":
            parts.append(JumpMeasureSpec.zero())
        elif name == "atom" and len(vals) == 2:
            if vals[0] == 0:
                raise ConfigError("atom at zero")
            parts.append(JumpMeasureSpec.atom(*vals))
        elif name == "stable" and 1 <= len(vals) <= 3:
            parts.append(JumpMeasureSpec.stable_alpha(*vals))
        elif name == "tilt" and 2 <= len(vals) <= 3:
            parts.append(JumpMeasureSpec.exponential_tilt(*vals))
        else:
            raise ConfigError(f"cannot parse jump measure {item!r}")
    if not parts:
        return JumpMeasureSpec.zero()
    if len(parts) == 1:
        return parts[0]
    return JumpMeasureSpec.mixture(parts, [1.0] * len(parts))


def _jumps(section) -> JumpMeasureSpec:
    atoms = [(float(a["size"]), float(a["mass"])) for a in section.get("atom", [])]
    spec = JumpMeasureSpec(atoms=tuple(atoms), name="atoms") if atoms else JumpMeasureSpec.zero()
    dens = section.get("density")
    if dens is None:
        return spec
    kw = {k: v for k, v in dens.items() if k != "name"}
    name = dens.get("name")
    try:
        if name == "stable_alpha":
            d = JumpMeasureSpec.stable_alpha(**kw)
        elif name == "exponential_tilt":
            d = JumpMeasureSpec.exponential_tilt(**kw)
        else:
            raise ConfigError(f"unknown jump density {name!r}")
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
    if spec.is_zero:
        return d
    return JumpMeasureSpec.mixture([spec, d], [1.0, 1.0])


def _control(section) -> ControlMeasure:
    tsec = section.get("time", {})
    interval = tuple(_num(v) for v in tsec.get("interval", (0.0, math.inf)))
    dens = tsec.get("density")
    time = TimeMeasure(interval, expression(dens, ("t",)) if isinstance(dens, str) else None)
    ssec = section.get("space", {})
    kind = ssec.get("kind", "point")
    if kind == "point":
        space = SpaceMeasure.point()
    elif kind == "grid":
        space = SpaceMeasure.finite_grid(ssec["cells"], ssec["weights"])
    elif kind == "probability":
        space = SpaceMeasure.probability(ssec["atoms"], ssec["probs"])
    elif kind == "lebesgue":
        space = SpaceMeasure.lebesgue([tuple(_num(v) for v in b) for b in ssec["box"]])
    else:
        raise ConfigError(f"unknown space measure kind {kind!r}")
    return ControlMeasure(time, space)


def triplet_from_dict(cfg: dict) -> CharacteristicTriplet:
    b = _scalar_or_expr(cfg.get("drift", {}).get("b", 0.0))
    g = cfg.get("gaussian", {})
    if g.get("kind", "orthogonal") == "colored":
        gaussian = Colored(expression(g["f"], ("z",)), name=g["f"])
    else:
        gaussian = Orthogonal(_scalar_or_expr(g.get("c", 0.0)))
    K = _jumps(cfg.get("jumps", {}))
    A = _control(cfg.get("control", {}))
    tr = cfg.get("truncation", {})
    kind = tr.get("kind", "standard")
    tau = parse_tau(kind if kind == "zero" else f"standard:{tr.get('bound', 1.0)}")
    fl = cfg.get("flags", {})
    flags = TripletFlags(orthogonal=fl.get("orthogonal", not isinstance(gaussian, Colored)),
                         different_discontinuity_times=fl.get("different_discontinuity_times",
                                                              True),
                         no_fixed_discontinuities=fl.get("no_fixed_discontinuities", True),
                         one_signed=fl.get("one_signed", False))
    return CharacteristicTriplet(b, gaussian, K, A, flags, tau)


def integrand_from_dict(cfg: dict) -> IntegrandSpec:
    sec = cfg.get("integrand", cfg)
    if "H" not in sec:
        raise ConfigError("integrand config needs an H entry")
    H = _scalar_or_expr(sec["H"])
    if not callable(H):
        c = H
        H = lambda t, x: c  # noqa: E731
    sigma = sec.get("sigma")
    support = sec.get("support")
    return IntegrandSpec(H, tuple(_num(v) for v in sec.get("singular_times", ())),
                         tuple(_num(v) for v in support) if support else None,
                         expression(sigma) if isinstance(sigma, str) else None,
                         sec.get("name", str(sec["H"])))


def _load(path) -> dict:
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).parent / "data" / p.name
        if bundled.exists():
            p = bundled
        else:
            raise ConfigError(f"config file {path} not found")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None


def load_triplet(path) -> CharacteristicTriplet:
    """Read a triplet; bare file names also resolve against the bundled examples."""
    try:
        return triplet_from_dict(_load(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def load_integrand(path) -> IntegrandSpec:
    try:
        return integrand_from_dict(_load(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def bundled_configs() -> list[str]:
    return sorted(p.name for p in (Path(__file__).parent / "data").glob("*.toml"))
