import math

import pytest

from ambit_kit.config import (bundled_configs, expression, integrand_from_dict, load_integrand,
                              load_triplet, parse_nu, parse_tau, triplet_from_dict)
from ambit_kit.errors import ConfigError
from ambit_kit.measures import Colored, validate_triplet


class TestExpression:
    def test_arithmetic(self):
        f = expression("exp(-t) * (1 + x**2) if t > 0 else 0")
        assert f(1.0, 2.0) == pytest.approx(5 * math.exp(-1))
        assert f(-1.0, 2.0) == 0.0

    def test_constants(self):
        assert expression("pi + e", ("t",))(0.0) == pytest.approx(math.pi + math.e)

    @pytest.mark.parametrize("src", [
        "t.__class__",
        "__import__('os')",
        "open('x')",
        "y + 1",
        "(lambda: 1)()",
        "[t for t in x]",
        "math.sin(t)",
    ])
    def test_rejected(self, src):
        with pytest.raises(ConfigError):
            expression(src)

    def test_syntax_error(self):
        with pytest.raises(ConfigError, match="cannot parse"):
            expression("1 +")


class TestParsers:
    def test_tau(self):
        assert parse_tau("zero").kind == "zero"
        t = parse_tau("standard:2")
        assert t.bound == 2.0 and t(1.5) == 1.5 and t(2.5) == 0.0
        assert parse_tau("standard").bound == 1.0
        with pytest.raises(ConfigError):
            parse_tau("smooth:1")

    def test_nu_atom(self):
        nu = parse_nu("atom:1:2")
        assert nu.atoms == ((1.0, 2.0),) and nu.density is None

    def test_nu_mixture(self):
        nu = parse_nu("atom:1:1, stable:0.5")
        assert nu.atoms == ((1.0, 1.0),) and nu.density is not None
        assert nu.alpha0 == 0.5

    def test_nu_zero(self):
        assert parse_nu("zero").is_zero and parse_nu("").is_zero

    @pytest.mark.parametrize("text", ["atom:0:1", "atom:1", "stable:x", "gamma:1:1"])
    def test_nu_bad(self, text):
        with pytest.raises(ConfigError):
            parse_nu(text)


class TestTriplets:
    def test_from_dict(self):
        tri = triplet_from_dict({
            "drift": {"b": "-exp(-t)"},
            "gaussian": {"c": 0.5},
            "jumps": {"atom": [{"size": 2.0, "mass": 0.5}]},
            "control": {"time": {"interval": [0, "inf"]}},
        })
        assert tri.drift(1.0) == pytest.approx(-math.exp(-1))
        assert tri.variance(0.0) == 0.5
        assert tri.jumps(0.0).atoms == ((2.0, 0.5),)
        assert tri.A.time.interval == (0.0, math.inf)
        assert validate_triplet(tri) == []

    def test_colored(self):
        tri = triplet_from_dict({"gaussian": {"kind": "colored", "f": "exp(-abs(z))"}})
        assert isinstance(tri.gaussian, Colored) and tri.is_colored
        assert not tri.flags.orthogonal

    def test_unknown_density(self):
        with pytest.raises(ConfigError):
            triplet_from_dict({"jumps": {"density": {"name": "gamma"}}})

    def test_unknown_space(self):
        with pytest.raises(ConfigError):
            triplet_from_dict({"control": {"space": {"kind": "sphere"}}})

    def test_integrand_constant(self):
        H = integrand_from_dict({"integrand": {"H": 2.0}})
        assert H.H(3.0, 0.0) == 2.0

    def test_integrand_needs_H(self):
        with pytest.raises(ConfigError):
            integrand_from_dict({"integrand": {}})

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_triplet("/nonexistent/nothing.toml")

    def test_bad_toml(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[drift\nb = 1")
        with pytest.raises(ConfigError):
            load_triplet(p)


@pytest.mark.parametrize("name", bundled_configs())
def test_bundled_configs_load(name):
    try:
        obj = load_triplet(name)
    except ConfigError:
        obj = load_integrand(name)
        assert callable(obj.H)
    else:
        assert validate_triplet(obj) == []
