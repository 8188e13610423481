import csv
import io
import math
import subprocess
import sys

import pytest

from ambit_kit.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, run

SUBCOMMANDS = ["check", "pushforward", "cfcheck", "simulate-basis", "ambit", "heat",
               "cogarch", "supcogarch", "phimax", "selftest"]


def csv_rows(text):
    lines = [ln for ln in text.splitlines() if "," in ln]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help(cmd, capsys):
    assert run([cmd, "--help"]) == EXIT_OK
    assert "--seed" in capsys.readouterr().out


def test_top_level_help(capsys):
    assert run(["--help"]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(c in out for c in SUBCOMMANDS)


def test_phimax(capsys):
    assert run(["phimax", "--nu", "atom:1:1", "--eta", "1"]) == EXIT_OK
    row = csv_rows(capsys.readouterr().out)[0]
    assert float(row["phi_max"]) == pytest.approx(math.e - 1, abs=1e-12)
    assert abs(float(row["residual"])) < 1e-12


def test_check_integrable(capsys):
    code = run(["check", "--triplet", "remark_h0.toml", "--integrand", "inv1pt.toml",
                "--tau", "standard:1"])
    assert code == EXIT_OK
    rows = csv_rows(capsys.readouterr().out)
    assert {r["condition"] for r in rows} == {"cond1", "cond2", "cond3"}
    assert all(r["conjunction"] == "Integrable" for r in rows)


def test_heat_infinite_is_success(capsys):
    assert run(["heat", "--d", "2", "--p", "2.1"]) == EXIT_OK
    row = csv_rows(capsys.readouterr().out)[0]
    assert row["outcome"] == "infinite" and float(row["threshold"]) == 2.0


def test_heat_finite(capsys):
    assert run(["heat", "--d", "2", "--p", "1.9"]) == EXIT_OK
    assert csv_rows(capsys.readouterr().out)[0]["outcome"] == "finite"


@pytest.mark.parametrize("argv", [
    ["phimax", "--nu", "atom:1:1", "--eta", "1", "--bogus"],
    ["nosuchcommand"],
    ["heat", "--d", "4", "--p", "1.5"],
    ["phimax", "--nu", "atom:1:1"],
    ["cogarch", "--phi", "0.1", "--threads", "0"],
])
def test_usage_errors(argv):
    assert run(argv) == EXIT_USAGE


@pytest.mark.parametrize("seed", ["-1", str(2 ** 64)])
def test_seed_out_of_range(seed):
    assert run(["cogarch", "--phi", "0.1", "--seed", seed]) == EXIT_INVALID


def test_bad_triplet(tmp_path):
    p = tmp_path / "neg.toml"
    p.write_text("[gaussian]\nc = -1.0\n")
    assert run(["check", "--triplet", str(p), "--integrand", "inv1pt.toml"]) == EXIT_INVALID


def test_unparsable_triplet(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("[gaussian\n")
    assert run(["check", "--triplet", str(p), "--integrand", "inv1pt.toml"]) == EXIT_INVALID


def test_inadmissible_phi():
    assert run(["supcogarch", "--phis", "0.5,2", "--probs", "0.5,0.5"]) == EXIT_INVALID


def _read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_basis_reproducible(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["simulate-basis", "--triplet", "stable_basis.toml", "--grid", "0:1:20:4",
                    "--seed", "7", "--out-dir", str(d)]) == EXIT_OK
        outs.append(_read_all(d))
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"basis_cells.csv", "basis_jumps.csv"}


def test_cogarch_reproducible(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["cogarch", "--phi", "0.3", "--T", "50", "--seed", "11",
                    "--out-dir", str(d)]) == EXIT_OK
        outs.append(_read_all(d))
    assert outs[0] == outs[1]
    run(["cogarch", "--phi", "0.3", "--T", "50", "--seed", "12", "--out-dir",
         str(tmp_path / "other")])
    assert _read_all(tmp_path / "other") != outs[0]


def test_supcogarch_columns(capsys):
    assert run(["supcogarch", "--phis", "0.1,0.3", "--probs", "0.5,0.5", "--T", "5"]) == EXIT_OK
    rows = csv_rows(capsys.readouterr().out)
    assert list(rows[0]) == ["t", "Vbar", "V_phi=0.1", "V_phi=0.3"]


def test_ambit_from_basis(tmp_path, capsys):
    assert run(["simulate-basis", "--triplet", "poisson_unit.toml", "--grid", "0:5:50:1",
                "--seed", "3", "--out-dir", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    assert run(["ambit", "--kernel", "constant:1", "--cells",
                str(tmp_path / "basis_cells.csv"), "--jumps", str(tmp_path / "basis_jumps.csv"),
                "--points", "5,0"]) == EXIT_OK
    row = csv_rows(capsys.readouterr().out)[0]
    assert float(row["Y"]) >= 0.0


def test_selftest_single(capsys):
    assert run(["selftest", "--only", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[PASS] 3." in out and "1/1 criteria passed" in out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "ambit_kit.cli", "phimax", "--nu",
                          "atom:1:2", "--eta", "1"], capture_output=True, text=True, timeout=60)
    assert res.returncode == 0
    assert float(csv_rows(res.stdout)[0]["phi_max"]) == pytest.approx(math.expm1(0.5))
