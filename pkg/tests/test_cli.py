import json

import pytest

from vsextic.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from vsextic.numerics.precision import cfmt
from vsextic.resolvent import pv_coeffs
from vsextic.solver import match_error, oracle_instance


@pytest.fixture(scope="module")
def inst(ref):
    return oracle_instance(ref, 1)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_text(table_path, inst, capsys):
    v1, v2 = (cfmt(v, 40) for v in inst.V)
    code, out, _ = run(["solve", "--v1", v1, "--v2", v2, "--tables", table_path], capsys)
    assert code == EXIT_OK
    assert out.count("root ") == 2 and "status   ok" in out


def test_solve_json_deterministic_and_correct(table_path, inst, capsys):
    from vsextic.numerics.precision import parse_complex

    v1, v2 = (cfmt(v, 60) for v in inst.V)
    argv = ["solve", "--v1", v1, "--v2", v2, "--tables", table_path, "--json", "--seed", 4]
    code, out1, _ = run(argv, capsys)
    _, out2, _ = run(argv, capsys)
    assert code == EXIT_OK and out1 == out2
    doc = json.loads(out1)
    assert set(doc) >= {"roots", "residuals", "point", "iterations", "retries", "seed", "status"}
    roots = [parse_complex(r) for r in doc["roots"]]
    assert match_error(roots, inst.roots) < 1e-10


def test_solve_sextic_file(table_path, inst, tmp_path, capsys):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"coeffs": [cfmt(c, 60) for c in pv_coeffs(*inst.V)]}))
    code, out, _ = run(["solve", "--sextic-file", f, "--tables", table_path], capsys)
    assert code == EXIT_OK


def test_solve_sextic_not_in_family(table_path, tmp_path, capsys):
    c = pv_coeffs(0.1, 0.2)
    c[5] = c[5] * 2
    f = tmp_path / "q.json"
    f.write_text(json.dumps({"coeffs": [cfmt(x, 40) for x in c]}))
    code, _, err = run(["solve", "--sextic-file", f, "--tables", table_path], capsys)
    assert code == EXIT_VERIFY and "not in the P_V family" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--v1", "abc", "--v2", "1"],
        ["solve", "--v1", "0.1"],
        ["solve", "--v1", "0.1", "--v2", "0.2", "--tol-line", "2"],
        ["frobnicate"],
        ["precompute", "--digits", "10", "--out", "/dev/null"],
        ["render-line", "--out", "/dev/null", "--res", "4"],
        ["oracle", "--count", "0"],
    ],
)
def test_usage_errors(argv, table_path, capsys):
    if argv[0] in ("solve", "oracle"):
        argv = argv + ["--tables", str(table_path)]
    code, _, _ = run(argv, capsys)
    assert code == EXIT_USAGE


def test_missing_table_file(tmp_path, capsys):
    code, _, _ = run(["solve", "--v1", "0.1", "--v2", "0.2", "--tables", tmp_path / "none.vsx"], capsys)
    assert code == EXIT_USAGE


def test_corrupt_table_file(table_path, tmp_path, capsys):
    bad = tmp_path / "bad.vsx"
    bad.write_text(table_path.read_text()[:1000])
    code, _, _ = run(["solve", "--v1", "0.1", "--v2", "0.2", "--tables", bad], capsys)
    assert code == EXIT_VERIFY


def test_negative_values_accepted(table_path, capsys):
    # leading minus signs must not be read as options
    code, out, _ = run(["solve", "--v1", "-0.3+0.1i", "--v2", "-0.2i", "--tables", table_path, "--json"], capsys)
    assert code in (EXIT_OK, EXIT_VERIFY)
    from vsextic.numerics.precision import parse_complex

    v = [complex(parse_complex(t)) for t in json.loads(out)["V"]]
    assert abs(v[0] - complex(-0.3, 0.1)) < 1e-15 and abs(v[1] - complex(0, -0.2)) < 1e-15


def test_oracle_small(table_path, capsys):
    code, out, _ = run(["oracle", "--count", 2, "--tables", table_path], capsys)
    assert code == EXIT_OK and "2/2 succeeded" in out


def test_render_line(tmp_path, capsys):
    out = tmp_path / "basins.ppm"
    code, text, _ = run(["render-line", "--out", out, "--res", 64, "--json"], capsys)
    assert code == EXIT_OK
    stats = json.loads(text)
    assert stats["labels_present"] == 16
    assert out.read_bytes()[:2] == b"P6"


def test_selftest_quick(capsys):
    code, out, _ = run(["selftest", "--level", "quick"], capsys)
    assert code == EXIT_OK
    assert "checks passed" in out


def test_help(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == EXIT_OK and "precompute" in out
