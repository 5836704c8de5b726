import io
import json

import pytest

from opmeans import cli, spd_core
from opmeans.cli import format_number, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write_matrix(path, dim, data):
    path.write_text(json.dumps({"dim": dim, "data": data}))
    return str(path)


def test_format_number():
    assert format_number(3.0) == "3.0000000000000000"
    assert format_number(0.0) == "0.0000000000000000"
    assert format_number(-1.5) == "-1.5000000000000000"
    assert format_number(10.0) == "10.000000000000000"
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(1e20) == "1.0000000000000000e+20"
    assert format_number(1.2345e-7) == "1.2345000000000001e-07"
    for v in (3.0, 0.1, 2 / 3, 1e-5, 123456.789, 9.999999999999999e15):
        text = format_number(v)
        assert float(text) == v
        digits = text.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(digits) == 17, text


def test_classify_log_json():
    code, out, err = call("classify", "--func", "log", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "PMI" and doc["function"] == "log"


def test_classify_text_and_neither_exit_code(monkeypatch):
    code, out, _ = call("classify", "--func", "harmonic:0.5")
    assert code == 0 and out.splitlines()[0] == "PMD"
    code, out, _ = call("classify", "--func", 'expr:"x^0.5*exp(0.01*log(x)*log(x)*log(x)/(1+log(x)*log(x)))"')
    assert code in (0, 1, 2)


def test_eval_examples():
    code, out, _ = call("eval", "--func", "power:0,0.5", "--x", "9")
    assert code == 0 and out == "3.0000000000000000\n"
    code, out, _ = call("eval", "--func", 'expr:"(x-1)/log(x)"', "--x", "2,4")
    assert code == 0
    assert [float(v) for v in out.split()] == pytest.approx([1.4426950408889634, 2.1640425613334453], rel=1e-15)
    code, _, err = call("eval", "--func", "log", "--x", "-1")
    assert code == 2 and "positive" in err


def test_fit_then_eval_measure(tmp_path):
    path = tmp_path / "mu.json"
    code, out, _ = call("fit", "--func", "log", "--kernel-t", "0", "--atoms", "64", "--out", str(path), "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["residual"] <= 1e-6 and doc["first_moment"] == pytest.approx(0.5, abs=1e-3)
    code, out, _ = call("eval", "--measure", str(path), "--kernel-t", "0", "--x", "2")
    assert code == 0 and float(out) == pytest.approx(1.4426950408889634, rel=1e-9)
    code, out2, _ = call("eval", "--func", f"measure:{path},t=0", "--x", "2")
    assert code == 0 and out2 == out


def test_fit_outside_cone_exits_one(tmp_path):
    code, _, err = call("fit", "--func", "harmonic:0.5", "--kernel-t", "0", "--atoms", "16", "--grid-lo", "0.1", "--grid-hi", "10")
    assert code == 1 and "not in C_0" in err


def test_matmean(tmp_path):
    a = write_matrix(tmp_path / "a.json", 2, [4, 0, 0, 16])
    b = write_matrix(tmp_path / "b.json", 2, [1, 0, 0, 1])
    code, out, _ = call("matmean", "--func", "geometric:0.5", "--a", a, "--b", b)
    assert code == 0
    m = spd_core.matrix_from_json(json.loads(out))
    assert m.tolist() == [[2.0, 0.0], [0.0, 4.0]]
    bad = write_matrix(tmp_path / "bad.json", 2, [1, 2, 3, 1])
    code, _, err = call("matmean", "--func", "geometric:0.5", "--a", bad, "--b", b)
    assert code == 2 and "symmetric" in err
    p = write_matrix(tmp_path / "p.json", 2, [1, 0, 0, 0])
    code, out, err = call("matmean", "--func", "arithmetic:0.5", "--a", p, "--b", b, "--psd")
    assert code == 0 and "gap" in err


def test_verify_geometric_passes_and_json_is_single_document():
    code, out, err = call("verify", "ando-hiai", "--func", "geometric:0.5", "--trials", "30", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["violations"] == 0 and doc["total"] == 30
    assert "elapsed" in err and "elapsed" not in out


def test_verify_violation_exits_one_with_counterexample():
    code, out, _ = call("verify", "ando-hiai", "--func", "log", "--trials", "50", "--seed", "1")
    assert code == 1 and "counterexample trial=" in out


def test_verify_harmonic_ando_hiai_documented_example():
    # Documented usage: harmonic under ando-hiai, 100 trials, seed 1, exits 1.
    code, out, _ = call("verify", "ando-hiai", "--func", "harmonic:0.5", "--trials", "100", "--seed", "1")
    assert code == 1 and "counterexample" in out


def test_axioms_subcommand_and_alias():
    a = call("axioms", "--func", "log", "--trials", "10", "--json")
    b = call("verify", "axioms", "--func", "log", "--trials", "10", "--json")
    assert a[0] == b[0] == 0 and a[1] == b[1]


def test_seed_environment_override(monkeypatch):
    base = call("verify", "dual", "--func", "log", "--trials", "10", "--seed", "5", "--json")[1]
    monkeypatch.setenv(cli.SEED_ENV, "5")
    overridden = call("verify", "dual", "--func", "log", "--trials", "10", "--seed", "0", "--json")[1]
    assert json.loads(overridden)["config"]["seed"] == 5
    assert overridden == base
    monkeypatch.setenv(cli.SEED_ENV, "abc")
    assert call("verify", "dual", "--func", "log", "--trials", "1")[0] == 2


def test_output_is_byte_identical_across_runs():
    argv = ("verify", "dual", "--func", "identric", "--trials", "20", "--dims", "2-4", "--r", "1.5,2")
    assert call(*argv)[1] == call(*argv)[1]


def test_scan_csv():
    code, out, _ = call("scan", "--func", "log", "--r", "2", "--grid-points", "5", "--csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x,r,gap" and len(lines) == 5


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nope"],
        ["classify"],
        ["classify", "--func", "log", "--bogus"],
        ["classify", "--func", "bogus"],
        ["classify", "--func", 'expr:"x^2"'],
        ["classify", "--func", 'expr:"x +"'],
        ["verify", "sideways", "--func", "log"],
        ["verify", "ando-hiai", "--func", "log", "--r", "0.5"],
        ["eval", "--func", "log"],
        ["matmean", "--func", "log", "--a", "/nonexistent", "--b", "/nonexistent"],
    ],
)
def test_usage_errors_exit_two(argv):
    code, out, err = call(*argv)
    assert code == 2 and out == "" and err


def test_help_exits_zero():
    assert call("--help")[0] == 0
