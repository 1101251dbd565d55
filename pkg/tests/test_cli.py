import subprocess
import sys

import pytest

from nldgraph import __version__
from nldgraph.cli import build_parser, main
from nldgraph.limit_harness import SWEEP_COLUMNS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def header_ok(out, seed=0):
    lines = out.splitlines()
    assert lines[0] == "# tool_version,config_hash,seed"
    version, digest, s = lines[1][2:].split(",")
    assert version == __version__ and len(digest) == 64 and s == str(seed)
    return lines[2:]


def error_line(err):
    line = err.strip().splitlines()[-1]
    tag, code, kind, _ = line.split(",", 3)
    assert tag == "error"
    return int(code), kind


def test_spectrum_segment(capsys):
    code, out, _ = run(capsys, "spectrum", "--graph", "segment", "--h", "0.01", "--count", "6")
    assert code == 0
    body = header_ok(out)
    assert body[0] == "graph,m,c,h,L_inf,index,eigenvalue"
    rows = [r.split(",") for r in body[1:]]
    assert len(rows) == 6
    vals = [float(r[-1]) for r in rows]
    assert vals == sorted(vals)
    assert all(abs(v) > 1.0 for v in vals)


def test_spectrum_laplacian(capsys):
    code, out, _ = run(capsys, "spectrum", "--graph", "segment", "--kind", "laplacian", "--lo", "-0.5",
                       "--hi", "0.5", "--count", "3")
    assert code == 0
    rows = header_ok(out)[1:]
    assert abs(float(rows[0].split(",")[-1])) < 1e-10


def test_solve_nld(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, "solve-nld", "--graph", "three_star", "--m", "1", "--c", "10", "--omega", "99.5",
                       "--p", "4", "--h", "0.02", "--out", str(path))
    assert code == 0 and out == ""
    lines = path.read_text().splitlines()
    header_ok("\n".join(lines))
    assert lines[-2] == "omega,c,residual,action,core_mass"
    omega, c, res, act, mass = map(float, lines[-1].split(","))
    assert omega == 99.5 and c == 10 and res <= 1e-10 and act > 0 and mass > 0


def test_solve_nld_outside_gap(capsys):
    code, out, err = run(capsys, "solve-nld", "--graph", "three_star", "--m", "1", "--c", "1", "--omega", "2",
                         "--p", "4")
    assert code == 2 and out == ""
    assert error_line(err) == (2, "validation_error")


def test_solve_nls(capsys):
    code, out, _ = run(capsys, "solve-nls", "--graph", "three_star", "--lambda", "-1", "--p", "4", "--h", "0.05")
    assert code == 0
    body = header_ok(out)
    assert body[0] == "edge,x,u"
    assert "halfline,amplitude,decay_rate" in body
    assert body[-2] == "lambda,residual,J"
    assert float(body[-1].split(",")[1]) <= 1e-10


def test_solve_nls_positive_lambda(capsys):
    code, _, err = run(capsys, "solve-nls", "--graph", "three_star", "--lambda", "1", "--p", "4")
    assert code == 2 and error_line(err)[0] == 2


def test_solver_failure_exit(capsys):
    code, _, err = run(capsys, "solve-nls", "--graph", "three_star", "--lambda", "-1", "--p", "4",
                       "--h", "0.05", "--max-iter", "0")
    assert code == 4
    assert error_line(err) == (4, "max_iterations_error")


def test_limit_sweep(capsys):
    code, out, _ = run(capsys, "limit-sweep", "--graph", "three_star", "--lambda", "-1", "--p", "4",
                       "--c-list", "8,16,32", "--h", "0.02")
    assert code == 0
    body = [l for l in header_ok(out) if not l.startswith("#")]
    assert body[0].split(",") == SWEEP_COLUMNS
    assert len(body) == 5
    assert body[-1].startswith("slope,")
    assert float(body[-1].split(",")[1]) == pytest.approx(-1.0, abs=0.1)


def test_limit_sweep_single(capsys):
    code, out, _ = run(capsys, "limit-sweep", "--graph", "three_star", "--lambda", "-1", "--p", "4",
                       "--c-list", "16", "--h", "0.05")
    assert code == 0
    assert out.splitlines()[-1] == "slope,none"


@pytest.mark.parametrize("c_list", ["8,4", "a,b", ""])
def test_limit_sweep_bad_c_list(capsys, c_list):
    code, _, err = run(capsys, "limit-sweep", "--graph", "three_star", "--lambda", "-1", "--p", "4",
                       "--c-list", c_list)
    assert code == 2 and error_line(err)[0] == 2


def test_parse_error_exit(capsys, tmp_path):
    f = tmp_path / "bad.graph"
    f.write_text("vertex a\nedge e a b 1.0\n")
    code, out, err = run(capsys, "spectrum", "--graph", str(f))
    assert code == 3 and out == ""
    assert error_line(err)[0] == 3


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "spectrum", "--graph", str(tmp_path / "nope.graph"))
    assert code == 2 and error_line(err)[0] == 2


@pytest.mark.parametrize("argv", [
    ["spectrum", "--graph", "segment", "--h", "-1"],
    ["spectrum", "--graph", "segment", "--count", "0"],
    ["spectrum", "--graph", "three_star", "--L-inf", "1"],
    ["spectrum", "--graph", "three_star", "--kind", "laplacian"],
    ["solve-nld", "--graph", "three_star", "--m", "1", "--c", "10", "--omega", "99.5", "--p", "2"],
    ["solve-nld", "--graph", "segment", "--m", "1", "--c", "10", "--omega", "99.5", "--p", "4"],
])
def test_validation_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert error_line(err)[0] == 2


def test_byte_identical(capsys):
    argv = ["solve-nls", "--graph", "tadpole", "--lambda", "-1.5", "--p", "3", "--h", "0.05", "--seed", "7"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    header_ok(a, seed=7)


def test_config_hash_changes(capsys):
    _, a, _ = run(capsys, "spectrum", "--graph", "segment", "--h", "0.05")
    _, b, _ = run(capsys, "spectrum", "--graph", "segment", "--h", "0.04")
    assert a.splitlines()[1] != b.splitlines()[1]


def test_check(capsys):
    code, out, _ = run(capsys, "check")
    assert code == 0
    body = header_ok(out)
    assert body[0] == "graph,check,value,threshold,status"
    assert body[-1].startswith("summary,checks,")
    assert body[-1].endswith(",0,pass")
    graphs = {r.split(",")[0] for r in body[1:-1]}
    assert {"segment", "three_star", "tadpole", "core_loop"} <= graphs
    assert all(r.endswith(",pass") for r in body[1:])


def test_help_documents_exit_codes():
    text = build_parser().format_help()
    for code in ("0", "2", "3", "4", "5"):
        assert f"  {code}  " in text
    for sub in ("spectrum", "solve-nld", "solve-nls", "limit-sweep", "check"):
        assert sub in text


@pytest.mark.parametrize("sub", ["spectrum", "solve-nld", "solve-nls", "limit-sweep", "check"])
def test_subcommand_help(sub, capsys):
    with pytest.raises(SystemExit) as ei:
        main([sub, "--help"])
    assert ei.value.code == 0
    out = capsys.readouterr().out
    assert "exit codes:" in out and "--seed" in out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nldgraph.cli", "spectrum", "--graph", "segment", "--count", "2",
                        "--h", "0.1"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("# tool_version,config_hash,seed\n")
