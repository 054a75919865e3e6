import shutil
import subprocess
import sys

import pytest

from stochpi.cli import main
from conftest import model_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", ["ex1", "fig1", "fig5", "cqn", "cqn2", "oqn"])
def test_check_every_model(capsys, name):
    code, out, _ = run(capsys, "check", model_path(name))
    assert code == 0 and "status: ok" in out


def test_step_example_one(capsys):
    code, out, _ = run(capsys, "step", model_path("ex1"), "--format", "kv")
    assert code == 0
    lines = out.splitlines()
    assert "markov.rate=5" in lines and "immediate=none" in lines
    probs = sorted(l.split("=", 1)[1].split()[0] for l in lines
                   if l.startswith("markov.") and l != "markov.rate=5")
    assert probs == ["2/15", "3/5", "4/15"]
    passive_m = sorted(l.split("=", 1)[1].split()[0] for l in lines
                       if l.startswith("passive.m."))
    assert passive_m == ["1/3", "2/3"]


def test_step_with_state(capsys):
    code, out, _ = run(capsys, "step", model_path("fig5"), "--state",
                       "c!<b1,inf:2>.0 | c!<b2,inf:3>.0 | c(x,1).c!<x,6>.0")
    assert code == 0 and "immediate.rate: 5" in out and "2/5 c!<b1>" in out


def test_inspect(capsys):
    code, out, _ = run(capsys, "inspect", model_path("ex1"))
    assert code == 0
    assert "mu.total: 5" in out and "gamma.m: 6" in out and "mu.n: 3" in out


def test_ctmc_to_stdout(capsys):
    code, out, err = run(capsys, "ctmc", model_path("fig5"), "--out", "-")
    assert code == 0
    assert out == "STATES 4\nTRANSITIONS 4\n0 1 4\n0 2 6\n1 3 6\n2 3 6\n"
    assert "states: 4" in err and "immediate_states: 5" in err and "stuck: no" in err


def test_ctmc_to_files(capsys, tmp_path):
    dot = tmp_path / "fig1.dot"
    code, out, _ = run(capsys, "ctmc", model_path("fig1"), "--out", str(dot))
    assert code == 0 and "states: 5" in out and dot.read_text().startswith("digraph")
    tra = tmp_path / "fig1.txt"
    run(capsys, "ctmc", model_path("fig1"), "--out", str(tra), "--export-format", "tra")
    assert tra.read_text().startswith("STATES 5")


def test_steady_and_transient(capsys):
    code, out, _ = run(capsys, "steady", model_path("cqn2"), "--format", "kv")
    assert code == 0 and "method=exact" in out and "pi.0=6/19 SQ1(1) | SQ2(1)" in out
    code, out, _ = run(capsys, "transient", model_path("fig5"), "--t", "0")
    assert code == 0 and "p.0: 1 " in out


def test_simulate_deterministic(capsys):
    args = ("simulate", model_path("fig1"), "--horizon", "5", "--seed", "3", "--format", "kv")
    first = run(capsys, *args)
    assert first[0] == 0 and first[1] == run(capsys, *args)[1]
    code, out, _ = run(capsys, "simulate", model_path("cqn2"), "--horizon", "3",
                       "--runs", "50")
    assert code == 0 and "runs: 50" in out


def test_missing_file(capsys):
    code, out, err = run(capsys, "steady", "missing.spi")
    assert code == 1 and out == ""
    assert "stochpi steady: missing.spi" in err


def test_model_error_has_location(capsys, tmp_path):
    bad = tmp_path / "bad.spi"
    bad.write_text("const A := A\nsystem A()\n")
    code, _, err = run(capsys, "check", str(bad))
    assert code == 1 and "line 1" in err and "bad.spi" in err


def test_state_cap_exit_code(capsys, monkeypatch):
    code, _, err = run(capsys, "ctmc", model_path("oqn"), "--state-cap", "50")
    assert code == 2 and "50" in err
    monkeypatch.setenv("STOCHPI_STATE_CAP", "20")
    assert run(capsys, "steady", model_path("oqn"))[0] == 2


def test_not_converged_exit_code(capsys, monkeypatch):
    import stochpi.cli as cli
    from stochpi.errors import NotConverged

    def boom(*a, **k):
        raise NotConverged("sparse solve inaccurate", 1e-3)
    monkeypatch.setattr(cli, "stationary", boom)
    assert run(capsys, "steady", model_path("fig1"))[0] == 3


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["check", model_path("fig1"), "--bogus"])
    assert exc.value.code == 2


@pytest.mark.skipif(shutil.which("stochpi") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["stochpi", "ctmc", model_path("fig5"), "--out", "-"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("STATES 4")
    r = subprocess.run([sys.executable, "-m", "stochpi.cli", "check", model_path("ex1")],
                       capture_output=True, text=True)
    assert r.returncode == 0
