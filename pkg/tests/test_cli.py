import json
import subprocess
import sys

import pytest

from fieldmax.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_selftest(capsys):
    code, out, _ = _run(capsys, "selftest")
    assert code == 0 and out.splitlines()[-1] == "OK"
    assert out.count("PASS") >= 8


def test_simulate_twice_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        code, out, _ = _run(capsys, "simulate", "--model", "iid", "--n", "4x4", "--seed", "7", "--out", str(p))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 17


def test_simulate_choi_catalog(capsys):
    code, out, _ = _run(capsys, "simulate", "--model", "choi", "--n", "4x4")
    assert code == 0 and "model=choi" in out


def test_bad_grid_flag(capsys):
    code, out, err = _run(capsys, "simulate", "--n", "0x4")
    assert code == 1 and out.splitlines()[-1] == "ERROR 1"
    assert "--n" in err


def test_unknown_model(capsys):
    code, out, err = _run(capsys, "simulate", "--model", "nope", "--n", "4x4")
    assert code == 1 and "nope" in err


def test_argparse_error_exit_code():
    p = subprocess.run([sys.executable, "-m", "fieldmax", "simulate"], capture_output=True, text=True)
    assert p.returncode == 1 and p.stdout.strip().splitlines()[-1] == "ERROR 1"


def test_levels(tmp_path, capsys):
    code, out, _ = _run(capsys, "levels", "--n", "100x100", "--tau", "1", "--out", str(tmp_path / "l.csv"))
    assert code == 0
    base = float(out.split("base_level=")[1].split()[0])
    assert base == pytest.approx(3.71902, abs=1e-5)
    assert len((tmp_path / "l.csv").read_text().splitlines()) == 1 + 10000


def test_asclt_on_saved_field(tmp_path, capsys):
    f = tmp_path / "f.bin"
    _run(capsys, "simulate", "--n", "16x16", "--seed", "2", "--out", str(f))
    code, out, _ = _run(capsys, "asclt", "--field", str(f), "--summary", str(tmp_path / "s.csv"),
                        "--checkpoints", "4x4,16x16", "--trajectory", str(tmp_path / "t.csv"))
    assert code == 0 and "A_n[harmonic]=" in out
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1 + 2 * 2
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 1 + 256


def _check(capsys, *extra):
    code, out, _ = _run(capsys, "check", *extra)
    assert code == 0 and out.splitlines()[-1] == "OK"
    return json.loads("\n".join(out.splitlines()[:-1]))


def test_check_iid(capsys):
    rep = _check(capsys, "--model", "iid", "--gap", "--berman", "--dprime", "--gap-reps", "200")
    r = rep["reports"][0]
    assert r["berman_sup"] == 0.0 and r["gap"] <= 3 * r["gap_stderr"] + 1e-12
    # independence: k1 k2 c (c - 1) q^2 with c block cells and q = 1/1024
    cells = (32 // r["k_n"][0]) * (32 // r["k_n"][1])
    assert r["dprime_value"] == pytest.approx(r["k_n"][0] * r["k_n"][1] * cells * (cells - 1) / 1024 ** 2, rel=1e-9)
    assert rep["decay"]["passed"] == {"axis1": True, "axis2": True, "joint": True}


def test_check_expdecay_ladder(capsys, tmp_path):
    rep = _check(capsys, "--model", "expdecay:0.5", "--ladder", "8,16,32", "--out", str(tmp_path / "c.json"))
    assert rep["trends"]["berman_sup"] == "non-increasing"
    assert rep["trends"]["dprime_value"] == "non-increasing"
    assert json.loads((tmp_path / "c.json").read_text()) == rep


def test_check_choi_decay_flag(capsys):
    rep = _check(capsys, "--model", "choi", "--ladder", "8,16,32")
    assert rep["decay"]["passed"]["axis1"] is False


def test_experiment_command(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "e.toml"
    cfg.write_text('seed = 1\ntau = 1.0\nreps = 3\nn_ladder = ["8x8"]\n[model]\nspec = "iid"\n')
    code, out, _ = _run(capsys, "experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "o1"))
    assert code == 0 and "mean_A" in out
    monkeypatch.setenv("FIELDMAX_OUTPUT_DIR", str(tmp_path / "o2"))
    monkeypatch.setenv("FIELDMAX_THREADS", "3")
    code, _, _ = _run(capsys, "experiment", "--config", str(cfg))
    assert code == 0
    for name in ("trajectories.csv", "summary.csv", "conditions.json", "manifest.json"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()


def test_experiment_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "e.toml"
    cfg.write_text('seed = 1\ntau = 1.0\nreps = 3\nn_ladder = ["8x8"]\ncolour = "red"\n[model]\nspec = "iid"\n')
    code, out, err = _run(capsys, "experiment", "--config", str(cfg))
    assert code == 1 and "colour" in err


def test_internal_error_exit_two(capsys, monkeypatch):
    import fieldmax.cli as cli

    def boom(args):
        raise RuntimeError("broken")
    monkeypatch.setattr(cli, "cmd_selftest", boom)
    code, out, _ = _run(capsys, "selftest")
    assert code == 2 and out.splitlines()[-1] == "ERROR 2"


@pytest.mark.parametrize("sub,flag", [("simulate", "--method"), ("levels", "--offsets"), ("asclt", "--checkpoints"),
                                      ("check", "--ladder"), ("experiment", "--workers"), ("selftest", "--help")])
def test_help_lists_flags(sub, flag):
    p = subprocess.run([sys.executable, "-m", "fieldmax", sub, "--help"], capture_output=True, text=True)
    assert p.returncode == 0 and flag in p.stdout
