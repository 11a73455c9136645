import numpy as np
import pytest

from tumor_control import io
from tumor_control.cli import EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, main

SMALL = ["--set", "nx=11", "--set", "nt=672"]


def test_feasibility_exit_codes(capsys):
    assert main(["feasibility"]) == EXIT_OK
    assert "feasible" in capsys.readouterr().out
    assert main(["feasibility", "--set", "t0=0.1"]) == EXIT_INFEASIBLE


def test_simulate_zero_control(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--preset", "zero-control", "--out", str(out)] + SMALL) == EXIT_OK
    _, s = io.read_csv(out / "s.csv")
    assert np.all(s[:, 1] == 0.0)
    header, cross = io.read_csv(out / "cross_section.csv")
    assert header == ["x_cm", "y_t0d", "y_t7d", "y_t14d", "y_t21d", "y_t28d"]
    assert cross.shape == (11, 6)
    assert np.all(cross[5, 2:] > cross[5, 1:-1])  # untreated centre keeps growing
    snap = np.loadtxt(out / "y_t028.000.txt")
    assert snap.shape == (11, 11)
    assert (out / "y_t028.000.vtk").exists() and (out / "manifest.json").exists()


def test_optimize_writes_outputs(tmp_path):
    out = tmp_path / "opt"
    assert main(["optimize", "--out", str(out), "--snapshot-times", "0,14,28"] + SMALL) == EXIT_OK
    header, it = io.read_csv(out / "iterates.csv")
    assert header[0] == "k" and len(it) <= 11
    assert np.all(np.diff(it[:, 2]) < 0)
    for name in ("u.csv", "s.csv", "gradient.csv", "cross_section.csv", "y_t014.000.vtk"):
        assert (out / name).exists()


def test_optimize_is_reproducible(tmp_path):
    args = ["optimize", "--set", "N=2"] + SMALL
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("iterates.csv", "u.csv", "s.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_optimize_refuses_infeasible(tmp_path, capsys):
    code = main(["optimize", "--out", str(tmp_path), "--set", "t0=0.1"] + SMALL)
    assert code == EXIT_INFEASIBLE
    assert "--allow-infeasible" in capsys.readouterr().err


def test_optimize_divergence_exit(tmp_path):
    code = main(["optimize", "--out", str(tmp_path), "--set", "delta=5", "--set", "N=20"] + SMALL)
    assert code == EXIT_DIVERGED


def test_constant_feasible_seed(tmp_path):
    out = tmp_path / "c"
    main(["simulate", "--seed-control", "constant-feasible", "--out", str(out)] + SMALL)
    _, u = io.read_csv(out / "u.csv")
    _, s = io.read_csv(out / "s.csv")
    assert np.all(u[:, 2] == u[0, 2])
    assert s[168, 1] == pytest.approx(0.4, abs=1e-12)


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--directions", "2"] + SMALL) == EXIT_OK
    assert "max relative error" in capsys.readouterr().out


def test_config_error_exit(capsys):
    assert main(["feasibility", "--set", "bogus=1"]) == 1
    assert "bogus" in capsys.readouterr().err
