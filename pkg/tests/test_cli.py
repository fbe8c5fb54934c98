import json

import numpy as np
import pytest

from hivadapt.cli import main
from hivadapt.data import builtin_patient, write_csv
from hivadapt.report import read_table


def test_unknown_flag_is_usage_error(capsys):
    assert main(["reconstruct", "--bogus"]) == 64
    assert "usage" in capsys.readouterr().err
    assert main([]) == 64


def test_bad_input_is_usage_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time_days,log10_viral_load,total_t_cells_per_ml\n0,0,1\n")
    assert main(["reconstruct", "--data", str(bad), "--out", str(tmp_path / "o")]) == 64
    assert main(["forward", "--e", "wobble:3", "--out", str(tmp_path / "f")]) == 64


def test_forward_equilibrium(tmp_path):
    out = tmp_path / "fwd"
    assert main(["forward", "--e", "constant:1", "--x0", "1e6,0,0", "--out", str(out), "--no-figures"]) == 0
    header, rows = read_table(out / "trajectory.csv")
    assert header == ["t_days", "u1_cells_per_ml", "u2_cells_per_ml", "u3_virions_per_ml", "log10_u3"]
    a = np.array([[float(v) for v in r[1:4]] for r in rows])
    assert len(rows) == 364
    np.testing.assert_array_equal(a, np.tile([1e6, 0, 0], (364, 1)))


def test_forward_profile_peak_and_refusal_to_overwrite(tmp_path):
    out = tmp_path / "fwd"
    assert main(["forward", "--patient", "1", "--out", str(out)]) == 0
    assert (out / "figures" / "trajectory.png").exists()
    header, rows = read_table(out / "trajectory.csv")
    u3 = np.array([float(r[3]) for r in rows])
    assert u3.max() > 1e6 and np.argmax(u3) <= 30
    assert main(["forward", "--patient", "1", "--out", str(out)]) == 64
    assert main(["forward", "--patient", "1", "--out", str(out), "--force"]) == 0


def test_forward_tau_halving(tmp_path):
    res = {}
    for tau in ("1", "0.5"):
        out = tmp_path / f"t{tau}"
        assert main(["forward", "--patient", "1", "--tau", tau, "--t-end", "60", "--out", str(out),
                     "--no-figures"]) == 0
        _, rows = read_table(out / "trajectory.csv")
        res[tau] = np.array([float(r[4]) for r in rows])
    diff = np.max(np.abs(res["0.5"][::2] - res["1"]))
    assert 0 < diff < 1.0


def test_reconstruct_single_level(tmp_path, capsys):
    out = tmp_path / "r0"
    assert main(["reconstruct", "--patient", "1", "--refinements", "0", "--out", str(out)]) == 0
    header, rows = read_table(out / "summary.csv")
    assert len(rows) == 1 and rows[0][1] == "364"
    for f in ("E.csv", "states.csv", "residuals.csv", "trace.csv", "mesh.csv"):
        assert (out / "level0" / f).exists()
    assert (out / "figures" / "E_levels.png").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["acga"]["inner"]["gamma0"] == 0.1
    assert man["config"]["acga"]["inner"]["theta"] == 1e-3
    assert man["config"]["acga"]["inner"]["max_iters"] == 200
    assert json.loads(json.dumps(man)) == man


def test_reconstruct_from_csv(tmp_path):
    path = tmp_path / "p3.csv"
    write_csv(builtin_patient(3), path)
    out = tmp_path / "r"
    assert main(["reconstruct", "--data", str(path), "--ctl-patient", "3", "--refinements", "0",
                 "--max-iters", "5", "--out", str(out), "--no-figures"]) == 0


def test_twin_constant_truth(tmp_path):
    out = tmp_path / "tw"
    assert main(["twin", "--noise", "0", "--etrue", "constant:1", "--out", str(out), "--no-figures"]) == 0
    header, rows = read_table(out / "summary.csv")
    row = dict(zip(header, rows[0]))
    assert row["cga_iterations"] == "0" and row["termination"] == "theta"
    assert float(row["rel_err_window"]) == 0.0


def test_twin_seeded_rerun_identical(tmp_path):
    args = ["twin", "--noise", "0.02", "--seed", "4", "--etrue", "step:30:1:3", "--refinements", "1",
            "--max-iters", "10", "--no-figures"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in ("summary.csv", "level1/E.csv", "level1/states.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_solver_failure_exit_code(tmp_path):
    out = tmp_path / "f"
    assert main(["forward", "--patient", "1", "--n-sub", "2", "--out", str(out), "--no-figures"]) == 2
