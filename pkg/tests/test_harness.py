import math

import numpy as np
import pytest

from relayplan import harness, planner, socp
from relayplan.scenario import Trajectory
from relayplan.tables import read_table

SMALL = ["--preset", "calibrated", "--set", "dst_pos=600,0,0", "--set", "num_slots=30"]


def metrics(path):
    _, rows = read_table(path)
    return {k: v for k, v in rows}


def test_optimize_default_delay_tolerant(tmp_path):
    assert harness.main(["optimize", "--mode", "delay-tolerant", "--out", str(tmp_path)]) == 0
    m = metrics(tmp_path / "metrics.csv")
    assert m["objective_bps"] > 0 and m["mode"] == "delay_tolerant" and m["verified"] == "true"
    for name in ("trajectory.csv", "iterations.csv", "queue_trace.csv"):
        assert (tmp_path / name).exists()


def test_optimize_records_mode_and_delay(tmp_path):
    rc = harness.main(["optimize", *SMALL, "--mode", "delay-limited", "--delay-req", "5",
                       "--out", str(tmp_path)])
    assert rc == 0
    m = metrics(tmp_path / "metrics.csv")
    assert m["mode"] == "delay_limited" and m["delay_req_slots"] == 5.0


def test_missing_config(tmp_path, capsys):
    assert harness.main(["optimize", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("num_slots=0\n")
    assert harness.main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_bad_mode(tmp_path):
    assert harness.main(["optimize", *SMALL, "--mode", "fast", "--out", str(tmp_path)]) == 1


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(socp, "solve", lambda *a, **k: socp.Solution(socp.NUMERICAL, None, math.nan, math.inf, 0))
    assert harness.main(["optimize", *SMALL, "--out", str(tmp_path)]) == 2


def test_outputs_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert harness.main(["optimize", *SMALL, "--max-iters", "3", "--out", str(tmp_path / d)]) == 0
    for name in ("trajectory.csv", "metrics.csv", "iterations.csv", "queue_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_file_and_failure_rows(tmp_path):
    rc = harness.main(["sweep", *SMALL, "--sweep-key", "visibility_km", "--values", "0.8,-1",
                       "--max-iters", "2", "--out", str(tmp_path), "--workers", "1"])
    assert rc == 0
    header, rows = read_table(tmp_path / "sweep.csv")
    assert header == ["value", "objective_bps", "iterations", "mean_delay_slots", "mean_packet_delay", "status"]
    assert rows[0][-1] == "ok" and rows[0][1] > 0
    assert rows[1][-1].startswith("error") and math.isnan(rows[1][1])


def test_sweep_worker_count_does_not_change_output(tmp_path):
    args = [*SMALL, "--sweep-key", "buffer_bits", "--values", "1e8,inf", "--max-iters", "2",
            "--mode", "delay-tolerant"]
    assert harness.main(["sweep", *args, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert harness.main(["sweep", *args, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_sweep_empty_values(tmp_path):
    assert harness.main(["sweep", "--sweep-key", "buffer_bits", "--values", "", "--out", str(tmp_path)]) == 1
    assert harness.main(["sweep", "--sweep-key", "altitude", "--values", "1", "--out", str(tmp_path)]) == 1


def test_ref_snr_sweep_shifts_calibrated_gamma0():
    from relayplan.scenario import load_preset

    p = load_preset("calibrated")
    q = harness.apply_sweep_value(p, "ref_snr_db", 16.0)
    assert q.gamma0_override == pytest.approx(10 * p.gamma0_override)


def test_pmf_hover(tmp_path):
    traj = Trajectory.hover((700.0, 0.0), 50, 100.0, 1.0)
    planner.export_trajectory(tmp_path / "t.csv", traj)
    assert harness.main(["pmf", str(tmp_path / "t.csv"), "--bin-width", "300", "--out", str(tmp_path)]) == 0
    _, rows = read_table(tmp_path / "pmf.csv")
    masses = [r[2] for r in rows]
    assert sorted(masses)[-1] == 1.0 and sum(masses) == 1.0
    lo = [r for r in rows if r[2] == 1.0][0][0]
    assert lo == 550.0


def test_pmf_uniform_sweep():
    n = 2000
    pos = np.column_stack([np.linspace(0, 2000, n + 2), np.zeros(n + 2)])
    traj = Trajectory(pos, np.tile([2000 / (n + 1), 0.0], (n + 2, 1)), np.zeros((n + 1, 2)), 100.0, 1.0)
    edges, frac = harness.position_pmf(traj, (0, 0, 0), (2000, 0, 0), 300.0)
    assert abs(frac.sum() - 1.0) <= 1e-9
    inner = frac[(edges[:-1] >= 0) & (edges[1:] <= 2000)]
    assert inner.max() <= 2 * inner.min()


def test_bin_edges_centered():
    e = harness.bin_edges(2000.0, 300.0, 0.0, 2000.0)
    assert 850.0 in e and 1150.0 in e and e[0] <= 0 and e[-1] > 2000


def test_pmf_bad_width(tmp_path):
    planner.export_trajectory(tmp_path / "t.csv", Trajectory.hover((0.0, 0.0), 5, 100.0, 1.0))
    assert harness.main(["pmf", str(tmp_path / "t.csv"), "--bin-width", "0", "--out", str(tmp_path)]) == 1


def test_pmf_parse_error(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n1,2\n")
    assert harness.main(["pmf", str(tmp_path / "t.csv"), "--out", str(tmp_path)]) == 1


def test_baseline_static(tmp_path):
    assert harness.main(["baseline", "--preset", "calibrated", "--scheme", "static", "--out", str(tmp_path)]) == 0
    m = metrics(tmp_path / "metrics.csv")
    assert "x_s" in m and m["verified"] == "true"


def test_baseline_ferry(tmp_path):
    rc = harness.main(["baseline", "--preset", "calibrated", "--set", "buffer_bits=inf", "--scheme", "ferry",
                       "--d1", "300", "--d2", "300", "--out", str(tmp_path)])
    assert rc == 0
    header, rows = read_table(tmp_path / "cycles.csv")
    assert header[0] == "phase" and [r[0] for r in rows][:3] == ["load", "out", "unload"]
    assert metrics(tmp_path / "metrics.csv")["silent_slots_per_leg"] == 28


def test_baseline_unknown_scheme(tmp_path):
    assert harness.main(["baseline", "--scheme", "glider", "--out", str(tmp_path)]) == 1


def test_baseline_ferry_horizon_too_short(tmp_path):
    rc = harness.main(["baseline", "--set", "num_slots=20", "--scheme", "ferry", "--out", str(tmp_path)])
    assert rc == 1


def test_no_command():
    assert harness.main([]) == 1
