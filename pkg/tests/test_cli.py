import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from multitree.cli import main

DATA = Path(__file__).parent / "data"


def csv_rows(path):
    return path.read_text().splitlines()


def test_run_writes_metrics_and_state(tmp_path):
    rc = main(["run", "--nodes", "1000", "--colors", "2", "--need", "2", "--profile", "tight",
               "--horizon", "100", "--seed", "7", "--out", str(tmp_path)])
    assert rc == 0
    rows = csv_rows(tmp_path / "metrics.csv")
    assert rows[0] == "t,fraction_covered,max_depth,edges,Y,S,cycles,buffered_depth_error"
    assert len(rows) == 102  # header plus t = 0..100
    assert (tmp_path / "final_state.txt").read_text().startswith("1000 2 2\n")
    assert not list(tmp_path.glob(".*.tmp"))


def test_run_is_byte_identical(tmp_path):
    args = ["run", "--nodes", "150", "--horizon", "30", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("metrics.csv", "final_state.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv,flag", [
    (["--need", "3", "--colors", "2"], "--need"),
    (["--nodes", "1"], "--nodes"),
    (["--horizon", "-5"], "--horizon"),
    (["--record-interval", "0"], "--record-interval"),
    (["--alpha", "-1", "--profile", "loose"], "--alpha"),
])
def test_run_usage_errors(argv, flag, tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)] + argv) == 2
    assert flag in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("# small run\nnodes = 120\nhorizon = 5\nseed = 4\ndepth-mode = instantaneous\n")
    assert main(["run", "--config", str(cfg), "--horizon", "8", "--out", str(tmp_path)]) == 0
    rows = csv_rows(tmp_path / "metrics.csv")
    assert len(rows) == 10
    assert (tmp_path / "final_state.txt").read_text().startswith("120 2 2\n")


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("nodes = 120\ncolour = 2\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_env_seed_fallback(tmp_path, monkeypatch):
    base = ["run", "--nodes", "100", "--horizon", "10"]
    monkeypatch.setenv("MULTITREE_SEED", "21")
    main(base + ["--out", str(tmp_path / "env")])
    main(base + ["--seed", "21", "--out", str(tmp_path / "flag")])
    main(base + ["--seed", "22", "--out", str(tmp_path / "other")])
    env = (tmp_path / "env" / "metrics.csv").read_text()
    assert env == (tmp_path / "flag" / "metrics.csv").read_text()
    assert env != (tmp_path / "other" / "metrics.csv").read_text()


def test_batch_outputs(tmp_path):
    rc = main(["batch", "--scenario", "tight", "--nodes", "100", "--horizon", "10", "--repeats", "6",
               "--percentiles", "0.2,1,5,50,100", "--out", str(tmp_path)])
    assert rc == 0
    for short in ("coverage", "max_depth"):
        rows = csv_rows(tmp_path / f"tight_{short}.csv")
        assert rows[0] == "t,p0.2,p1,p5,p50,p100"
        assert len(rows) == 12
        assert all(len(r.split(",")) == 6 for r in rows)
    summary = json.loads((tmp_path / "tight_summary.json").read_text())
    assert summary["repeats"] == 6
    assert summary["run_indices"] == list(range(6))
    assert "wall_time_s" in summary


def test_batch_jobs_do_not_change_outputs(tmp_path):
    base = ["batch", "--scenario", "loose", "--alpha", "0.1", "--nodes", "100", "--horizon", "10",
            "--repeats", "8", "--deterministic"]
    assert main(base + ["--jobs", "1", "--out", str(tmp_path / "j1")]) == 0
    assert main(base + ["--jobs", "4", "--out", str(tmp_path / "j4")]) == 0
    for f in sorted((tmp_path / "j1").iterdir()):
        assert f.read_bytes() == (tmp_path / "j4" / f.name).read_bytes(), f.name


@pytest.mark.parametrize("extra", [["--repeats", "0"], ["--percentiles", "0,50"], ["--jobs", "0"],
                                   ["--scenario", "source_coding", "--colors", "5"]])
def test_batch_usage_errors(extra, tmp_path):
    assert main(["batch", "--nodes", "50", "--out", str(tmp_path)] + extra) == 2


def test_bound_outputs(tmp_path):
    rc = main(["bound", "--nodes-list", "16,32", "--trials", "5", "--epsilons", "1,2,3",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = csv_rows(tmp_path / "bound_trials.csv")
    assert rows[0] == "N,trial,T"
    assert len(rows) == 1 + 2 * 5
    summary = json.loads((tmp_path / "bound_summary.json").read_text())
    assert sum(len(r["tail"]) for r in summary["results"]) == 6


def test_bound_single_trial(tmp_path):
    assert main(["bound", "--nodes-list", "16", "--trials", "1", "--out", str(tmp_path)]) == 0
    tails = json.loads((tmp_path / "bound_summary.json").read_text())["results"][0]["tail"]
    assert {t["empirical"] for t in tails} <= {0.0, 1.0}


@pytest.mark.parametrize("extra", [["--trials", "0"], ["--nodes-list", "1"], ["--nodes-list", "a,b"],
                                   ["--epsilons", "-1"]])
def test_bound_usage_errors(extra, tmp_path):
    assert main(["bound", "--out", str(tmp_path)] + extra) == 2


def test_check_converged_fixture(capsys):
    assert main(["check", "--state", str(DATA / "converged_n40.txt")]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "converged: PASS" in out


def test_check_duplicate_color(capsys):
    assert main(["check", "--state", str(DATA / "duplicate_color.txt")]) == 1
    assert "node 5 color 1" in capsys.readouterr().out


def test_check_truncated(capsys):
    assert main(["check", "--state", str(DATA / "truncated.txt")]) == 2
    assert "line 21" in capsys.readouterr().err


def test_check_missing_file(tmp_path):
    assert main(["check", "--state", str(tmp_path / "nope.txt")]) == 2


def test_check_unconverged_run(tmp_path):
    main(["run", "--nodes", "80", "--horizon", "2", "--out", str(tmp_path)])
    assert main(["check", "--state", str(tmp_path / "final_state.txt")]) == 1


def test_module_entry_point(tmp_path):
    env = {**os.environ, "PYTHONPATH": str(Path(__file__).parents[1] / "src")}
    proc = subprocess.run([sys.executable, "-m", "multitree", "run", "--need", "3", "--colors", "2"],
                          capture_output=True, text=True, env=env, cwd=tmp_path)
    assert proc.returncode == 2
    assert "--need" in proc.stderr
