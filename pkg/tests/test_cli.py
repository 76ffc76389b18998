"""End-to-end command-line behaviour."""

import json

import numpy as np
import pytest

from csbm.cli import main
from csbm.generate import Params, sample_instance
from csbm.graphs import read_edge_list
from csbm.harness import run_trial
from csbm.seeds import cell_key, trial_seed


def run_cli(*argv):
    return main([str(x) for x in argv])


def test_gen_writes_instance_directory(tmp_path, capsys):
    out = tmp_path / "inst"
    code = run_cli(
        "gen", "--n", 80, "--a", 6.0, "--b", 1.0, "--s", 0.7,
        "--K", 3, "--k", 1, "--seed", 5, "--out", out,
    )
    assert code == 0
    assert "wrote instance" in capsys.readouterr().out
    for name in (
        "parent.edges", "child_1.edges", "child_2.edges", "child_3.edges",
        "sigma.txt", "pi_2.txt", "pi_3.txt", "meta.json",
    ):
        assert (out / name).exists(), name

    inst = sample_instance(Params(n=80, a=6.0, b=1.0, s=0.7, K=3, k=1), 5)
    parent = read_edge_list(out / "parent.edges")
    assert parent == inst.parent
    child2 = read_edge_list(out / "child_2.edges")
    assert child2 == inst.children[1]

    sigma_lines = (out / "sigma.txt").read_text().strip().split("\n")
    assert len(sigma_lines) == 80
    assert set(sigma_lines) <= {"+1", "-1"}
    parsed = np.array([1 if v == "+1" else -1 for v in sigma_lines], dtype=np.int8)
    assert np.array_equal(parsed, inst.sigma_star)

    pi2 = [int(v) for v in (out / "pi_2.txt").read_text().split()]
    assert sorted(pi2) == list(range(80))
    assert np.array_equal(np.array(pi2), inst.pi_star[1])

    meta = json.loads((out / "meta.json").read_text())
    assert meta["n"] == 80 and meta["seed"] == 5
    assert meta["construction"] == "subsample"
    assert meta["parent_edges"] == inst.parent.edge_count
    assert meta["child_edges"] == [c.edge_count for c in inst.children]


def test_gen_partition_construction(tmp_path):
    out = tmp_path / "inst"
    assert run_cli(
        "gen", "--n", 40, "--a", 4.0, "--b", 1.0, "--s", 0.5,
        "--seed", 0, "--out", out, "--partition",
    ) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["construction"] == "partition"


def test_gen_refuses_file_target(tmp_path, capsys):
    target = tmp_path / "occupied"
    target.write_text("x")
    code = run_cli(
        "gen", "--n", 20, "--a", 4.0, "--b", 1.0, "--s", 0.5,
        "--out", target,
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_recover_prints_trials_and_matches_library(capsys):
    code = run_cli(
        "recover", "--n", 150, "--a", 9.0, "--b", 1.0, "--s", 1.0,
        "--K", 3, "--k", 1, "--trials", 2, "--seed", 3,
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].split() == ["trial", "overlap", "success", "bad_vertices", "degraded", "ms"]
    assert len(lines) == 3
    first = lines[1].split()
    params = Params(n=150, a=9.0, b=1.0, s=1.0, K=3, k=1)
    key = cell_key(150, 9.0, 1.0, 1.0, 3, 1)
    expected = run_trial(params, trial_seed(3, key, 0), experiments=("recover",))
    assert float(first[1]) == pytest.approx(expected.overlap, abs=1e-6)
    assert int(first[2]) == int(expected.recovery_success)


def test_recover_appends_csv(tmp_path):
    csv_path = tmp_path / "trials.csv"
    args = (
        "recover", "--n", 100, "--a", 9.0, "--b", 1.0, "--s", 1.0,
        "--K", 3, "--k", 1, "--trials", 2, "--seed", 0, "--csv", csv_path,
    )
    assert run_cli(*args) == 0
    assert run_cli(*args) == 0
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == 5
    assert lines[0].startswith("n,a,b,s,K,k,trial,seed,overlap")
    assert lines[1] == lines[3]
    # Without --timing the wall-clock column stays empty.
    assert lines[1].endswith(",")


def test_recover_timing_fills_wall_ms(tmp_path):
    csv_path = tmp_path / "timed.csv"
    assert run_cli(
        "recover", "--n", 100, "--a", 9.0, "--b", 1.0, "--s", 1.0,
        "--K", 3, "--k", 1, "--trials", 1, "--seed", 0,
        "--csv", csv_path, "--timing",
    ) == 0
    row = csv_path.read_text().strip().split("\n")[1]
    assert float(row.split(",")[-1]) > 0.0


def test_match_table_and_json(capsys):
    args = (
        "match", "--n", 150, "--a", 9.0, "--b", 1.0, "--s", 1.0,
        "--K", 3, "--k", 1, "--trials", 2, "--seed", 1,
    )
    assert run_cli(*args) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].split() == [
        "trial", "M12", "M13", "M23", "bad_vertices", "estimator_success",
    ]
    assert len(lines) == 3

    assert run_cli(*args, "--json") == 0
    records = json.loads(capsys.readouterr().out)
    assert len(records) == 2
    assert records[0]["M12"] == 1.0
    assert records[0]["estimator_success"] is True
    assert records[0]["bad_vertices"] == 0


def test_match_rejects_single_child(capsys):
    code = run_cli(
        "match", "--n", 100, "--a", 9.0, "--b", 1.0, "--s", 1.0,
        "--K", 1, "--trials", 1,
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_witness_prints_consistent_counts(capsys):
    assert run_cli(
        "witness", "--n", 300, "--a", 9.0, "--b", 1.0, "--s", 0.2,
        "--K", 3, "--trials", 3, "--seed", 0,
    ) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].split() == ["trial", "R_star", "S_star", "S_plus", "S_minus", "witness"]
    assert len(lines) == 4
    for line in lines[1:]:
        _, r_star, s_star, plus, minus, verdict = line.split()
        assert int(plus) + int(minus) == int(s_star)
        assert int(s_star) <= int(r_star)
        assert verdict in {"0", "1"}


def sweep_config(tmp_path, **overrides):
    payload = dict(
        n_values=[120], a_values=[9.0], b_values=[1.0], s_values=[1.0],
        K_values=[3], k=1, trials=2, master_seed=0,
        experiments=["recover", "match"],
    )
    payload.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


def test_sweep_writes_deterministic_csv(tmp_path, capsys):
    config = sweep_config(tmp_path)
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert run_cli("sweep", "--config", config, "--out", out_a) == 0
    assert run_cli("sweep", "--config", config, "--out", out_b) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    assert out_a.read_text().startswith("n,a,b,s,K,k,trials,success_rate")
    assert "wrote 1 cell rows" in capsys.readouterr().out


def test_sweep_stdout_and_per_trial(tmp_path, capsys):
    config = sweep_config(tmp_path, per_trial=True)
    trials_out = tmp_path / "trials.csv"
    assert run_cli("sweep", "--config", config, "--per-trial-out", trials_out) == 0
    out = capsys.readouterr().out
    assert out.startswith("n,a,b,s,K,k,trials,")
    assert trials_out.read_text().count("\n") == 3


def test_sweep_per_trial_requires_config_flag(tmp_path, capsys):
    config = sweep_config(tmp_path)
    code = run_cli("sweep", "--config", config, "--per-trial-out", tmp_path / "t.csv")
    assert code == 1
    assert "per_trial" in capsys.readouterr().err


def test_sweep_rejects_bad_config(tmp_path, capsys):
    config = sweep_config(tmp_path, experiments=["mystery"])
    assert run_cli("sweep", "--config", config) == 1
    assert "error:" in capsys.readouterr().err


def test_scaling_prints_fits_and_writes_row(tmp_path, capsys):
    out = tmp_path / "scaling.csv"
    assert run_cli(
        "scaling", "--a", 6.0, "--b", 2.0, "--s", 0.35, "--K", 3, "--k", 1,
        "--n-list", "200,300,400,500", "--trials", 2, "--seed", 0, "--out", out,
    ) == 0
    text = capsys.readouterr().out
    assert "fitted F12 exponent:" in text
    assert "theory 0.51" in text
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("a,b,s,K,k,trials,points_used,fitted_F12")
    assert len(lines) == 2


def test_scaling_rejects_short_n_list(capsys):
    code = run_cli(
        "scaling", "--a", 6.0, "--b", 2.0, "--s", 0.35,
        "--n-list", "200,300,400", "--trials", 1,
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_regions_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "regions.csv"
    assert run_cli(
        "regions", "--s", 0.4, "--amax", 10, "--bmax", 2, "--step", 1,
        "--out", out, "--summary",
    ) == 0
    stdout = capsys.readouterr().out
    assert "wrote 20 region rows" in stdout
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "a,b,region"
    assert len(lines) == 21
    assert "9.0,1.0,DarkBlue" in lines
    assert "Boundary" not in out.read_text()
    counted = sum(
        int(line.rsplit(": ", 1)[1])
        for line in stdout.strip().split("\n")
        if ": " in line
    )
    assert counted == 20
