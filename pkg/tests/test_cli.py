import json

import numpy as np

from funcnet.cli import main
from funcnet.dynamics import Network


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_evolve_analyze_replay(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run_cli(capsys, "evolve", "--algo", "acor", "--nodes", "3", "--seed", "2", "--max-gens", "40",
                              "--out", str(out))
    assert code == 0
    doc = json.loads(stdout)
    assert doc["status"] == "ok"
    net = out / "run" / "network.json"
    code, _, _ = run_cli(capsys, "analyze", "controllability", "--net", str(net), "--out", str(tmp_path / "c.json"))
    assert code == 0
    rep = json.loads((tmp_path / "c.json").read_text())
    assert {"N_L", "n_L", "N_S", "n_S", "e"} <= set(rep)
    code, _, _ = run_cli(capsys, "analyze", "stability", "--net", str(net), "--input-level", "0.5",
                         "--out", str(tmp_path / "s.json"))
    assert code == 0
    assert "class" in json.loads((tmp_path / "s.json").read_text())
    code, stdout, _ = run_cli(capsys, "replay", "--archive", str(out))
    assert code == 0 and json.loads(stdout)["ok"]


def test_task_file(tmp_path, capsys):
    task = tmp_path / "task.json"
    task.write_text(json.dumps({"kind": "one_in_one_out", "targets": ["threshold"]}))
    code, stdout, _ = run_cli(capsys, "evolve", "--algo", "cmaes", "--nodes", "4", "--task", str(task),
                              "--max-gens", "3", "--out", str(tmp_path / "o"))
    assert code == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["task"]["channels"][0]["target"] == "threshold"


def test_errors_are_json(tmp_path, capsys):
    code, _, err = run_cli(capsys, "evolve", "--nodes", "3", "--out", str(tmp_path), "--config",
                           '{"population_size": -1}')
    assert code != 0 and json.loads(err)["field"] == "population_size"
    code, _, err = run_cli(capsys, "evolve", "--nodes", "1", "--out", str(tmp_path))
    assert code != 0 and json.loads(err)["field"] == "nodes"
    code, _, err = run_cli(capsys, "experiment", "transfer", "--manifest", '{"trials": 1}', "--out", str(tmp_path))
    assert code != 0 and json.loads(err)["field"] == "trials"
    code, _, err = run_cli(capsys, "replay", "--archive", str(tmp_path / "nothing"))
    assert code != 0 and "error" in json.loads(err)
    code, _, err = run_cli(capsys, "analyze", "controllability", "--net", str(tmp_path / "nope.json"),
                           "--out", str(tmp_path / "x.json"))
    assert code != 0 and "error" in json.loads(err)


def test_stability_on_unsettled_net_is_reported(tmp_path, capsys):
    # strong self-inhibition makes unit Euler steps flip between two states
    net = Network.from_weights(np.array([[-20.0, 0.0], [0.0, -20.0]]))
    p = tmp_path / "net.json"
    net.save(p)
    code, _, err = run_cli(capsys, "analyze", "stability", "--net", str(p), "--input-level", "0.5",
                           "--out", str(tmp_path / "s.json"))
    assert code == 0
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["converged"] is False and doc["perturbation_contraction"] is None


def test_experiment_and_replay(tmp_path, capsys):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"trials": 2, "node_counts": [3],
                                    "algorithms": [{"algorithm": "cmaes", "max_generations": 10},
                                                   {"algorithm": "rs", "population_size": 20, "max_generations": 5}]}))
    out = tmp_path / "conv"
    code, _, _ = run_cli(capsys, "experiment", "convergence", "--manifest", str(manifest), "--out", str(out))
    assert code == 0
    assert (out / "cmaes" / "n3" / "trial001" / "curve.csv").exists()
    assert (out / "random_search" / "n3" / "mean_curve.csv").exists()
    code, stdout, _ = run_cli(capsys, "replay", "--archive", str(out))
    assert code == 0 and json.loads(stdout)["ok"]
