import json

import pytest

from mdgs.cli import run
from mdgs.lattice import torus
from mdgs.matching import Covering


@pytest.fixture(autouse=True)
def _out(tmp_path, monkeypatch):
    monkeypatch.setenv("MDGS_OUT", str(tmp_path))
    return tmp_path


def test_solve_writes_reloadable_covering(tmp_path, capsys):
    assert run(["solve", "--torus", "2", "8", "--dist", "gaussian", "--seed", "7"]) == 0
    assert "energy" in capsys.readouterr().out
    path = tmp_path / "solve_torus2d-n8_seed7.covering"
    text = path.read_text()
    assert '"seed": 7' in text.splitlines()[0]
    M, header = Covering.load(torus(2, 8), path)
    again = tmp_path / "copy.covering"
    M.save(again, header=header)
    assert again.read_bytes() == path.read_bytes()


def test_usage_errors_exit_one(capsys):
    assert run(["solve", "--torus", "2", "8", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run([]) == 1
    assert run(["nope"]) == 1
    assert run(["solve", "--torus", "2", "2"]) == 1
    assert run(["solve"]) == 1
    assert run(["chaos", "--graph", "x.txt"]) == 1
    assert run(["clt", "--sizes", "6", "--samples", "10"]) == 1
    assert run(["goodness", "--dist", "pareto", "--shape", "3"]) == 1


def test_help_exits_zero():
    assert run(["--help"]) == 0


def test_site_quantities(tmp_path, capsys):
    assert run(["transition", "--torus", "2", "4", "--seed", "1", "--site", "0", "20"]) == 0
    doc = json.loads((tmp_path / "transition_torus2d-n4_seed1.json").read_text())
    assert [r["site"] for r in doc["sites"]] == [0, 20]
    assert run(["flexibility", "--torus", "2", "4", "--site", "3"]) == 0
    assert run(["optimality", "--torus", "2", "4", "--site", "3"]) == 0
    assert run(["optimality", "--torus", "2", "4", "--site", "20"]) == 1


def test_explicit_graph_and_weights(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("3 2\n0 1\n1 2\n")
    w = tmp_path / "w.csv"
    w.write_text("sigma_index,value\n0,1\n1,2\n2,0.5\n3,2.5\n4,9\n")
    assert run(["solve", "--graph", str(g), "--weights", str(w)]) == 0


def test_experiment_subcommands(tmp_path):
    common = ["--seed", "2", "--out", str(tmp_path / "o")]
    assert run(["stabilize", "--sizes", "6", "8", "--K", "1", "--samples", "3", *common]) == 0
    assert run(["chaos", "--torus", "2", "6", "--p-grid", "0", "0.5", "--samples", "3", *common]) == 0
    assert run(["clt", "--sizes", "4", "--samples", "50", *common]) == 0
    assert run(["clt", "--null", "--sizes", "4", "--samples", "50", *common]) == 0
    assert run(["decay", "--torus", "2", "12", "--R", "0", "1", "--samples", "3", *common]) == 0
    assert run(["derivative", "--torus", "2", "6", "--sites", "3", "--samples", "2", *common]) == 0
    assert run(["droplet", "--torus", "2", "6", "--samples", "3", *common]) == 0
    assert run(["transition", "--torus", "2", "8", "--pairs", "4:8", "--sites", "2", "--samples", "2", *common]) == 0
    assert run(["decompose", "--torus", "2", "6", "--p", "0.3", *common]) == 0
    assert run(["goodness", "--z", "1", "--alpha", "2"]) == 0
    names = {p.name for p in (tmp_path / "o").iterdir()}
    assert "chaos_torus2d-n6_seed2.csv" in names and "droplet_torus2d-n6_seed2.json" in names


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nsizes = 4, 6\nsamples = 50\nseed = 5\n")
    assert run(["clt", "--config", str(cfg), "--samples", "55"]) == 0
    doc = json.loads((tmp_path / "clt_torus2d-n4-6_seed5.json").read_text())
    assert doc["config"]["samples"] == 55 and doc["config"]["n_list"] == [4, 6]
    cfg.write_text("unknown_key = 3\n")
    assert run(["clt", "--config", str(cfg)]) == 1


def test_oracle_check_command(tmp_path):
    assert run(["oracle-check", "--max-sigma", "24", "--trials", "20", "--seed", "1"]) == 0
    doc = json.loads((tmp_path / "oracle-check_sigma24_seed1.json").read_text())
    assert doc["mismatches"] == [] and doc["trials"] > 0
