import csv
import json

import pytest

from lendscore import __version__
from lendscore.cli import main

SMALL = ["--set", "synth.n_loans=1500", "--set", "stage1.steps=40", "--set", "stage2.steps=40"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out-dir", str(d), *SMALL]) == 0
    return d


def run(cmd, out, data, *extra):
    args = [cmd, "--out-dir", str(out), "--loans", str(data / "loans.csv"), "--payments", str(data / "payments.csv")]
    return main(args + SMALL + list(extra))


def test_synth_is_byte_identical(data_dir, tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), *SMALL]) == 0
    for name in ("loans.csv", "payments.csv"):
        assert (tmp_path / name).read_bytes() == (data_dir / name).read_bytes()


def test_describe(data_dir, tmp_path):
    assert run("describe", tmp_path, data_dir) == 0
    rep = json.loads((tmp_path / "describe.json").read_text())
    assert abs(rep["summary"]["default_rate"] - 0.15) < 0.03
    assert rep["version"] == __version__ and rep["config"]["synth.n_loans"] == 1500


@pytest.mark.parametrize("method", ["undersample", "oversample", "smote", "none"])
def test_train_outputs(data_dir, tmp_path, method):
    assert run("train", tmp_path, data_dir, "--resample", method) == 0
    for name in ("stage1.model", "stage2.model", "loss_stage1.csv", "loss_stage2.csv", "train.json"):
        assert (tmp_path / name).exists()
    rows = list(csv.reader(open(tmp_path / "loss_stage1.csv")))
    assert rows[0] == ["step", "cross_entropy"] and len(rows) == 41


def test_evaluate_grid(data_dir, tmp_path):
    assert run("evaluate", tmp_path, data_dir) == 0
    rep = json.loads((tmp_path / "evaluate.json").read_text())
    grid = rep["classification"]
    assert set(grid) == {"undersample", "oversample", "smote"}
    assert all(set(row) == {"wide", "deep", "wide_deep"} for row in grid.values())
    assert all(cell["TP"] + cell["FN"] + cell["FP"] + cell["TN"] > 0 for row in grid.values() for cell in row.values())
    assert all(v is not None for v in rep["regression_mse_positive_irr"].values())
    assert rep["config"]["seed"] == 1 and "conventions" in rep


def test_compare_is_reproducible(data_dir, tmp_path):
    assert run("compare", tmp_path, data_dir, "--top-k", "10") == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert run("compare", tmp_path, data_dir, "--top-k", "10") == 0
    assert {p.name: p.read_bytes() for p in tmp_path.iterdir()} == first
    rep = json.loads(first["compare.json"])
    assert rep["k"] == 10 and len(rep["top_k_avg_actual_irr"]) == 3
    top = list(csv.DictReader(open(tmp_path / "top_k.csv")))
    assert len(top) <= 30
    assert (tmp_path / "scatter_approach3_two_stage.csv").exists()


def test_score(data_dir, tmp_path):
    assert run("train", tmp_path, data_dir) == 0
    lines = (data_dir / "loans.csv").read_text().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    row[header.index("purpose")] = "renewable_energy"
    row[header.index("status")] = ""
    listings = tmp_path / "listings.csv"
    listings.write_text("\n".join([lines[0], ",".join(row), lines[2]]) + "\n")
    assert main(["score", "--out-dir", str(tmp_path), "--listings", str(listings)]) == 0
    out = list(csv.DictReader(open(tmp_path / "scored.csv")))
    assert len(out) == 2 and "actual_irr" not in out[0]
    assert {o["gate"] for o in out} <= {"Passed", "Filtered"}
    for o in out:
        assert (o["predicted_irr"] == "") == (o["gate"] == "Filtered")


def test_score_unseen_level_flagged(data_dir, tmp_path):
    assert run("train", tmp_path, data_dir) == 0
    lines = (data_dir / "loans.csv").read_text().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    row[header.index("fico")] = "301"
    listings = tmp_path / "listings.csv"
    listings.write_text(lines[0] + "\n" + ",".join(row) + "\n")
    assert main(["score", "--out-dir", str(tmp_path), "--listings", str(listings)]) == 0
    out = list(csv.DictReader(open(tmp_path / "scored.csv")))
    assert out[0]["unseen_level"] == "1"


def test_score_empty_listings(data_dir, tmp_path):
    assert run("train", tmp_path, data_dir) == 0
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["score", "--out-dir", str(tmp_path), "--listings", str(empty)]) == 0
    assert (tmp_path / "scored.csv").read_text().strip().count("\n") == 0


def test_exit_codes(data_dir, tmp_path, capsys):
    assert main(["nope"]) == 1
    assert main(["train", "--gamma", "2"]) == 1
    assert main(["train", "--set", "bogus=1"]) == 1
    assert main(["describe", "--loans", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("loan_id\nL1\n")
    assert main(["describe", "--loans", str(bad)]) == 2
    assert run("train", tmp_path, data_dir, "--set", "stage1.batch_size=100000") == 3
    assert "lendscore:" in capsys.readouterr().err
