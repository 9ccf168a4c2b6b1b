import json

import numpy as np
import pytest

from jointvlmc.cli import main
from jointvlmc.modelio import load_model
from jointvlmc.seqio import Alphabet, Sequence, write_sequence
from jointvlmc.vlmc import sample


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def fav_files(tmp_path, favorable):
    ax = tmp_path / "x.txt"
    ay = tmp_path / "y.txt"
    for path, model, n, seed in ((ax, favorable.model_x, 2000, 1), (ay, favorable.model_y, 3000, 2)):
        write_sequence(path, Sequence(sample(model, n, seed), favorable.alphabet), "tokenized")
    return ax, ay


def test_fit_writes_model(tmp_path, fav_files, capsys):
    code, out, _ = run(["fit", "-i", fav_files[0], "--depth", 3, "--alphabet", "1 2"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["alphabet"] == ["1", "2"]
    assert {c["context"] for c in obj["contexts"]} == {"1", "12", "22"}


def test_fit_joint_constant_files(tmp_path, capsys):
    for name in ("a.txt", "b.txt"):
        (tmp_path / name).write_text("1111\n")
    code, out, _ = run(["fit-joint", "-x", tmp_path / "a.txt", "-y", tmp_path / "b.txt",
                        "--mode", "char", "--alphabet", "1 2"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["contexts"] == [{"context": "", "group": 0, "theta": [1.0, 0.0]}]


def test_fit_joint_groups_and_roundtrip(tmp_path, fav_files, capsys):
    out_path = tmp_path / "joint.json"
    scores = tmp_path / "scores.json"
    code, _, _ = run(["fit-joint", "-x", fav_files[0], "-y", fav_files[1], "--depth", 3,
                      "--alphabet", "1 2",
                      "-o", out_path, "--scores", scores], capsys)
    assert code == 0
    mf = load_model(out_path)
    groups = {(e.group, e.context) for e in mf.entries}
    assert (0, (1, 1)) in groups and (1, (0,)) in groups and (2, (0,)) in groups
    assert mf.dumps() == out_path.read_text()
    rows = json.loads(scores.read_text())
    assert rows[0]["context"] == "" and {"vx", "vy", "vxy", "chixy"} <= set(rows[0])


def test_sample_and_kl(tmp_path, fav_files, capsys):
    joint = tmp_path / "joint.json"
    run(["fit-joint", "-x", fav_files[0], "-y", fav_files[1], "--depth", 3,
         "--alphabet", "1 2", "-o", joint], capsys)
    out = tmp_path / "s.txt"
    assert run(["sample", "-m", joint, "--source", "y", "-n", 50, "--seed", 3, "-o", out],
               capsys)[0] == 0
    assert len(out.read_text().split()) == 50
    code, text, _ = run(["kl", "-p", joint, "-q", joint, "--source-p", "x", "--source-q", "x"],
                        capsys)
    assert code == 0 and float(text) == 0.0
    code, text, _ = run(["kl", "-p", joint, "-q", joint, "--source-p", "x", "--source-q", "y"],
                        capsys)
    assert code == 0 and float(text) > 0


def test_sample_is_seeded(tmp_path, capsys):
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"alphabet": ["a", "b"],
                                 "contexts": [{"context": "", "theta": ["1/2", "1/2"]}]}))
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        run(["sample", "-m", model, "-n", 30, "--seed", 9, "-o", path, "--mode", "char"], capsys)
    assert a.read_text() == b.read_text()


def test_kl_same_file_prints_zero(tmp_path, capsys):
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"alphabet": ["1", "2"], "contexts": [
        {"context": "1", "theta": [0.25, 0.75]}, {"context": "2", "theta": [0.5, 0.5]}]}))
    code, out, _ = run(["kl", "-p", model, "-q", model], capsys)
    assert code == 0 and out.strip() == "0"


def test_experiment_and_jobs(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["experiment", "-c", "favorable", "--reps", 6, "-o", a], capsys)[0] == 0
    code, out, _ = run(["experiment", "-c", "favorable", "--reps", 6, "--jobs", 2, "-o", b],
                       capsys)
    assert code == 0 and "joint" in out
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert set(report["methods"]) == {"separate", "joint"}


def test_experiment_sweep_and_csv(tmp_path, capsys):
    csv = tmp_path / "log.csv"
    code, out, _ = run(["experiment", "-c", "unfavorable", "--reps", 3, "--sweep",
                        "--csv", csv], capsys)
    assert code == 0
    report = json.loads(out)
    assert [row[0] for row in report["lambda_sweep"]] == [0.25, 0.5, 1.0, 2.0, 4.0]
    assert csv.exists()


def test_compare_baseline_table(capsys):
    code, out, _ = run(["compare-baseline", "-c", "favorable", "--reps", 3], capsys)
    assert code == 0
    header = out.splitlines()[1].split()
    assert header[1:4] == ["tau_X", "tau_Y", "tau_X"]


def test_export_dot(tmp_path, fav_files, capsys):
    joint = tmp_path / "joint.json"
    run(["fit-joint", "-x", fav_files[0], "-y", fav_files[1], "--depth", 3,
         "--alphabet", "1 2", "-o", joint], capsys)
    code, out, _ = run(["export-dot", "-m", joint], capsys)
    assert code == 0
    assert out.startswith("digraph") and out.rstrip().endswith("}")
    assert "palegreen" in out and "lightskyblue" in out and "lightsalmon" in out
    assert '[label="2"]' in out and "0.3" in out


def test_usage_errors_exit_1(capsys):
    assert run(["fit"], capsys)[0] == 1
    assert run(["no-such-command"], capsys)[0] == 1
    assert run(["experiment", "-c", "favorable", "--jobs", 0], capsys)[0] == 1


def test_data_errors_exit_2(tmp_path, capsys):
    missing = tmp_path / "none.txt"
    code, _, err = run(["fit", "-i", missing], capsys)
    assert code == 2 and len(err.strip().splitlines()) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["export-dot", "-m", bad], capsys)[0] == 2
    one = tmp_path / "one.txt"
    one.write_text("1 1 1\n")
    assert run(["fit", "-i", one], capsys)[0] == 2  # single-symbol alphabet
    joint = tmp_path / "j.json"
    joint.write_text(json.dumps({"alphabet": ["1", "2"], "contexts": [
        {"context": "", "group": 0, "theta": [0.5, 0.5]}]}))
    assert run(["sample", "-m", joint, "-n", 5, "-o", tmp_path / "o.txt"], capsys)[0] == 2
