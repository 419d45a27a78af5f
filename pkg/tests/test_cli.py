"""In-process tests for the milkit command-line interface."""

import csv
import json

import numpy as np
import pytest

from milkit.bags import load_dataset, save_dataset
from milkit.cli import main
from milkit.distances import dist_emd
from milkit.synth import GeneratorSpec, generate


def test_list_prints_grids(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "simplemil-knn k in {25,35,45}" in out
    assert "citation-knn kR in {1,5,10} kC in {1,5,10}" in out


def test_run_success_and_artifacts(tmp_path, capsys):
    cfg = {
        "seed": 1,
        "output_dir": str(tmp_path / "out"),
        "dataset": {"generator": {"kind": "concept", "d": 3, "bags_per_class": 4,
                                  "instances_per_bag": 5}},
        "classifiers": [{"name": "milboost", "grid": [{"rounds": 2}]}],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "Classifier" in out and "milboost" in out
    assert (tmp_path / "out" / "results.txt").exists()


def test_run_output_dir_override(tmp_path):
    cfg = {
        "seed": 1,
        "output_dir": str(tmp_path / "ignored"),
        "dataset": {"generator": {"kind": "concept", "d": 3, "bags_per_class": 3,
                                  "instances_per_bag": 4}},
        "classifiers": [{"name": "milboost", "grid": [{"rounds": 2}]}],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", str(cfg_path), "-o", str(tmp_path / "real")]) == 0
    assert (tmp_path / "real" / "results.txt").exists()
    assert not (tmp_path / "ignored").exists()


def test_run_config_error_is_exit_1(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text("{not json")
    assert main(["run", str(cfg_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "line 1" in err


def test_run_missing_config_is_exit_1(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_run_partial_failure_is_exit_2(tmp_path, capsys):
    cfg = {
        "seed": 1,
        "output_dir": str(tmp_path / "out"),
        "dataset": {"generator": {"kind": "concept", "d": 3, "bags_per_class": 3,
                                  "instances_per_bag": 4}},
        "classifiers": [
            {"name": "milboost", "grid": [{"rounds": 2}]},
            {"name": "milboost", "label": "bad", "grid": [{"rounds": 0}]},
        ],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", str(cfg_path)]) == 2
    assert "ERROR" in capsys.readouterr().out


def test_run_bad_workers_flag(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "seed": 0,
        "dataset": {"generator": {"kind": "concept"}},
        "classifiers": [{"name": "milboost"}],
    }))
    assert main(["run", str(cfg_path), "--workers", "0"]) == 1
    assert "workers" in capsys.readouterr().err


def test_gen_splits(tmp_path, capsys):
    spec = {"kind": "concept", "d": 3, "bags_per_class": 4, "instances_per_bag": 5,
            "witness_rate": 0.4, "seed": 7}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / "data"
    assert main(["gen", str(spec_path), "-o", str(out_dir)]) == 0
    assert "wrote datasets" in capsys.readouterr().out
    for tag in ("train", "validation", "test"):
        ds = load_dataset(out_dir / f"{tag}.csv", split_tag=tag)
        assert len(ds.bags) == 8
        with open(out_dir / f"instance_labels_{tag}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bag_id", "instance_index", "z"]
        assert len(rows) == 1 + 8 * 5
        # sidecar is consistent with the weak bag labels
        by_bag = {}
        for bag_id, _, z in rows[1:]:
            by_bag.setdefault(bag_id, []).append(int(z))
        for bag in ds.bags:
            has_pos = any(z == 1 for z in by_bag[bag.id])
            assert has_pos == (bag.label == 1)


def test_gen_single_dataset(tmp_path):
    spec = {"kind": "distribution", "d": 2, "bags_per_class": 3,
            "instances_per_bag": 4, "splits": False, "seed": 0}
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / "data"
    assert main(["gen", str(spec_path), "-o", str(out_dir)]) == 0
    ds = load_dataset(out_dir / "bags.csv")
    assert len(ds.bags) == 6
    assert (out_dir / "instance_labels.csv").exists()


def test_gen_invalid_spec_is_exit_1(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"kind": "nope"}))
    assert main(["gen", str(spec_path), "-o", str(tmp_path / "d")]) == 1
    assert "generator spec" in capsys.readouterr().err


def test_gen_missing_spec_is_exit_1(tmp_path, capsys):
    assert main(["gen", str(tmp_path / "no.json"), "-o", str(tmp_path / "d")]) == 1
    assert "cannot read spec" in capsys.readouterr().err


def test_dist_emd_matrix(tmp_path, capsys):
    ds, _ = generate(GeneratorSpec(kind="concept", d=2, bags_per_class=2,
                                   instances_per_bag=3, seed=2))
    bags_path = tmp_path / "bags.csv"
    save_dataset(ds, bags_path)
    out_path = tmp_path / "m.csv"
    assert main(["dist", str(bags_path), "--measure", "emd", "-o", str(out_path)]) == 0
    assert "4x4 matrix" in capsys.readouterr().out
    with open(out_path) as fh:
        rows = list(csv.reader(fh))
    ids = [b.id for b in ds.bags]
    assert rows[0] == ["bag_id"] + ids
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert values.shape == (4, 4)
    np.testing.assert_allclose(np.diag(values), 0.0, atol=1e-12)
    # spot-check one off-diagonal entry against the scalar function
    expected, _ = dist_emd(ds.bags[0], ds.bags[1])
    assert values[0, 1] == pytest.approx(expected, abs=1e-9)


def test_dist_default_measure_is_emd(tmp_path):
    ds, _ = generate(GeneratorSpec(kind="concept", d=2, bags_per_class=1,
                                   instances_per_bag=2, seed=3))
    bags_path = tmp_path / "bags.csv"
    save_dataset(ds, bags_path)
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["dist", str(bags_path), "-o", str(out_a)]) == 0
    assert main(["dist", str(bags_path), "--measure", "emd", "-o", str(out_b)]) == 0
    assert out_a.read_text() == out_b.read_text()


def test_dist_rejects_unknown_measure(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["dist", "x.csv", "--measure", "euclid", "-o", "m.csv"])
    assert exc.value.code == 2  # argparse usage error
    assert "invalid choice" in capsys.readouterr().err


def test_dist_missing_input_is_exit_1(tmp_path, capsys):
    out_path = tmp_path / "m.csv"
    assert main(["dist", str(tmp_path / "none.csv"), "-o", str(out_path)]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_no_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
