import csv
import json

import pytest

from setbarrier.cli import EXIT_OK, EXIT_UNVERIFIED, EXIT_USAGE, _seeds, main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--benchmark", "three-sets", "--seed", "1", "--out", str(out)])
    return out, code


def test_train_writes_model_and_report(trained):
    out, code = trained
    assert code == EXIT_OK
    model = json.loads((out / "three-sets_seed1_model.json").read_text())
    assert model["meta"]["benchmark_key"] == "three-sets"
    report = json.loads((out / "three-sets_seed1_report.json").read_text())
    assert report["verified"] and report["loss_trace"][-1]["total"] == 0.0


def test_verify_exit_codes(trained, capsys):
    out, _ = trained
    model = str(out / "three-sets_seed1_model.json")
    assert main(["verify", "--model", model]) == EXIT_OK
    assert main(["verify", "--model", model, "--refine", "1"]) == EXIT_OK
    assert "zero=2-" in capsys.readouterr().out
    # wrong benchmark for this network's dimension
    assert main(["verify", "--model", model, "--benchmark", "ratschan", "--size", "3"]) == EXIT_USAGE
    assert main(["verify", "--model", model, "--refine", "-1"]) == EXIT_USAGE
    assert main(["verify", "--model", str(out / "missing.json")]) == EXIT_USAGE


def test_verify_unverified_model(tmp_path):
    assert main(["train", "--benchmark", "darboux", "--max-epochs", "1", "--out", str(tmp_path)]) \
        == EXIT_UNVERIFIED
    assert main(["verify", "--model", str(tmp_path / "darboux_seed0_model.json")]) == EXIT_UNVERIFIED


def test_usage_errors(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["train", "--benchmark", "nope", "--out", str(out)]) == EXIT_USAGE
    assert not out.exists()
    assert "error" in capsys.readouterr().err
    assert main(["train", "--benchmark", "polynomial", "--zero", "1-8", "--out", str(out)]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["train", "--benchmark", "darboux", "--spec", "x.json"])


def test_spec_file(tmp_path):
    doc = {"name": "toy", "dim": 1, "dynamics": ["-x1"], "state_space": [[-2, 2]],
           "initial_sets": [[[-0.5, 0.5]]], "unsafe_sets": [[[1.5, 2]]]}
    spec = tmp_path / "toy.json"
    spec.write_text(json.dumps(doc))
    assert main(["train", "--spec", str(spec), "--arch", "N1", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "toy_seed0_model.json").exists()


def test_seed_ranges():
    assert _seeds("0..3") == [0, 1, 2, 3]
    assert _seeds("2,5") == [2, 5]


def test_export_levelset(trained):
    out, _ = trained
    model = str(out / "three-sets_seed1_model.json")
    assert main(["export-levelset", "--model", model, "--resolution", "3", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "three-sets_levelset.csv")
    assert rows[0] == ["x1", "x2", "B"] and len(rows) == 10
    cover = _rows(out / "three-sets_cover.csv")
    assert cover[0] == ["x1_lo", "x2_lo", "x1_hi", "x2_hi"] and len(cover) > 1
    kinds = [r[0] for r in _rows(out / "three-sets_sets.csv")[1:]]
    assert kinds == ["initial", "unsafe", "unsafe", "state_space"]
    assert main(["export-levelset", "--model", model, "--resolution", "1"]) == EXIT_USAGE


def test_export_slice_needs_dims(tmp_path):
    assert main(["train", "--benchmark", "ratschan", "--size", "3", "--max-epochs", "1",
                 "--out", str(tmp_path)]) in (EXIT_OK, EXIT_UNVERIFIED)
    model = str(tmp_path / "ratschan-3d_seed0_model.json")
    assert main(["export-levelset", "--model", model, "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["export-levelset", "--model", model, "--dims", "1", "1"]) == EXIT_USAGE
    assert main(["export-levelset", "--model", model, "--dims", "1", "3", "--resolution", "4",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "ratschan-3d_levelset.csv")
    assert rows[0] == ["x1", "x3", "B"] and len(rows) == 17


def test_bench_summary(tmp_path):
    args = ["bench", "--benchmark", "three-sets", "--seeds", "0..1", "--check", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    s = json.loads((tmp_path / "three-sets_summary.json").read_text())
    assert s["success_pct"] == 100.0 and s["reference"]["epochs"] == 16.1
    assert all(r["refined_verified"] and r["simulation_ok"] for r in s["runs"])
    rows = _rows(tmp_path / "three-sets_summary.csv")
    assert rows[0][:3] == ["benchmark", "n", "success_pct"] and "ref_epochs" in rows[0]
    first = (tmp_path / "three-sets_summary.csv").read_text()
    s1 = {k: v for k, v in s.items() if not k.startswith("time")}
    assert main(args) == EXIT_OK
    s2 = json.loads((tmp_path / "three-sets_summary.json").read_text())
    for r in s1["runs"] + s2["runs"]:
        r.pop("time_s")
    assert s1 == {k: v for k, v in s2.items() if not k.startswith("time")}
    assert first.split(",")[:3] == (tmp_path / "three-sets_summary.csv").read_text().split(",")[:3]


def test_bench_unverified_exit(tmp_path):
    assert main(["bench", "--benchmark", "ratschan", "--size", "3", "--seeds", "0",
                 "--max-epochs", "1", "--out", str(tmp_path)]) == EXIT_UNVERIFIED
    rows = _rows(tmp_path / "ratschan-3d_summary.csv")
    assert rows[1][0] == "ratschan-3d" and float(rows[1][rows[0].index("ref_epochs")]) == 65.4
