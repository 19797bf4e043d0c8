import json
import os

import pytest

from igk import reports
from igk.cli import main

DATA = os.path.join(os.path.dirname(reports.__file__), "data")
MINI = os.path.join(DATA, "mini")
WLCX = os.path.join(DATA, "wl_counterexample")
HIST = os.path.join(DATA, "subtree_counterexample.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    report = json.loads(out.out) if out.out.strip() else None
    if report is not None:
        reports.validate(report)
    return code, report, out.err


def test_kernel_writes_csv(tmp_path, capsys):
    code, rep, _ = run(capsys, "kernel", "--dataset", MINI, "--kernel", "wloa", "--iterations", "3",
                       "--normalize", "--out", str(tmp_path))
    assert code == 0
    assert rep["dataset"]["name"] == "MINI"
    assert rep["results"]["files"] == ["gram_wloa_h1.csv", "gram_wloa_h2.csv", "gram_wloa_h3.csv"]
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["results"] == rep["results"]


def test_analyze_exit_codes(capsys):
    assert run(capsys, "analyze", "--dataset", MINI, "--property", "monotonic")[0] == 0
    code, rep, _ = run(capsys, "analyze", "--dataset", WLCX, "--kernel", "wl-subtree",
                       "--iterations", "2", "--property", "monotonic")
    assert code == 1
    assert rep["results"]["violation_count"] == 1
    code, _, err = run(capsys, "analyze", "--dataset", MINI, "--kernel", "wl-subtree",
                       "--property", "wloa-bound")
    assert code == 2 and "wloa-bound" in err


def test_analyze_margin(capsys):
    code, rep, _ = run(capsys, "analyze", "--synthetic", "er_vs_ba", "--count", "12",
                       "--sizes", "8,10", "--p", "0.3", "--property", "margin")
    assert code == 0 and rep["results"]["non_decreasing"]
    assert run(capsys, "analyze", "--synthetic", "cycle", "--property", "margin")[0] == 2


def test_histogram_source(capsys):
    code, rep, _ = run(capsys, "analyze", "--histograms", HIST, "--kernel", "wl-subtree",
                       "--iterations", "2", "--property", "monotonic")
    assert code == 1
    v = rep["results"]["violations"][0]
    assert v["rhs"] == pytest.approx(0.0400, abs=5e-4) and v["lhs"] == pytest.approx(0.0404, abs=5e-4)


def test_data_errors(tmp_path, capsys):
    assert run(capsys, "kernel", "--dataset", str(tmp_path), "--out", str(tmp_path / "o"))[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "kernel", "--histograms", str(bad), "--out", str(tmp_path / "o"))[0] == 3


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["kernel", "--iterations", "0"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main(["train", "--split", "8:1"])
    assert run(capsys, "kernel", "--synthetic", "cycle", "--sizes", "2", "--out", "/tmp/x")[0] == 2
    assert run(capsys, "train", "--layers", "1")[0] == 2


def test_verify(capsys):
    code, rep, err = run(capsys, "verify", "--check", "counterexample")
    assert code == 0 and rep["results"]["passed"]
    assert "(0.0400, 0.0404) PASS" in err


def test_train_compare_and_determinism(tmp_path, capsys):
    argv = ["train", "--synthetic", "cycles_vs_paths", "--count", "30", "--epochs", "3",
            "--hidden", "8", "--seeds", "0,1", "--compare"]
    code, a, _ = run(capsys, *argv)
    assert code == 0
    assert [r["loss_mode"] for r in a["results"]["runs"]] == ["off", "all", "off", "all"]
    assert [c["seed"] for c in a["results"]["comparison"]] == [0, 1]
    _, b, _ = run(capsys, *argv)
    assert reports.results_bytes(a) == reports.results_bytes(b)


def test_train_checkpoint(tmp_path, capsys):
    ck = tmp_path / "w.bin"
    code, rep, _ = run(capsys, "train", "--synthetic", "cycles_vs_paths", "--count", "20",
                       "--epochs", "2", "--checkpoint", str(ck), "--out", str(tmp_path / "r.json"))
    assert code == 0 and ck.exists() and (tmp_path / "r.json").exists()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kernel": "wl-subtree", "iterations": 2}))
    _, rep, _ = run(capsys, "--config", str(cfg), "analyze", "--dataset", MINI,
                    "--property", "order")
    assert rep["config"]["kernel"] == "wl-subtree" and rep["config"]["iterations"] == 2
    # flags win over the file
    _, rep, _ = run(capsys, "--config", str(cfg), "analyze", "--dataset", MINI,
                    "--property", "order", "--iterations", "4")
    assert rep["config"]["iterations"] == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "analyze", "--dataset", MINI, "--property", "order"])


def test_dataset_not_modified(tmp_path, capsys):
    before = {f: os.path.getmtime(os.path.join(MINI, f)) for f in os.listdir(MINI)}
    run(capsys, "kernel", "--dataset", MINI, "--out", str(tmp_path))
    assert before == {f: os.path.getmtime(os.path.join(MINI, f)) for f in os.listdir(MINI)}


def test_shipped_schema_matches_docs():
    docs = os.path.join(os.path.dirname(__file__), os.pardir, "docs", "report.schema.json")
    with open(docs) as fh:
        assert json.load(fh) == reports.load_schema()
