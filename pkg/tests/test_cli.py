import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from builders import SHIFTED_RAMP, CUBIC, RAMP
from tropdiv import io
from tropdiv.cli import main, report_table
from tropdiv.compress import CompressionReport
from tropdiv.data import save_csv, synth_gaussians


@pytest.fixture
def polys(tmp_path):
    paths = {}
    for name, p in (("p", CUBIC), ("d1", SHIFTED_RAMP), ("d2", RAMP)):
        paths[name] = tmp_path / f"{name}.json"
        io.write_json(paths[name], io.polynomial_to_json(p))
    return paths


@pytest.fixture
def synth_files(tmp_path):
    train_path, test_path = tmp_path / "train.csv", tmp_path / "test.csv"
    save_csv(synth_gaussians(300, 5, 3.0, seed=0), train_path)
    save_csv(synth_gaussians(200, 5, 3.0, seed=1), test_path)
    return train_path, test_path


def test_divide_exact_cubic(polys, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["divide", str(polys["p"]), str(polys["d1"]), "--out", str(out)]) == 0
    doc = io.read_json(out)
    assert doc["exact"] is True
    terms = {tuple(t["a"]): t["b"] for t in doc["quotient"]["terms"]}
    assert terms == {(2,): -1.0, (1,): 0.5, (0,): 0.0}
    assert "exact: true" in capsys.readouterr().out


def test_divide_cubic_by_ramp(polys, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["divide", str(polys["p"]), str(polys["d2"]), "--out", str(out)]) == 0
    doc = io.read_json(out)
    assert doc["exact"] is False
    assert {tuple(t["a"]): t["b"] for t in doc["quotient"]["terms"]}[(1,)] == 1.0
    assert "max gap p - (q + d) on grid: 0.5" in capsys.readouterr().out


def test_division_output_round_trips(polys, tmp_path):
    out = tmp_path / "r.json"
    main(["divide", str(polys["p"]), str(polys["d2"]), "--out", str(out)])
    quotient, remainder, exact = io.division_from_json(io.read_json(out))
    from tropdiv.division import divide
    ref = divide(CUBIC, RAMP)
    assert quotient == ref.quotient and remainder == ref.remainder and exact == ref.exact
    again = tmp_path / "again.json"
    io.write_json(again, io.division_to_json(ref))
    assert again.read_bytes() == out.read_bytes()


def test_malformed_json_names_field(tmp_path, polys, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 1, "terms": [{"a": [1], "b": 0}, {"a": [0]}]}')
    out = tmp_path / "r.json"
    assert main(["divide", str(bad), str(polys["d1"]), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "terms[1]" in err and "'b'" in err
    assert not out.exists()
    bad.write_text("{not json")
    assert main(["divide", str(bad), str(polys["d1"]), "--out", str(out)]) == 2
    assert main(["divide", str(tmp_path / "missing.json"), str(polys["d1"]), "--out", str(out)]) == 2


def test_lattice_violation_exit_code(tmp_path, polys):
    frac = tmp_path / "f.json"
    io.write_json(frac, {"dim": 1, "terms": [{"a": [0.5], "b": 0.0}, {"a": [0], "b": 0.0}]})
    assert main(["divide", str(polys["p"]), str(frac), "--out", str(tmp_path / "r.json")]) == 3


def test_divide_multi_ggp_and_direct_approx(polys, tmp_path):
    out = tmp_path / "m.json"
    assert main(["divide-multi", str(polys["p"]), str(polys["d1"]), str(polys["d2"]),
                 "--out", str(out)]) == 0
    assert io.read_json(out)["remainder"]["terms"] == []
    assert main(["ggp-divide", str(polys["p"]), str(polys["d1"]), "--out", str(out)]) == 0
    assert io.read_json(out)["max_abs_diff_vs_erosion"] < 1e-6
    assert main(["direct-approx", str(polys["p"]), str(polys["d1"]), "--out", str(out),
                 "--ggp-r-sweep", "1,1e6", "--ggp-beta", "50", "--ggp-max-iters", "2000"]) == 0
    doc = io.read_json(out)
    assert [r["R"] for r in doc["runs"]] == [1.0, 1e6]
    assert doc["runs"][1]["max_xi"] <= doc["runs"][0]["max_xi"]
    assert main(["direct-approx", str(polys["p"]), str(polys["d1"]), "--out", str(out),
                 "--ggp-r-sweep", "abc"]) == 2


def test_train_compress_eval_report(synth_files, tmp_path, capsys, caplog):
    train_path, test_path = synth_files
    model = tmp_path / "model.json"
    assert main(["train", str(train_path), "--hidden", "16", "--epochs", "5",
                 "--test", str(test_path), "--out", str(model)]) == 0
    reports = []
    for f in ("0.5", "0.25"):
        small, rep = tmp_path / f"small{f}.json", tmp_path / f"rep{f}.json"
        with caplog.at_level(logging.WARNING, logger="tropdiv"):
            assert main(["compress", str(model), str(train_path), "--test", str(test_path),
                         "--fraction", f, "--subset", "2000", "--out", str(small),
                         "--report", str(rep)]) == 0
        assert "exceeds the 300 available samples" in caplog.text
        reports.append(str(rep))
        assert io.read_model(small).n_hidden == int(np.ceil(float(f) * 16))
    capsys.readouterr()
    assert main(["eval", str(model), str(test_path)]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 200
    assert main(["report", *reports]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "dataset,fraction,original,reduced"
    assert len(lines) == 3 and lines[1].startswith("test,0.5,")


def test_invalid_fraction_exit_code(synth_files, tmp_path):
    train_path, _ = synth_files
    model = tmp_path / "model.json"
    main(["train", str(train_path), "--hidden", "4", "--epochs", "1", "--out", str(model)])
    out = tmp_path / "small.json"
    for f in ("0", "1.5", "-0.2"):
        assert main(["compress", str(model), str(train_path), "--fraction", f,
                     "--out", str(out)]) == 4
    assert not out.exists()


def test_iterate_command(synth_files, tmp_path, capsys):
    train_path, test_path = synth_files
    model = tmp_path / "model.json"
    main(["train", str(train_path), "--hidden", "32", "--epochs", "3", "--out", str(model)])
    out, rep = tmp_path / "it.json", tmp_path / "it_rep.json"
    assert main(["iterate", str(model), str(train_path), "--test", str(test_path),
                 "--halvings", "2", "--epochs", "2", "--out", str(out), "--report", str(rep)]) == 0
    assert io.read_model(out).n_hidden == 8
    doc = io.read_json(rep)
    assert doc["variant"] == "iterative" and doc["fraction"] == 0.25
    assert len(doc["extra"]["iterations"]) == 1


def test_commands_are_byte_deterministic(synth_files, tmp_path):
    train_path, _ = synth_files
    outputs = []
    for run in range(2):
        model, small, rep = (tmp_path / f"{name}{run}.json" for name in ("m", "s", "r"))
        main(["train", str(train_path), "--hidden", "8", "--epochs", "3", "--seed", "4",
              "--out", str(model)])
        main(["compress", str(model), str(train_path), "--fraction", "0.5", "--seed", "4",
              "--out", str(small), "--report", str(rep)])
        outputs.append([p.read_bytes() for p in (model, small, rep)])
    assert outputs[0] == outputs[1]


def test_report_errors_and_grouping(tmp_path, capsys):
    assert main(["report"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 42}')
    assert main(["report", str(bad)]) == 2

    def rep(dataset, f, variant, acc):
        return CompressionReport(f, 10, 5, 3, 2, 0, 1, 1, 0.0, 0.1, 0.99, acc,
                                 dataset=dataset, variant=variant)

    table = report_table([rep("b", 0.5, "reduced", 0.9), rep("a", 0.5, "reduced", 0.8),
                          rep("a", 0.1, "reduced", 0.7), rep("a", 0.1, "iterative", 0.75)])
    assert table.splitlines() == [
        "dataset,fraction,original,iterative,reduced",
        "a,0.5,0.9900,,0.8000",
        "a,0.1,0.9900,0.7500,0.7000",
        "b,0.5,0.9900,,0.9000",
    ]


def test_data_sources(tmp_path, capsys):
    from builders import TRAIN_IMAGES, TRAIN_LABELS
    model = tmp_path / "m.json"
    assert main(["train", "synth:n=100,d=3,sep=4,seed=1", "--hidden", "4", "--epochs", "2",
                 "--out", str(model)]) == 0
    assert main(["eval", str(model), f"idx:{TRAIN_IMAGES}:{TRAIN_LABELS}:3,6"]) == 2
    assert main(["eval", str(model), "idx:only-one-part"]) == 2


def test_console_script_runs(polys, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tropdiv.cli", "divide", str(polys["p"]),
                           str(polys["d1"]), "--out", str(tmp_path / "x.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "exact: true" in proc.stdout
