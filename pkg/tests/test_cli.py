"""Command-line contract: exit codes, config precedence, artifacts."""

import json
from pathlib import Path

import numpy as np
import pytest

from dfreg.checkpoint import save_checkpoint_dir
from dfreg.cli import main
from dfreg.tensor import ParameterSet

SNAPSHOTS = Path(__file__).parent / "snapshots"

TINY = ["--epochs", "1", "--batch-size", "12", "--synth-train", "24",
        "--synth-test", "12", "--synth-classes", "4", "--seed", "3"]


def _train(tmp_path, *extra):
    return main(["train", *TINY, "--out", str(tmp_path), "--name", "run",
                 *extra])


def test_train_success_writes_run(tmp_path, capsys):
    assert _train(tmp_path) == 0
    out = capsys.readouterr().out
    assert "final epoch 1" in out
    run = tmp_path / "run"
    for rel in ("config.json", "metrics.csv", "model.json", "model.bin",
                "analysis/entropy.csv"):
        assert (run / rel).exists(), rel


def test_unknown_flag_is_config_error(tmp_path, capsys):
    assert _train(tmp_path, "--funky") == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_and_missing_subcommand(capsys):
    assert main(["infer"]) == 1
    assert main([]) == 1


def test_bad_flag_value(tmp_path, capsys):
    assert _train(tmp_path, "--epochs", "three") == 1
    assert _train(tmp_path, "--variant", "vgg") == 1


def test_missing_dataset_directory(tmp_path, capsys):
    assert _train(tmp_path, "--dataset", "mnist:/nowhere/at/all") == 1
    err = capsys.readouterr().err
    assert "error:" in err and "/nowhere/at/all" in err


@pytest.mark.filterwarnings("ignore:invalid value encountered:RuntimeWarning")
def test_huge_lr_aborts_numerically(tmp_path, capsys):
    rc = _train(tmp_path, "--optimizer", "sgd_momentum", "--lr", "1e160",
                "--schedule", "constant")
    assert rc == 2
    err = capsys.readouterr().err
    assert "numerical error:" in err and "non-finite" in err


def test_analyze_nan_checkpoint_aborts_numerically(tmp_path, capsys):
    pset = ParameterSet()
    kernel = np.zeros((2, 1, 3, 3))
    kernel[0, 0, 1, 1] = float("nan")
    pset.add("conv1.weight", "conv_kernel", kernel)
    ckpt = tmp_path / "ckpt"
    ckpt.mkdir()
    save_checkpoint_dir(ckpt, pset, {"variant": "plain"})
    rc = main(["analyze", "--checkpoint", str(ckpt),
               "--out", str(tmp_path / "a")])
    assert rc == 2
    assert "numerical error:" in capsys.readouterr().err


def test_gradcheck_defaults_pass(tmp_path, capsys):
    rc = main(["gradcheck", "--ops", "relu,dense", "--cases", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "relu" in out and "dense" in out and "ok" in out
    csv = (tmp_path / "gradcheck.csv").read_text().splitlines()
    assert csv[0] == "op,cases,max_rel_error,threshold,status"
    assert len(csv) == 3
    assert (tmp_path / "config.json").exists()


def test_gradcheck_ops_subset_restricts_output(capsys):
    rc = main(["gradcheck", "--ops", "dfreg", "--cases", "2"])
    assert rc == 0
    rows = [l for l in capsys.readouterr().out.splitlines()[1:] if l.strip()]
    assert len(rows) == 1 and rows[0].startswith("dfreg_loss")


def test_gradcheck_huge_h_fails_with_exit_3(capsys):
    rc = main(["gradcheck", "--ops", "softmax", "--cases", "2", "--h", "1.0"])
    assert rc == 3
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert "softmax_cross_entropy" in captured.err


def test_gradcheck_unknown_op(capsys):
    assert main(["gradcheck", "--ops", "qr"]) == 1
    assert "qr" in capsys.readouterr().err


def test_config_file_toml_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        "variant = \"dfreg_no_bn\"\n"
        "epochs = 1\nbatch_size = 12\nsynth_train = 24\nsynth_test = 12\n"
        "synth_classes = 4\nseed = 3\nlr = 5e-3\nname = \"filecfg\"\n"
        f"out_dir = \"{tmp_path}\"\n"
        "[energy]\nalpha = 1e-3\nnum_bins = 16\n"
    )
    rc = main(["train", "--config", str(cfg), "--alpha", "0.0005",
               "--lr", "1e-3"])
    assert rc == 0
    echo = json.loads((tmp_path / "filecfg" / "config.json").read_text())
    assert echo["energy"]["alpha"] == 0.0005
    assert echo["energy"]["num_bins"] == 16
    assert echo["lr"] == 1e-3
    assert echo["variant"] == "dfreg_no_bn"


def test_config_file_json_lambda_key(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "variant": "l2", "epochs": 1, "batch_size": 12, "synth_train": 24,
        "synth_test": 12, "synth_classes": 4, "seed": 3,
        "name": "l2run", "out_dir": str(tmp_path),
        "energy": {"lambda": 1e-4},
    }))
    assert main(["train", "--config", str(cfg)]) == 0
    echo = json.loads((tmp_path / "l2run" / "config.json").read_text())
    assert echo["energy"]["lambda"] == 1e-4
    assert echo["energy"]["alpha"] == 0.0


def test_config_file_errors(tmp_path, capsys):
    missing = main(["train", "--config", str(tmp_path / "nope.toml")])
    assert missing == 1
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["train", "--config", str(bad_json)]) == 1
    bad_key = tmp_path / "key.json"
    bad_key.write_text(json.dumps({"variant": "plain", "learning_rate": 1}))
    assert main(["train", "--config", str(bad_key)]) == 1
    assert "learning_rate" in capsys.readouterr().err
    bad_list = tmp_path / "list.json"
    bad_list.write_text(json.dumps([1, 2]))
    assert main(["train", "--config", str(bad_list)]) == 1


def test_compare_variants_and_seeds(tmp_path, capsys):
    rc = main(["compare", *TINY, "--variants", "plain,l2",
               "--seeds", "1,2", "--out", str(tmp_path / "cmp")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "4/4 runs succeeded" in out
    summary = (tmp_path / "cmp" / "summary.csv").read_text().splitlines()
    assert len(summary) == 5
    variants = sorted(row.split(",")[1] for row in summary[1:])
    seeds = sorted(row.split(",")[2] for row in summary[1:])
    assert variants == ["l2", "l2", "plain", "plain"]
    assert seeds == ["1", "1", "2", "2"]
    runs = sorted(p.name for p in (tmp_path / "cmp" / "runs").iterdir())
    assert len(runs) == 4


def test_compare_config_file_runs_list(tmp_path):
    cfg = tmp_path / "cmp.toml"
    cfg.write_text(
        "[base]\nepochs = 1\nbatch_size = 12\nsynth_train = 24\n"
        "synth_test = 12\nsynth_classes = 4\nseed = 5\n"
        "[[runs]]\nvariant = \"plain\"\n"
        "[[runs]]\nvariant = \"dfreg_no_bn\"\n"
    )
    rc = main(["compare", "--config", str(cfg), "--out", str(tmp_path / "c")])
    assert rc == 0
    summary = (tmp_path / "c" / "summary.csv").read_text().splitlines()
    assert len(summary) == 3
    assert summary[1].split(",")[1] == "plain"
    assert summary[2].split(",")[1] == "dfreg_no_bn"


def test_compare_without_runs_is_config_error(capsys):
    assert main(["compare", "--out", "ignored"]) == 1
    assert "no runs to compare" in capsys.readouterr().err


def test_compare_every_run_failing_exits_1(tmp_path, capsys):
    rc = main(["compare", *TINY, "--batch-size", "4000",
               "--variants", "plain", "--out", str(tmp_path / "cmp")])
    assert rc == 1
    captured = capsys.readouterr()
    assert "0/1 runs succeeded" in captured.out
    assert "failed" in captured.err


def test_analyze_checkpoint_cli(tmp_path, capsys):
    assert _train(tmp_path) == 0
    out_dir = tmp_path / "analysis2"
    rc = main(["analyze", "--checkpoint", str(tmp_path / "run"),
               "--out", str(out_dir), "--layers", "conv1",
               "--log-base", "2", "--bins", "40", "--radius", "1.5"])
    assert rc == 0
    assert "conv1.weight" in capsys.readouterr().out
    entropy = (out_dir / "entropy.csv").read_text().splitlines()
    assert entropy[1].endswith(",40,hard,2")
    assert len(entropy) == 3  # header + conv1 + all_conv
    echo = json.loads((out_dir / "config.json").read_text())
    assert echo["bins"] == 40 and echo["radius"] == 1.5
    assert echo["layers"] == ["conv1"]


def test_analyze_missing_checkpoint(tmp_path, capsys):
    rc = main(["analyze", "--checkpoint", str(tmp_path / "ghost"),
               "--out", str(tmp_path / "a")])
    assert rc == 1
    assert "not found" in capsys.readouterr().err


def test_export_plots_is_byte_stable(tmp_path, capsys):
    assert _train(tmp_path, "--variant", "dfreg_no_bn") == 0
    run = str(tmp_path / "run")
    out1, out2 = tmp_path / "p1", tmp_path / "p2"
    assert main(["export-plots", "--run", run, "--out", str(out1)]) == 0
    assert main(["export-plots", "--run", run, "--out", str(out2)]) == 0
    svgs1 = sorted(p.name for p in out1.glob("*.svg"))
    svgs2 = sorted(p.name for p in out2.glob("*.svg"))
    assert svgs1 == svgs2 and len(svgs1) == 8
    for name in svgs1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_export_plots_single_scale(tmp_path):
    assert _train(tmp_path) == 0
    out = tmp_path / "plots-linear"
    rc = main(["export-plots", "--run", str(tmp_path / "run"),
               "--out", str(out), "--spectrum-scale", "linear"])
    assert rc == 0
    assert len(list(out.glob("spectrum_*_linear.svg"))) == 2
    assert not list(out.glob("spectrum_*_log.svg"))


def test_export_plots_missing_run(tmp_path, capsys):
    assert main(["export-plots", "--run", str(tmp_path / "ghost")]) == 1
    assert "no metrics.csv" in capsys.readouterr().err


@pytest.mark.parametrize("name,argv", [
    ("help_main", ["--help"]),
    ("help_train", ["train", "--help"]),
    ("help_compare", ["compare", "--help"]),
    ("help_analyze", ["analyze", "--help"]),
    ("help_gradcheck", ["gradcheck", "--help"]),
    ("help_export_plots", ["export-plots", "--help"]),
])
def test_help_text_snapshots(name, argv, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "80")
    assert main(argv) == 0
    out = capsys.readouterr().out
    want = (SNAPSHOTS / f"{name}.txt").read_text()
    assert out == want
