import numpy as np
import pytest

from relusmooth.cli import main
from relusmooth.data import generate_dataset, load_attacked_set, save_dataset
from relusmooth.nn import init_network, save_model


@pytest.fixture()
def tiny_setup(tmp_path):
    """Small trained model + dataset files for CLI runs."""
    args = [
        "train",
        "--kind", "moons",
        "--size", "80",
        "--noise", "0.05",
        "--data-seed", "3",
        "--hidden", "8",
        "--seed", "5",
        "--epochs", "150",
        "--out", str(tmp_path / "model.txt"),
        "--save-dataset", str(tmp_path / "data.txt"),
    ]
    assert main(args) == 0
    return tmp_path


def test_train_writes_model_and_dataset(tiny_setup, capsys):
    assert (tiny_setup / "model.txt").exists()
    assert (tiny_setup / "data.txt").exists()


def test_attack_subcommand(tiny_setup):
    out = tiny_setup / "attacked.txt"
    code = main(
        [
            "attack",
            "--model", str(tiny_setup / "model.txt"),
            "--dataset", str(tiny_setup / "data.txt"),
            "--attack", "pgd",
            "--epsilon", "0.12",
            "--seed", "100",
            "--out", str(out),
            "--results", str(tiny_setup / "results.tsv"),
        ]
    )
    assert code == 0
    aset = load_attacked_set(out)
    assert len(aset) == 80
    lines = (tiny_setup / "results.tsv").read_text().strip().split("\n")
    assert lines[0].startswith("index\tlabel\tattacked\tsuccess")
    assert len(lines) == 81  # header + one row per sample
    successes = sum(int(ln.split("\t")[3]) for ln in lines[1:])
    assert successes == aset.adv_count


def test_defend_subcommand(tiny_setup, capsys):
    code = main(
        [
            "defend",
            "--model", str(tiny_setup / "model.txt"),
            "--dataset", str(tiny_setup / "data.txt"),
            "--radius", "0.2",
            "--directions", "10",
            "--out", str(tiny_setup / "defended.tsv"),
        ]
    )
    assert code == 0
    text = (tiny_setup / "defended.tsv").read_text()
    assert text.startswith("index\tlabel\tprediction\tcorrect")
    assert "defended accuracy" in capsys.readouterr().out


def test_evaluate_subcommand(tiny_setup, capsys):
    main(
        [
            "attack",
            "--model", str(tiny_setup / "model.txt"),
            "--dataset", str(tiny_setup / "data.txt"),
            "--attack", "fgsm",
            "--epsilon", "0.12",
            "--out", str(tiny_setup / "attacked.txt"),
        ]
    )
    code = main(
        [
            "evaluate",
            "--model", str(tiny_setup / "model.txt"),
            "--clean", str(tiny_setup / "data.txt"),
            "--attacked", str(tiny_setup / "attacked.txt"),
            "--epsilon", "0.12",
            "--radius", "0.2",
            "--directions", "10",
            "--attack-label", "fgsm",
            "--out", str(tiny_setup / "report.tsv"),
        ]
    )
    assert code == 0
    report = (tiny_setup / "report.tsv").read_text()
    assert report.startswith("attack\tsampler")
    assert "defence_rate" in capsys.readouterr().out


def test_spectrum_subcommand_writes_tsv_and_figure(tmp_path, capsys):
    net = init_network((2, 8, 1), seed=7)
    save_model(net, tmp_path / "m.txt")
    out = tmp_path / "decay.tsv"
    code = main(
        [
            "spectrum",
            "--model", str(tmp_path / "m.txt"),
            "--radius", "2.0",
            "--grid", "10",
            "--max-norm", "30",
            "--out", str(out),
        ]
    )
    assert code == 0
    text = out.read_text()
    assert "omega_norm\tspectrum_mag\taveraged_mag" in text
    assert "# multiplier_convention_ratio" in text
    assert (tmp_path / "decay_decay.png").exists()


def test_trained_unbiased_model_spectrum_pipeline(tmp_path):
    """train --unbiased keeps biases frozen so spectrum works on the result."""
    code = main(
        [
            "train",
            "--kind", "moons",
            "--size", "120",
            "--noise", "0.05",
            "--data-seed", "3",
            "--hidden", "8",
            "--seed", "5",
            "--epochs", "150",
            "--unbiased",
            "--out", str(tmp_path / "unb.txt"),
        ]
    )
    assert code == 0
    from relusmooth.nn import load_model

    assert load_model(tmp_path / "unb.txt").is_unbiased()
    code = main(
        [
            "spectrum",
            "--model", str(tmp_path / "unb.txt"),
            "--radius", "2.0",
            "--grid", "6",
            "--no-figures",
            "--out", str(tmp_path / "d.tsv"),
        ]
    )
    assert code == 0


def test_spectrum_no_figures_flag(tmp_path):
    net = init_network((2, 8, 1), seed=7)
    save_model(net, tmp_path / "m.txt")
    code = main(
        [
            "spectrum",
            "--model", str(tmp_path / "m.txt"),
            "--radius", "1.0",
            "--grid", "6",
            "--no-figures",
            "--out", str(tmp_path / "d.tsv"),
        ]
    )
    assert code == 0
    assert not (tmp_path / "d_decay.png").exists()


def test_region_stats_subcommand(tmp_path, capsys):
    net = init_network((2, 8, 1), seed=7)
    save_model(net, tmp_path / "m.txt")
    code = main(
        [
            "region-stats",
            "--model", str(tmp_path / "m.txt"),
            "--point", "0.3,0.4",
            "--point2", "0.6,0.1",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "hyperplane distances" in out
    assert "crossings" in out
    assert "sector count" in out


def test_region_stats_na_for_biased_model(tmp_path, capsys):
    net = init_network((2, 8, 2), seed=1, biased=True)
    save_model(net, tmp_path / "m.txt")
    assert main(["region-stats", "--model", str(tmp_path / "m.txt"), "--point", "0.1,0.2"]) == 0
    assert "n/a" in capsys.readouterr().out


RUN_CONFIG = """
[dataset]
kind = moons
size = 60
noise = 0.05
seed = 3

[model]
hidden = 8
seed = 5
epochs = 120

[threat]
epsilon = 0.12

[attacks]
names = fgsm
seed = 100

[defense]
radii = 0.1, 0.2
directions = 8
seed = 9
"""


def test_run_subcommand_writes_reports_and_figure(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(RUN_CONFIG)
    out_dir = tmp_path / "results"
    code = main(["run", "--config", str(cfg), "--out-dir", str(out_dir)])
    assert code == 0
    assert (out_dir / "report.tsv").exists()
    assert (out_dir / "report.txt").exists()
    assert (out_dir / "defence_sweep.png").exists()
    tsv = (out_dir / "report.tsv").read_text()
    assert len(tsv.strip().split("\n")) == 3  # header + 2 radius rows


def test_run_is_byte_identical(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(RUN_CONFIG)
    main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "a"), "--no-figures"])
    main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "b"), "--no-figures"])
    assert (tmp_path / "a/report.tsv").read_bytes() == (tmp_path / "b/report.tsv").read_bytes()
    assert (tmp_path / "a/report.txt").read_bytes() == (tmp_path / "b/report.txt").read_bytes()


def test_usage_error_exit_code_is_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["attack", "--model", "missing.txt"])
    assert exc.value.code == 1


def test_missing_file_exit_code_is_one(tmp_path, capsys):
    code = main(
        [
            "attack",
            "--model", str(tmp_path / "nope.txt"),
            "--dataset", str(tmp_path / "nope2.txt"),
            "--attack", "fgsm",
            "--epsilon", "0.1",
            "--out", str(tmp_path / "o.txt"),
        ]
    )
    assert code == 1


def test_bad_config_exit_code_is_one(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[dataset]\nkind = moons\n")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "r")]) == 1


def test_invariant_violation_exit_code_is_two(tmp_path, capsys):
    """A forged attacked set (perturbation over budget) must exit 2."""
    ds = generate_dataset("moons", 30, 0.05, seed=3)
    net = init_network((2, 8, 2), seed=5, biased=True)
    save_model(net, tmp_path / "m.txt")
    save_dataset(ds, tmp_path / "clean.txt")
    from relusmooth.data import AttackedSet, save_attacked_set
    from relusmooth.nn import predict_topk

    # mark one sample adversarial with a huge perturbation
    inputs = ds.inputs.copy()
    mask = np.zeros(len(ds), dtype=bool)
    inputs[0] = inputs[0] + 5.0
    mask[0] = True
    save_attacked_set(AttackedSet("forged", inputs, ds.labels, mask), tmp_path / "aset.txt")
    code = main(
        [
            "evaluate",
            "--model", str(tmp_path / "m.txt"),
            "--clean", str(tmp_path / "clean.txt"),
            "--attacked", str(tmp_path / "aset.txt"),
            "--epsilon", "0.1",
            "--radius", "0.1",
            "--directions", "5",
        ]
    )
    assert code == 2
