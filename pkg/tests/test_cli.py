import json

import pytest

from emergemac.cli import main


def write_config(path, extra=""):
    path.write_text(
        "total_sdus: 1\ntbler: 0.1\n"
        "episodes_train: 6\nepisodes_eval: 2\nepisodes_test: 2\neval_interval: 3\n"
        "batch_size: 8\nreplay_capacity: 256\nupdate_interval: 48\nhidden: [8, 8]\n"
        + extra)
    return str(path)


def test_baseline_command_outputs_csv(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    assert main(["baseline", "--config", cfg, "--episodes", "5", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == "episode,goodput,delivery_rate,duration"
    assert len(lines) == 1 + 5 + 1
    assert lines[-1].startswith("mean,")


def test_baseline_command_rerun_identical(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    main(["baseline", "--config", cfg, "--episodes", "4", "--seed", "9"])
    first = capsys.readouterr().out
    main(["baseline", "--config", cfg, "--episodes", "4", "--seed", "9"])
    second = capsys.readouterr().out
    assert first == second


def test_train_eval_report_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    out_dir = tmp_path / "runs"
    assert main(["train", "--config", cfg, "--seed", "1", "--reps", "1",
                 "--out", str(out_dir)]) == 0
    capsys.readouterr()
    ckpts = list(out_dir.glob("checkpoint_*.npz"))
    assert len(ckpts) == 1
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "report_summary.csv").exists()

    assert main(["eval", "--checkpoint", str(ckpts[0]), "--episodes", "3",
                 "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("episode,goodput,delivery_rate,duration")

    report_path = tmp_path / "again.csv"
    assert main(["report", "--in", str(out_dir), "--out", str(report_path)]) == 0
    assert report_path.exists()
    # regenerated detail CSV matches the one the campaign wrote
    assert report_path.read_bytes() == (out_dir / "report.csv").read_bytes()


def test_train_ablation_flag(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    out_dir = tmp_path / "runs"
    assert main(["train", "--config", cfg, "--seed", "1", "--reps", "1",
                 "--out", str(out_dir), "--ablation", "nocomm"]) == 0
    records = json.loads((out_dir / "records.json").read_text())
    assert records[0]["solution"] == "nocomm"


def test_sweep_command_baseline(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    out_path = tmp_path / "sweep.csv"
    assert main(["sweep", "--tbler", "0.1,0.01", "--sdus", "1", "--config", cfg,
                 "--episodes", "10", "--seed", "0", "--out", str(out_path)]) == 0
    lines = out_path.read_text().strip().splitlines()
    assert len(lines) == 3
    assert "contention-free" in lines[1]


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
