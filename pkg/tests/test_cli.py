import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from faceanim.cli import main
from faceanim.data import load_manifest
from faceanim.networks import load_checkpoint


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory, runner):
    """Dataset + 1-step checkpoint shared by the command smoke tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    r = runner.invoke(
        main,
        ["synth-data", "--ids", "4", "--frames", "4", "--seed", "2",
         "--resolution", "64", "--out", str(data)],
        catch_exceptions=False,
    )
    assert r.exit_code == 0, r.output
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"identity_epochs": 1, "checkpoint_interval": 1}))
    run_dir = root / "run"
    r = runner.invoke(
        main,
        ["train", "--manifest", str(data / "manifest.json"), "--steps", "1",
         "--batch-size", "2", "--seed", "2", "--out", str(run_dir),
         "--config", str(cfg)],
        catch_exceptions=False,
    )
    assert r.exit_code == 0, r.output
    return {
        "manifest": data / "manifest.json",
        "checkpoint": run_dir / "checkpoint_final.pt",
        "source": next((data).rglob("frame_0000.png")),
        "run_dir": run_dir,
    }


def test_synth_data_outputs(cli_workspace):
    m = load_manifest(cli_workspace["manifest"])
    assert len(m.tracks) == 4
    assert all(len(t.frames) == 4 for t in m.tracks)


def test_train_wrote_checkpoint(cli_workspace):
    bundle = load_checkpoint(cli_workspace["checkpoint"])
    assert bundle.trained_steps == 1


def test_train_resume_continues(cli_workspace, runner, tmp_path):
    out = tmp_path / "resumed"
    r = runner.invoke(
        main,
        ["train", "--manifest", str(cli_workspace["manifest"]),
         "--resume", str(cli_workspace["run_dir"] / "checkpoint_000001.pt"),
         "--steps", "2", "--out", str(out)],
        catch_exceptions=False,
    )
    assert r.exit_code == 0, r.output
    assert load_checkpoint(out / "checkpoint_final.pt").trained_steps == 2


def test_eval_reports_metrics(cli_workspace, runner):
    r = runner.invoke(
        main,
        ["eval", "--checkpoint", str(cli_workspace["checkpoint"]),
         "--manifest", str(cli_workspace["manifest"]),
         "--split", "val", "--samples", "2", "--seed", "0"],
        catch_exceptions=False,
    )
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output.split("\n", 1)[1])
    assert "attribute_rmse" in doc and "au_consistency" in doc


def test_neutralize_and_mix_and_sweep(cli_workspace, runner, tmp_path):
    ckpt, src = str(cli_workspace["checkpoint"]), str(cli_workspace["source"])
    r = runner.invoke(
        main, ["neutralize", "--checkpoint", ckpt, "--source", src,
               "--out", str(tmp_path / "neutral.png")], catch_exceptions=False)
    assert r.exit_code == 0 and (tmp_path / "neutral.png").is_file()
    r = runner.invoke(
        main, ["mix", "--checkpoint", ckpt, "--source", src,
               "--set", "1=0.8", "--set", "8=0.6",
               "--out", str(tmp_path / "mixed.png")], catch_exceptions=False)
    assert r.exit_code == 0 and (tmp_path / "mixed.png").is_file()
    r = runner.invoke(
        main, ["sweep", "--checkpoint", ckpt, "--source", src, "--axis", "yaw",
               "--steps", "3", "--out", str(tmp_path / "sweep")], catch_exceptions=False)
    assert r.exit_code == 0
    assert len(list((tmp_path / "sweep").glob("sweep_*.png"))) == 3


def test_reenact_sequence_command(cli_workspace, runner, tmp_path):
    # Drive with the dataset's own sidecar CSV for one track.
    sidecar = next(Path(cli_workspace["manifest"]).parent.rglob("attributes.csv"))
    r = runner.invoke(
        main,
        ["reenact", "--checkpoint", str(cli_workspace["checkpoint"]),
         "--source", str(cli_workspace["source"]),
         "--driving-csv", str(sidecar), "--out", str(tmp_path / "seq")],
        catch_exceptions=False,
    )
    assert r.exit_code == 0, r.output
    assert len(list((tmp_path / "seq").glob("frame_*.png"))) == 4
    assert (tmp_path / "seq" / "attributes.csv").is_file()


def test_mix_rejects_bad_override(cli_workspace, runner, tmp_path):
    r = runner.invoke(
        main, ["mix", "--checkpoint", str(cli_workspace["checkpoint"]),
               "--source", str(cli_workspace["source"]),
               "--set", "notanumber", "--out", str(tmp_path / "x.png")])
    assert r.exit_code != 0
