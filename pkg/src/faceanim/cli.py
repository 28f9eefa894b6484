"""Command-line entry point: one command per pipeline stage."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .attributes import (
    FacialAttributeVector,
    mix as mix_attributes,
    neutral,
    normalize,
    parse_attribute_csv,
)
from .data import load_image, load_manifest
from .datagen import generate_dataset, image_to_uint8
from .errors import FaceAnimError
from .networks import load_checkpoint
from .sprites import RenderSpec


def _echo_config(**kwargs) -> None:
    click.echo(json.dumps({"config": kwargs}, default=str))


def _save_png(img: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image_to_uint8(img)).save(path)


def _load_driving_csv(path: Path) -> list[FacialAttributeVector]:
    records = parse_attribute_csv(Path(path).read_text())
    return [normalize(raw) for _, raw in records]


@click.group()
def main():
    """Controllable face reenactment pipeline."""


@main.command("synth-data")
@click.option("--ids", type=int, required=True, help="Number of identities (one track each).")
@click.option("--frames", type=int, required=True, help="Frames per track.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resolution", type=int, default=64, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def synth_data(ids, frames, seed, resolution, out_dir):
    """Generate a synthetic face-track dataset with attribute sidecars."""
    _echo_config(ids=ids, frames=frames, seed=seed, resolution=resolution, out=out_dir)
    result = generate_dataset(ids, frames, seed, RenderSpec(resolution=resolution), out_dir)
    click.echo(f"wrote {result.n_frames} frames in {result.n_tracks} tracks -> {result.manifest_path}")


@main.command()
@click.option("--manifest", type=click.Path(path_type=Path), required=True)
@click.option("--preset", type=click.Choice(["desk", "paper"]), default="desk", show_default=True)
@click.option("--steps", type=int, default=3000, show_default=True)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("runs/train"), show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="JSON file with TrainConfig overrides; flags win over file values.")
@click.option("--resume", type=click.Path(path_type=Path), default=None,
              help="Training checkpoint to continue from.")
def train(manifest, preset, steps, batch_size, seed, out_dir, config_path, resume):
    """Train the two-generator model on a dataset manifest."""
    from .training import TrainConfig, resume_state, train as run_train, train_step, PairSampler, _save_train_checkpoint

    overrides = {}
    if config_path is not None:
        overrides = json.loads(Path(config_path).read_text())
    cfg_kwargs = {
        "preset": preset, "steps": steps, "batch_size": batch_size, "seed": seed,
        **overrides,
    }
    if "betas" in cfg_kwargs:
        cfg_kwargs["betas"] = tuple(cfg_kwargs["betas"])
    if "lambdas" in cfg_kwargs:
        cfg_kwargs["lambdas"] = tuple(cfg_kwargs["lambdas"])
    m = load_manifest(manifest)
    if resume is not None:
        state = resume_state(resume)
        _echo_config(resume=resume, steps=steps, out=out_dir)
        sampler = PairSampler(m, "train")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        while state.step < steps:
            train_step(state, sampler.batch(state.config.batch_size, state.rng))
        final = out / "checkpoint_final.pt"
        _save_train_checkpoint(state, final)
    else:
        config = TrainConfig(**cfg_kwargs)
        _echo_config(**cfg_kwargs, out=out_dir)
        final = run_train(config, m, out_dir)
    click.echo(f"checkpoint -> {final}")


@main.command("eval")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--manifest", type=click.Path(path_type=Path), required=True)
@click.option("--split", type=click.Choice(["train", "val", "test"]), default="val", show_default=True)
@click.option("--samples", type=int, default=64, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def eval_cmd(checkpoint, manifest, split, samples, threshold, seed):
    """Oracle-based evaluation: attribute RMSE and AU consistency."""
    from .evaluation import attribute_rmse, au_consistency
    from .reenact import reenact

    _echo_config(checkpoint=checkpoint, manifest=manifest, split=split,
                 samples=samples, threshold=threshold, seed=seed)
    bundle = load_checkpoint(checkpoint)
    m = load_manifest(manifest)
    tracks = [t for t in m.split_tracks(split) if len(t.frames) >= 2]
    rng = np.random.default_rng(seed)
    images, attrs = [], []
    for _ in range(samples):
        track = tracks[rng.integers(len(tracks))]
        i, j = rng.choice(len(track.frames), size=2, replace=False)
        fa = track.attributes[track.frames[j].frame_index]
        images.append(reenact(bundle, load_image(track.frames[i].image_path), fa))
        attrs.append(fa)
    per_attr, overall = attribute_rmse(images, attrs)
    report = au_consistency(images, attrs, threshold)
    click.echo(json.dumps({
        "attribute_rmse": overall,
        "per_attribute_rmse": [float(v) for v in per_attr],
        "au_consistency": {
            "balanced_accuracy": report.balanced_accuracy,
            "f_score": report.f_score,
            "tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn,
            "threshold": report.threshold,
        },
    }, indent=2))


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--source", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def neutralize(checkpoint, source, out_path):
    """Produce the neutral template face for a source image."""
    from . import reenact as reenact_mod

    _echo_config(checkpoint=checkpoint, source=source, out=out_path)
    bundle = load_checkpoint(checkpoint)
    _save_png(reenact_mod.neutralize(bundle, load_image(source)), Path(out_path))
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--source", type=click.Path(path_type=Path), required=True)
@click.option("--driving-csv", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def reenact(checkpoint, source, driving_csv, out_dir):
    """Reenact the source along an imported attribute track."""
    from .reenact import export_sequence, reenact_sequence

    _echo_config(checkpoint=checkpoint, source=source, driving_csv=driving_csv, out=out_dir)
    bundle = load_checkpoint(checkpoint)
    fas = _load_driving_csv(driving_csv)
    frames = reenact_sequence(bundle, load_image(source), fas)
    export_sequence(frames, fas, out_dir)
    click.echo(f"wrote {len(frames)} frames -> {out_dir}")


@main.command("mix")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--source", type=click.Path(path_type=Path), required=True)
@click.option("--set", "overrides", type=str, multiple=True,
              help="index=value attribute override; repeatable.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def mix_cmd(checkpoint, source, overrides, out_path):
    """Reenact with selective attribute overrides on the neutral vector."""
    from . import reenact as reenact_mod

    parsed = {}
    for item in overrides:
        idx, _, val = item.partition("=")
        try:
            parsed[int(idx)] = float(val)
        except ValueError:
            raise click.BadParameter(f"--set expects index=value, got {item!r}")
    _echo_config(checkpoint=checkpoint, source=source, set=parsed, out=out_path)
    bundle = load_checkpoint(checkpoint)
    fa = mix_attributes(neutral(), parsed)
    _save_png(reenact_mod.reenact(bundle, load_image(source), fa), Path(out_path))
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--source", type=click.Path(path_type=Path), required=True)
@click.option("--axis", type=click.Choice(["pitch", "yaw", "roll"]), required=True)
@click.option("--steps", "n_steps", type=int, default=9, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def sweep(checkpoint, source, axis, n_steps, out_dir):
    """Render a pose sweep along one axis."""
    from .reenact import pose_sweep

    _echo_config(checkpoint=checkpoint, source=source, axis=axis, steps=n_steps, out=out_dir)
    bundle = load_checkpoint(checkpoint)
    frames = pose_sweep(bundle, load_image(source), axis, n_steps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        _save_png(frame, out / f"sweep_{i:04d}.png")
    click.echo(f"wrote {len(frames)} frames -> {out_dir}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--session-ttl", type=float, default=1800.0, show_default=True)
def serve(checkpoint, host, port, session_ttl):
    """Run the HTTP inference service."""
    import uvicorn

    from .service import create_app

    _echo_config(checkpoint=checkpoint, host=host, port=port, session_ttl=session_ttl)
    bundle = load_checkpoint(checkpoint)
    uvicorn.run(create_app(bundle, session_ttl=session_ttl), host=host, port=port)


def entry() -> None:
    try:
        main(standalone_mode=False)
    except FaceAnimError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)


if __name__ == "__main__":
    entry()
