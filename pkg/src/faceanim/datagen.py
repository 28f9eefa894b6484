"""Synthetic face-track dataset generation.

Each identity gets one track: a smooth random walk through attribute space
rendered frame by frame. The attribute sidecar CSV is written first and the
frames are rendered from a re-parse of it, so the CSV is the ground truth
and the "parse sidecar, re-render, compare pixels" round trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .attributes import (
    NUM_ATTRIBUTES,
    FacialAttributeVector,
    denormalize,
    normalize,
    parse_attribute_csv,
    serialize_attribute_csv,
)
from .errors import ValidationError
from .sprites import RenderSpec, SyntheticIdentity, render

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"

# Random-walk step scale in normalized attribute units per frame. Small
# enough that consecutive frames look like adjacent video frames, large
# enough that a 40-frame track covers a useful slice of attribute space.
WALK_STEP = 0.08

TRAIN_FRACTION = 0.75


@dataclass(frozen=True)
class GeneratedDataset:
    """Where generate_dataset put its output."""

    manifest_path: Path
    n_tracks: int
    n_frames: int


def attribute_walk(n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth per-frame attribute trajectory, shape (n_frames, 20), in [0, 1].

    Frame 0 is always the exact neutral vector — every track opens with a
    canonical expressionless view of its identity, which training uses as a
    pixel-space anchor for the neutralizer. Gaussian increments reflected at
    the interval ends; reflection keeps the stationary distribution uniform
    instead of piling mass onto the clip boundaries.
    """
    from .attributes import neutral

    values = np.empty((n_frames, NUM_ATTRIBUTES))
    values[0] = neutral().as_array()
    if n_frames > 1:
        # The walk restarts from a uniform draw so coverage of attribute
        # space does not depend on diffusing away from neutral.
        values[1] = rng.uniform(0.0, 1.0, NUM_ATTRIBUTES)
    for t in range(2, n_frames):
        step = rng.normal(0.0, WALK_STEP, NUM_ATTRIBUTES)
        nxt = values[t - 1] + step
        nxt = np.abs(nxt)          # reflect at 0
        nxt = 1.0 - np.abs(1.0 - nxt)  # reflect at 1
        values[t] = np.clip(nxt, 0.0, 1.0)
    return values


def image_to_uint8(img: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] float render to the uint8 pixels that get written."""
    return np.clip(np.round((img + 1.0) * 127.5), 0, 255).astype(np.uint8)


def uint8_to_image(pixels: np.ndarray) -> np.ndarray:
    """Inverse range map for a decoded PNG, back to [-1, 1] floats."""
    return pixels.astype(np.float64) / 127.5 - 1.0


def assign_splits(n_tracks: int, rng: np.random.Generator) -> list[str]:
    """Per-track split labels: 75% train, remainder halved into val/test."""
    n_train = int(n_tracks * TRAIN_FRACTION)
    n_val = (n_tracks - n_train + 1) // 2
    labels = ["train"] * n_train + ["val"] * n_val
    labels += ["test"] * (n_tracks - len(labels))
    perm = rng.permutation(n_tracks)
    out = [""] * n_tracks
    for slot, track in enumerate(perm):
        out[track] = labels[slot]
    return out


def generate_dataset(
    n_ids: int,
    frames_per_id: int,
    seed: int,
    spec: RenderSpec,
    out_dir: str | Path,
) -> GeneratedDataset:
    """Write images, attribute sidecars and a manifest; deterministic per seed."""
    if n_ids < 2:
        raise ValidationError(f"need at least 2 identities, got {n_ids}")
    if frames_per_id < 2:
        raise ValidationError(f"need at least 2 frames per identity, got {frames_per_id}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    splits = assign_splits(n_ids, rng)

    tracks = []
    for idx in range(n_ids):
        identity = SyntheticIdentity.random(rng)
        walk = attribute_walk(frames_per_id, rng)

        track_dir = out / f"track_{idx:04d}"
        track_dir.mkdir(exist_ok=True)
        records = [
            (t, denormalize(FacialAttributeVector.from_values(walk[t])))
            for t in range(frames_per_id)
        ]
        csv_path = track_dir / "attributes.csv"
        csv_path.write_text(serialize_attribute_csv(records))

        frames = []
        for frame_index, raw in parse_attribute_csv(csv_path.read_text()):
            img = render(identity, normalize(raw), spec)
            image_path = track_dir / f"frame_{frame_index:04d}.png"
            Image.fromarray(image_to_uint8(img)).save(image_path)
            frames.append(
                {"image_path": str(image_path.relative_to(out)), "frame_index": frame_index}
            )

        tracks.append(
            {
                "track_id": f"track_{idx:04d}",
                "identity_id": f"id_{idx:04d}",
                "split": splits[idx],
                "attribute_csv_path": str(csv_path.relative_to(out)),
                "frames": frames,
                "identity": {
                    "skin_hue": identity.skin_hue,
                    "face_aspect": identity.face_aspect,
                    "eye_spacing": identity.eye_spacing,
                    "feature_seed": identity.feature_seed,
                },
            }
        )

    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(
        json.dumps(
            {"version": MANIFEST_VERSION, "resolution": spec.resolution, "tracks": tracks},
            indent=2,
        )
        + "\n"
    )
    return GeneratedDataset(
        manifest_path=manifest_path,
        n_tracks=n_ids,
        n_frames=n_ids * frames_per_id,
    )
