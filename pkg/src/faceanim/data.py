"""Manifest loading, frame-pair sampling and image preprocessing.

Training is self-supervised on frame pairs drawn from one face track at a
time: both frames share an identity, so the driving frame doubles as pixel
ground truth for the reenacted output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .attributes import FacialAttributeVector, normalize, parse_attribute_csv
from .datagen import MANIFEST_VERSION, uint8_to_image
from .errors import ManifestError, ValidationError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Frame:
    image_path: Path
    frame_index: int


@dataclass(frozen=True)
class Track:
    track_id: str
    identity_id: str
    split: str
    frames: tuple[Frame, ...]
    # Normalized attribute vectors keyed by frame_index, parsed from the sidecar.
    attributes: dict[int, FacialAttributeVector]


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    resolution: int
    tracks: tuple[Track, ...]
    root: Path

    def split_tracks(self, split: str) -> tuple[Track, ...]:
        if split not in SPLITS:
            raise ValidationError(f"unknown split {split!r}, expected one of {SPLITS}")
        return tuple(t for t in self.tracks if t.split == split)

    def identity_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for t in self.tracks:
            seen.setdefault(t.identity_id, None)
        return tuple(seen)


@dataclass(frozen=True)
class TrainingPair:
    source_image: np.ndarray
    driving_image: np.ndarray
    driving_attrs: FacialAttributeVector
    track_id: str


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ManifestError(msg)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset manifest; every referenced file must exist."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None

    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {version!r}, expected {MANIFEST_VERSION}")
    _require(isinstance(doc.get("tracks"), list) and doc["tracks"], "manifest has no tracks")
    resolution = int(doc.get("resolution", 0))
    _require(resolution > 0, "manifest missing a positive resolution")

    root = path.parent
    tracks = []
    seen_track_ids: set[str] = set()
    for entry in doc["tracks"]:
        for key in ("track_id", "identity_id", "split", "frames", "attribute_csv_path"):
            _require(key in entry, f"track entry missing field {key!r}")
        track_id = entry["track_id"]
        _require(track_id not in seen_track_ids, f"duplicate track_id {track_id!r}")
        seen_track_ids.add(track_id)
        _require(
            entry["split"] in SPLITS,
            f"track {track_id}: unknown split {entry['split']!r}",
        )

        csv_path = root / entry["attribute_csv_path"]
        _require(csv_path.is_file(), f"track {track_id}: missing sidecar {csv_path}")
        attributes = {
            frame: normalize(raw) for frame, raw in parse_attribute_csv(csv_path.read_text())
        }

        frames = []
        for f in entry["frames"]:
            image_path = root / f["image_path"]
            _require(image_path.is_file(), f"track {track_id}: missing image {image_path}")
            frame_index = int(f["frame_index"])
            _require(
                frame_index in attributes,
                f"track {track_id}: frame {frame_index} absent from sidecar {csv_path}",
            )
            frames.append(Frame(image_path=image_path, frame_index=frame_index))
        _require(bool(frames), f"track {track_id}: no frames")

        tracks.append(
            Track(
                track_id=track_id,
                identity_id=entry["identity_id"],
                split=entry["split"],
                frames=tuple(frames),
                attributes=attributes,
            )
        )
    return DatasetManifest(
        version=version, resolution=resolution, tracks=tuple(tracks), root=root
    )


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file to a float HxWx3 array in [-1, 1]."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            return uint8_to_image(np.asarray(rgb))
    except (OSError, SyntaxError) as exc:
        raise ValidationError(f"cannot decode image {path}: {exc}") from None


def preprocess(raw_image: np.ndarray, target_resolution: int) -> np.ndarray:
    """Square-resize to the target and keep values in [-1, 1]."""
    img = np.asarray(raw_image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected HxWx3 image, got shape {img.shape}")
    if img.shape[:2] != (target_resolution, target_resolution):
        pil = Image.fromarray(image_to_uint8_safe(img))
        pil = pil.resize((target_resolution, target_resolution), Image.BILINEAR)
        img = uint8_to_image(np.asarray(pil))
    return np.clip(img, -1.0, 1.0)


def image_to_uint8_safe(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round((img + 1.0) * 127.5), 0, 255).astype(np.uint8)


def sample_pair(
    manifest: DatasetManifest, split: str, rng: np.random.Generator
) -> TrainingPair:
    """Uniformly pick a track of the split, then two distinct frames from it."""
    eligible = [t for t in manifest.split_tracks(split) if len(t.frames) >= 2]
    if not eligible:
        raise ValidationError(f"no track with >= 2 frames in split {split!r}")
    track = eligible[rng.integers(len(eligible))]
    i, j = rng.choice(len(track.frames), size=2, replace=False)
    source, driving = track.frames[i], track.frames[j]
    return TrainingPair(
        source_image=load_image(source.image_path),
        driving_image=load_image(driving.image_path),
        driving_attrs=track.attributes[driving.frame_index],
        track_id=track.track_id,
    )


def make_batch(pairs: list[TrainingPair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack pairs into (sources, drivings, driving attribute matrix)."""
    if not pairs:
        raise ValidationError("cannot batch an empty pair list")
    shapes = {p.source_image.shape for p in pairs} | {p.driving_image.shape for p in pairs}
    if len(shapes) != 1:
        raise ValidationError(f"mixed image resolutions in batch: {sorted(shapes)}")
    sources = np.stack([p.source_image for p in pairs])
    drivings = np.stack([p.driving_image for p in pairs])
    attrs = np.stack([p.driving_attrs.as_array() for p in pairs])
    return sources, drivings, attrs
