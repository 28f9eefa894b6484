"""Inference pipeline: neutralization, reenactment, sequences and sweeps.

All functions take a trained ModelBundle and numpy images in [-1, 1]. The
neutral template for a given (source, bundle) pair is cached so animating a
sequence runs the neutralizer once.
"""

from __future__ import annotations

import hashlib
import threading
import warnings
from pathlib import Path

import numpy as np
import torch

from .attributes import (
    ATTRIBUTE_NAMES,
    FacialAttributeVector,
    denormalize,
    neutral,
    serialize_attribute_csv,
)
from .errors import ValidationError
from .networks import ModelBundle, replicate_concat_torch, to_image, to_tensor

POSE_AXES = ("pitch", "yaw", "roll")
SWEEP_RANGE = (0.1, 0.9)

_cache_lock = threading.Lock()
_neutral_cache: dict[tuple[int, str], np.ndarray] = {}


def clamp_attributes(fa: FacialAttributeVector | np.ndarray) -> FacialAttributeVector:
    """Clamp out-of-range slider input into [0, 1] with a warning."""
    if isinstance(fa, FacialAttributeVector):
        return fa
    arr = np.asarray(fa, dtype=np.float64)
    clamped = np.clip(arr, 0.0, 1.0)
    if not np.array_equal(arr, clamped):
        warnings.warn("attribute values outside [0, 1] were clamped", stacklevel=2)
    return FacialAttributeVector.from_values(clamped)


def _check_source(bundle: ModelBundle, source: np.ndarray) -> np.ndarray:
    img = np.asarray(source, dtype=np.float64)
    res = bundle.arch.resolution
    if img.shape != (res, res, 3):
        raise ValidationError(
            f"source shape {img.shape} does not match model resolution {res}"
        )
    return img


def _image_key(img: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(img).tobytes()).hexdigest()


def neutralize(bundle: ModelBundle, source: np.ndarray) -> np.ndarray:
    """G_N applied to the source conditioned on the neutral attribute vector."""
    img = _check_source(bundle, source)
    key = (id(bundle), _image_key(img))
    with _cache_lock:
        cached = _neutral_cache.get(key)
    if cached is not None:
        return cached.copy()
    bundle.neutralizer.eval()
    with torch.no_grad():
        fa_n = torch.from_numpy(neutral().as_array()[None].astype(np.float32))
        out = bundle.neutralizer(replicate_concat_torch(to_tensor(img), fa_n))
    result = to_image(out)
    with _cache_lock:
        _neutral_cache[key] = result.copy()
    return result


def animate(bundle: ModelBundle, neutral_img: np.ndarray, fa_d: FacialAttributeVector) -> np.ndarray:
    """G_A applied to an already-neutralized face."""
    img = _check_source(bundle, neutral_img)
    bundle.animator.eval()
    with torch.no_grad():
        fa = torch.from_numpy(fa_d.as_array()[None].astype(np.float32))
        out = bundle.animator(replicate_concat_torch(to_tensor(img), fa))
    return to_image(out)


def reenact(
    bundle: ModelBundle, source: np.ndarray, fa_d: FacialAttributeVector | np.ndarray
) -> np.ndarray:
    """Two-stage pipeline: neutralize, then animate with the driving attributes."""
    fa = clamp_attributes(fa_d)
    return animate(bundle, neutralize(bundle, source), fa)


def reenact_sequence(
    bundle: ModelBundle,
    source: np.ndarray,
    fa_list: list[FacialAttributeVector],
) -> list[np.ndarray]:
    """Per-frame reenactment; the neutral template is computed once."""
    if not fa_list:
        raise ValidationError("fa_list is empty")
    template = neutralize(bundle, source)
    return [animate(bundle, template, clamp_attributes(fa)) for fa in fa_list]


def pose_sweep(
    bundle: ModelBundle, source: np.ndarray, axis: str, n_steps: int
) -> list[np.ndarray]:
    """Reenact along one pose axis, other attributes neutral."""
    if axis not in POSE_AXES:
        raise ValidationError(f"unknown pose axis {axis!r}, expected one of {POSE_AXES}")
    if n_steps < 2:
        raise ValidationError(f"n_steps must be >= 2, got {n_steps}")
    idx = POSE_AXES.index(axis)
    base = neutral().as_array()
    fas = []
    for value in np.linspace(SWEEP_RANGE[0], SWEEP_RANGE[1], n_steps):
        fa = base.copy()
        fa[idx] = value
        fas.append(FacialAttributeVector.from_values(fa))
    return reenact_sequence(bundle, source, fas)


def export_sequence(
    frames: list[np.ndarray],
    fa_list: list[FacialAttributeVector],
    out_dir: str | Path,
) -> Path:
    """Write numbered PNGs plus the attribute CSV sidecar; returns the directory."""
    from PIL import Image

    from .datagen import image_to_uint8

    if len(frames) != len(fa_list):
        raise ValidationError(
            f"{len(frames)} frames but {len(fa_list)} attribute vectors"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(image_to_uint8(frame)).save(out / f"frame_{i:04d}.png")
    records = [(i, denormalize(fa)) for i, fa in enumerate(fa_list)]
    (out / "attributes.csv").write_text(serialize_attribute_csv(records))
    return out
