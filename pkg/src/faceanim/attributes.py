"""Interpretable 20-value control vector: head pose plus action-unit intensities.

Packed order is [pitch, yaw, roll, AU01..AU45] with every component
normalized to [0, 1]. Pose angles map linearly from [-pi/2, +pi/2] radians,
AU intensities from the [0, 5] scale used by common AU extractors. The
neutral vector is [0.5, 0.5, 0.5, 0, ..., 0] (central pose, all muscles
relaxed).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AttributeCSVError, ValidationError

# The 17 intensity-valued action units emitted by OpenFace-style extractors,
# in packed order. Indices 3..19 of the full vector.
AU_COLUMNS = (
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r",
    "AU10_r", "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r",
    "AU25_r", "AU26_r", "AU45_r",
)
POSE_COLUMNS = ("pose_Rx", "pose_Ry", "pose_Rz")
FRAME_COLUMN = "frame"

NUM_POSE = 3
NUM_AUS = len(AU_COLUMNS)
NUM_ATTRIBUTES = NUM_POSE + NUM_AUS  # 20

POSE_RANGE_RAD = (-math.pi / 2, math.pi / 2)
AU_RANGE = (0.0, 5.0)

# Human-readable slider labels, index-aligned with the packed vector.
ATTRIBUTE_NAMES = ("pitch", "yaw", "roll") + AU_COLUMNS


def _check_unit(values: Iterable[float], what: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    for v in out:
        if not math.isfinite(v) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"{what} component {v!r} outside [0, 1]")
    return out


@dataclass(frozen=True)
class FacialAttributeVector:
    """Normalized control signal: 3 pose angles + 17 AU intensities."""

    pose: tuple[float, float, float]
    aus: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "pose", _check_unit(self.pose, "pose"))
        object.__setattr__(self, "aus", _check_unit(self.aus, "aus"))
        if len(self.pose) != NUM_POSE:
            raise ValidationError(f"expected {NUM_POSE} pose values, got {len(self.pose)}")
        if len(self.aus) != NUM_AUS:
            raise ValidationError(f"expected {NUM_AUS} AU values, got {len(self.aus)}")

    @property
    def values(self) -> tuple[float, ...]:
        return self.pose + self.aus

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "FacialAttributeVector":
        vals = tuple(float(v) for v in values)
        if len(vals) != NUM_ATTRIBUTES:
            raise ValidationError(f"expected {NUM_ATTRIBUTES} values, got {len(vals)}")
        return cls(pose=vals[:NUM_POSE], aus=vals[NUM_POSE:])


@dataclass(frozen=True)
class RawAttributes:
    """Pre-normalization carrier: pose in radians, AU intensities on [0, 5]."""

    pose_rad: tuple[float, float, float]
    au_intensity: tuple[float, ...]

    def __post_init__(self):
        if len(self.pose_rad) != NUM_POSE or len(self.au_intensity) != NUM_AUS:
            raise ValidationError(
                f"expected {NUM_POSE} pose and {NUM_AUS} AU values, "
                f"got {len(self.pose_rad)} and {len(self.au_intensity)}"
            )
        for v in tuple(self.pose_rad) + tuple(self.au_intensity):
            if not math.isfinite(float(v)):
                raise ValidationError(f"non-finite raw attribute {v!r}")


# Replacement values keyed by packed index; validated by mix().
AttributeOverrideSet = Mapping[int, float]


def neutral() -> FacialAttributeVector:
    """Central head pose, all action units at zero."""
    return FacialAttributeVector(pose=(0.5, 0.5, 0.5), aus=(0.0,) * NUM_AUS)


def normalize(raw: RawAttributes) -> FacialAttributeVector:
    """Map raw extractor output onto the unit interval, clamping out-of-range values."""
    lo, hi = POSE_RANGE_RAD
    pose = tuple(
        min(1.0, max(0.0, (float(p) - lo) / (hi - lo))) for p in raw.pose_rad
    )
    alo, ahi = AU_RANGE
    aus = tuple(
        min(1.0, max(0.0, (float(a) - alo) / (ahi - alo))) for a in raw.au_intensity
    )
    return FacialAttributeVector(pose=pose, aus=aus)


def denormalize(fa: FacialAttributeVector) -> RawAttributes:
    """Inverse of :func:`normalize` on the clamp-free region."""
    lo, hi = POSE_RANGE_RAD
    pose_rad = tuple(lo + p * (hi - lo) for p in fa.pose)
    alo, ahi = AU_RANGE
    au = tuple(alo + a * (ahi - alo) for a in fa.aus)
    return RawAttributes(pose_rad=pose_rad, au_intensity=au)


def mix(base: FacialAttributeVector, overrides: AttributeOverrideSet) -> FacialAttributeVector:
    """Return ``base`` with the given packed indices replaced."""
    values = list(base.values)
    for idx, val in overrides.items():
        i = int(idx)
        if not 0 <= i < NUM_ATTRIBUTES:
            raise ValidationError(f"override index {idx} outside [0, {NUM_ATTRIBUTES - 1}]")
        v = float(val)
        if not math.isfinite(v) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"override value {val!r} outside [0, 1]")
        values[i] = v
    return FacialAttributeVector.from_values(values)


REQUIRED_COLUMNS = (FRAME_COLUMN,) + POSE_COLUMNS + AU_COLUMNS


def parse_attribute_csv(text: str | io.TextIOBase) -> list[tuple[int, RawAttributes]]:
    """Parse an attribute CSV (OpenFace-compatible column names).

    Columns are matched by name, extra columns are ignored and cells may
    carry surrounding whitespace. Raises :class:`AttributeCSVError` on a
    missing required column or a non-numeric cell.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise AttributeCSVError("empty CSV: header row required") from None
    names = [h.strip() for h in header]
    col_index: dict[str, int] = {}
    for i, name in enumerate(names):
        col_index.setdefault(name, i)
    for col in REQUIRED_COLUMNS:
        if col not in col_index:
            raise AttributeCSVError(f"missing column {col}")

    def cell(row: list[str], col: str, rownum: int) -> float:
        i = col_index[col]
        if i >= len(row):
            raise AttributeCSVError(f"row {rownum}: missing cell for column {col}")
        try:
            return float(row[i].strip())
        except ValueError:
            raise AttributeCSVError(
                f"row {rownum}: non-numeric value {row[i]!r} in column {col}"
            ) from None

    records: list[tuple[int, RawAttributes]] = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        frame = cell(row, FRAME_COLUMN, rownum)
        if frame != int(frame):
            raise AttributeCSVError(f"row {rownum}: non-integer frame id {frame!r}")
        pose = tuple(cell(row, c, rownum) for c in POSE_COLUMNS)
        aus = tuple(
            min(AU_RANGE[1], max(AU_RANGE[0], cell(row, c, rownum))) for c in AU_COLUMNS
        )
        records.append((int(frame), RawAttributes(pose_rad=pose, au_intensity=aus)))
    return records


def serialize_attribute_csv(records: Iterable[tuple[int, RawAttributes]]) -> str:
    """Inverse of :func:`parse_attribute_csv`; writes the canonical column order."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS)
    for frame, raw in records:
        writer.writerow(
            [frame]
            + [repr(float(p)) for p in raw.pose_rad]
            + [repr(float(a)) for a in raw.au_intensity]
        )
    return out.getvalue()
