"""Quantitative evaluation: AU-consistency classification and attribute RMSE.

AU consistency compares the presence (value >= threshold) of each of the 17
action units between the driving attributes and the oracle readout of the
generated image, aggregated with balanced accuracy and F-score — measures
suited to the heavy absent/present class imbalance of AU data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attributes import NUM_ATTRIBUTES, NUM_AUS, NUM_POSE, FacialAttributeVector
from .errors import ExtractionError, ValidationError
from .oracle import oracle_extract

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class AUConsistencyReport:
    tp: int
    fp: int
    tn: int
    fn: int
    balanced_accuracy: float
    f_score: float
    threshold: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _extract_all(generated_images: list[np.ndarray]) -> np.ndarray:
    rows = []
    failures = []
    for i, img in enumerate(generated_images):
        try:
            rows.append(oracle_extract(img).as_array())
        except ExtractionError as exc:
            failures.append(f"image {i}: {exc}")
    if failures:
        raise ExtractionError(
            f"oracle failed on {len(failures)} of {len(generated_images)} images: "
            + "; ".join(failures[:5])
        )
    return np.stack(rows)


def _target_matrix(driving_attrs: list[FacialAttributeVector]) -> np.ndarray:
    return np.stack([fa.as_array() for fa in driving_attrs])


def au_consistency_from_values(
    predicted: np.ndarray, target: np.ndarray, threshold: float
) -> AUConsistencyReport:
    """Confusion counts over all samples x 17 AUs from already-extracted values."""
    pred = predicted[:, NUM_POSE:] >= threshold
    true = target[:, NUM_POSE:] >= threshold
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    tn = int(np.sum(~pred & ~true))
    fn = int(np.sum(~pred & true))
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tpr
    f_score = (
        2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return AUConsistencyReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        balanced_accuracy=(tpr + tnr) / 2.0,
        f_score=f_score,
        threshold=threshold,
    )


def au_consistency(
    generated_images: list[np.ndarray],
    driving_attrs: list[FacialAttributeVector],
    presence_threshold: float = DEFAULT_THRESHOLD,
) -> AUConsistencyReport:
    """AU presence/absence agreement between target attributes and generated images."""
    if len(generated_images) != len(driving_attrs):
        raise ValidationError(
            f"{len(generated_images)} images but {len(driving_attrs)} attribute vectors"
        )
    if not generated_images:
        raise ValidationError("empty evaluation set")
    if not 0.0 < presence_threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {presence_threshold}")
    predicted = _extract_all(generated_images)
    target = _target_matrix(driving_attrs)
    return au_consistency_from_values(predicted, target, presence_threshold)


def attribute_rmse(
    generated_images: list[np.ndarray],
    driving_attrs: list[FacialAttributeVector],
) -> tuple[np.ndarray, float]:
    """(per-attribute RMSE vector, overall RMSE) via the oracle."""
    if len(generated_images) != len(driving_attrs):
        raise ValidationError(
            f"{len(generated_images)} images but {len(driving_attrs)} attribute vectors"
        )
    if not generated_images:
        raise ValidationError("empty evaluation set")
    predicted = _extract_all(generated_images)
    target = _target_matrix(driving_attrs)
    sq = (predicted - target) ** 2
    per_attr = np.sqrt(sq.mean(axis=0))
    assert per_attr.shape == (NUM_ATTRIBUTES,)
    return per_attr, float(np.sqrt(sq.mean()))
