"""Closed-form attribute and identity extraction from sprite renders.

Plays the role an external AU/pose extractor plays for real footage, but
is exact by construction: every quantity the renderer encodes
geometrically (translation, rotation, part areas, centroids, mouth
curvature) is recovered from per-part soft coverage maps obtained by
linear color unmixing. Tolerant to the mild blur of generated images.
"""

from __future__ import annotations

import colorsys
import math

import numpy as np

from . import sprites
from .attributes import NUM_AUS, FacialAttributeVector
from .errors import ExtractionError
from .sprites import (
    ASPECT_RANGE,
    AU_BLINK,
    AU_BROW,
    AU_JAW,
    AU_SMILE,
    AU_WIDEN,
    BAR_ANCHORS,
    BAR_AU_INDICES,
    BAR_HALF_H,
    BAR_W_BASE,
    BAR_W_GAIN,
    BAR_COLOR,
    BG_COLOR,
    BROW_COLOR,
    BROW_DROP,
    BROW_V_BASE,
    EYE_CLOSURE,
    EYE_COLOR,
    EYE_HALF_H_MAX,
    EYE_HALF_W,
    EYE_SPACING_RANGE,
    FACE_RADIUS,
    FACE_RY_FACTOR,
    HUE_RANGE,
    MOUTH_COLOR,
    MOUTH_CURL,
    MOUTH_HALF_H_BASE,
    MOUTH_HALF_W_BASE,
    MOUTH_OPEN,
    MOUTH_V,
    MOUTH_WIDEN,
    SKIN_S_BASE,
    SKIN_V_BASE,
    TRANSLATION_AMPLITUDE,
    SyntheticIdentity,
)

# Decode windows in face-local coordinates (v_lo, v_hi, |u| limit). Each
# window is padded by the worst-case pixel footprint so mass in pixels whose
# centers fall just outside the feature is still collected, and each stays
# clear of same-color neighbors and (for dark features) of the rim.
EYE_WINDOW = (-0.70, -0.39, 0.62)
BROW_WINDOW = (-0.48, -0.16, 0.62)
MOUTH_WINDOW = (0.15, 0.74, 0.36)
BAR_WINDOW_DU = (0.05, 0.05)       # margin left of anchor, right of max extent
BAR_WINDOW_DV = 0.10

MIN_SILHOUETTE_FRACTION = 0.05

_SKIN_PROTOTYPES = np.array(
    [
        colorsys.hsv_to_rgb(HUE_RANGE[0] + t * (HUE_RANGE[1] - HUE_RANGE[0]),
                            SKIN_S_BASE, SKIN_V_BASE)
        for t in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
)
LBL_BG, LBL_EYE, LBL_BROW, LBL_MOUTH, LBL_BAR, LBL_SKIN = 0, 1, 2, 3, 4, 5

# Classification prototypes. Antialiased rim pixels are skin/background
# blends that can otherwise land nearest an unrelated class (e.g. brow),
# so explicit blend prototypes are included and mapped back to bg/skin.
_proto_colors = [BG_COLOR, EYE_COLOR, BROW_COLOR, MOUTH_COLOR, BAR_COLOR]
_proto_labels = [LBL_BG, LBL_EYE, LBL_BROW, LBL_MOUTH, LBL_BAR]
for _skin in _SKIN_PROTOTYPES:
    for _t in (0.25, 0.5, 0.75, 1.0):
        _proto_colors.append(_t * _skin + (1.0 - _t) * BG_COLOR)
        _proto_labels.append(LBL_SKIN if _t >= 0.5 else LBL_BG)
_CLASS_COLORS = np.vstack(_proto_colors)
_CLASS_LABELS = np.array(_proto_labels)


def _to_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] != img.shape[1]:
        raise ExtractionError(f"expected square HxWx3 image, got shape {img.shape}")
    return np.clip((img + 1.0) / 2.0, 0.0, 1.0)


def _classify(rgb: np.ndarray) -> np.ndarray:
    d = ((rgb[..., None, :] - _CLASS_COLORS) ** 2).sum(axis=-1)
    return _CLASS_LABELS[np.argmin(d, axis=-1)]


def _centroid(x: np.ndarray, y: np.ndarray, mask: np.ndarray, what: str) -> np.ndarray:
    n = mask.sum()
    if n == 0:
        raise ExtractionError(f"no sprite detected: no {what} pixels found")
    return np.array([x[mask].mean(), y[mask].mean()])


def _unmix(rgb: np.ndarray, base: np.ndarray, color: np.ndarray) -> np.ndarray:
    """Per-pixel coverage of `color` painted over `base`, clipped to [0, 1]."""
    axis = color - base
    a = ((rgb - base) * axis).sum(axis=-1) / (axis @ axis)
    return np.clip(a, 0.0, 1.0)


class SpriteReading:
    """Shared geometric analysis behind oracle_extract / oracle_identity."""

    def __init__(self, img: np.ndarray):
        rgb = _to_rgb(img)
        res = rgb.shape[0]
        x, y = sprites.pixel_grid(res)
        labels = _classify(rgb)
        sil = labels != LBL_BG
        if sil.mean() < MIN_SILHOUETTE_FRACTION:
            raise ExtractionError("no sprite detected: silhouette too small")

        center = _centroid(x, y, sil, "silhouette")
        _centroid(x, y, labels == LBL_MOUTH, "mouth")  # existence check

        self.rgb = rgb
        self.res = res
        self.x, self.y = x, y
        self.labels = labels
        self.sil = sil
        # Area of one pixel in face-local units.
        self.pix_area = (2.0 / res / FACE_RADIUS) ** 2

        # Rough skin estimate bootstraps the soft mouth centroid; the frame
        # is then refined with sub-pixel centroids, which the window-based
        # attribute decodes need (a small roll error smears every window).
        self.skin = np.median(rgb[labels == LBL_SKIN], axis=0)
        self._set_frame(center, self._mouth_roll(center))
        for _ in range(2):
            center = self._soft_center()
            self._set_frame(center, self._mouth_roll(center))

    def _set_frame(self, center: np.ndarray, phi: float) -> None:
        self.center = center
        self.phi = phi
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        dx, dy = self.x - center[0], self.y - center[1]
        self.u = (cos_p * dx + sin_p * dy) / FACE_RADIUS
        self.v = (-sin_p * dx + cos_p * dy) / FACE_RADIUS
        skin_mask = (self.labels == LBL_SKIN) & (self.u**2 + self.v**2 < 0.8)
        if not skin_mask.any():
            raise ExtractionError("no sprite detected: no skin pixels found")
        # Median resists pollution from antialiased feature-edge pixels.
        self.skin = np.median(self.rgb[skin_mask], axis=0)

    def _mouth_roll(self, center: np.ndarray) -> float:
        """Roll angle from the direction of the mouth below the face center.

        The band is left-right symmetric even when curled by the smile
        control, so its centroid sits exactly on the face-local down axis.
        The soft coverage is accumulated over the hard mouth pixels plus a
        small dilation, which needs no frame estimate at all.
        """
        rows, cols = np.nonzero(self.labels == LBL_MOUTH)
        pad = 2
        r0, r1 = max(rows.min() - pad, 0), min(rows.max() + pad + 1, self.res)
        c0, c1 = max(cols.min() - pad, 0), min(cols.max() + pad + 1, self.res)
        box = np.s_[r0:r1, c0:c1]
        w = _unmix(self.rgb[box], self.skin, MOUTH_COLOR)
        # Blend pixels on the mouth rim classify as mouth or skin; anything
        # else in the box (stray bar/background pixels) is contamination.
        keep = (self.labels[box] == LBL_MOUTH) | (self.labels[box] == LBL_SKIN)
        w = np.where(keep, w, 0.0)
        total = w.sum()
        if total <= 0:
            raise ExtractionError("no sprite detected: mouth coverage empty")
        dx = (w * self.x[box]).sum() / total - center[0]
        dy = (w * self.y[box]).sum() / total - center[1]
        # Face-local down maps to (-sin phi, cos phi) in image coordinates.
        return float(np.clip(math.atan2(-dx, dy), -math.pi / 2, math.pi / 2))

    def _soft_center(self) -> np.ndarray:
        """Silhouette centroid: 1 on the face interior, soft on the rim.

        The interior is taken as solid (dark feature/skin blend pixels can
        classify as background, and such holes would bias the centroid);
        only the rim band gets sub-pixel weights from background unmixing,
        which is exact there because rim pixels are pure skin/bg blends.
        """
        var_u = self.u[self.sil].var()
        var_v = self.v[self.sil].var()
        aspect = FACE_RY_FACTOR * math.sqrt(var_u / var_v) if var_v > 0 else 1.0
        aspect = float(np.clip(aspect, *ASPECT_RANGE))
        nr = np.sqrt(self.u**2 / aspect**2 + self.v**2 / FACE_RY_FACTOR**2)
        band = 3.0 * 2.0 / self.res / FACE_RADIUS  # rim band half-width, ~3 px
        w = np.where(nr < 1.0 - band, 1.0, 0.0)
        rim = (nr >= 1.0 - band) & (nr <= 1.0 + band)
        w[rim] = 1.0 - _unmix(self.rgb[rim], self.skin, BG_COLOR)
        return np.array([(w * self.x).sum() / w.sum(), (w * self.y).sum() / w.sum()])

    def window(self, v_lo: float, v_hi: float, u_lo: float, u_hi: float) -> np.ndarray:
        return (self.v >= v_lo) & (self.v <= v_hi) & (self.u >= u_lo) & (self.u <= u_hi)

    def coverage(self, color: np.ndarray, mask: np.ndarray) -> np.ndarray:
        # Decode windows are sized to stay inside the silhouette at the
        # narrowest face aspect, so every pixel is a skin/feature blend and
        # the unmixing is exact; no label-based clipping (dark blend pixels
        # can classify as background, and dropping them biases moments).
        a = np.zeros(self.rgb.shape[:2])
        a[mask] = _unmix(self.rgb[mask], self.skin, color)
        return a

    def pose(self) -> tuple[float, float, float]:
        pitch = 0.5 + self.center[1] / (2.0 * TRANSLATION_AMPLITUDE)
        yaw = 0.5 + self.center[0] / (2.0 * TRANSLATION_AMPLITUDE)
        roll = 0.5 + self.phi / math.pi
        return pitch, yaw, roll


def oracle_extract(img: np.ndarray) -> FacialAttributeVector:
    """Recover the 20-value attribute vector from a sprite render."""
    r = SpriteReading(img)
    aus = np.zeros(NUM_AUS)

    # Brow height -> AU04.
    v_lo, v_hi, u_lim = BROW_WINDOW
    w = r.coverage(BROW_COLOR, r.window(v_lo, v_hi, -u_lim, u_lim))
    total = w.sum()
    if total <= 0:
        raise ExtractionError("no sprite detected: brow coverage empty")
    brow_v = (w * r.v).sum() / total
    aus[AU_BROW] = (brow_v - BROW_V_BASE) / BROW_DROP

    # Eye area -> AU45.
    v_lo, v_hi, u_lim = EYE_WINDOW
    a = r.coverage(EYE_COLOR, r.window(v_lo, v_hi, -u_lim, u_lim))
    eye_area = a.sum() * r.pix_area
    eye_h = eye_area / (8.0 * EYE_HALF_W)
    aus[AU_BLINK] = (1.0 - eye_h / EYE_HALF_H_MAX) / EYE_CLOSURE

    # Mouth band: width -> AU25, height -> AU26, corner curvature -> AU12.
    v_lo, v_hi, u_lim = MOUTH_WINDOW
    a = r.coverage(MOUTH_COLOR, r.window(v_lo, v_hi, -u_lim, u_lim))
    total = a.sum()
    if total <= 0:
        raise ExtractionError("no sprite detected: mouth coverage empty")
    u_mean = (a * r.u).sum() / total
    var_u = (a * (r.u - u_mean) ** 2).sum() / total
    # Sheppard's correction: coverage-weighted pixel centers inflate the
    # second moment by the pixel footprint's own variance h^2 / 12, which
    # is rotation-invariant for a square pixel.
    h = 2.0 / r.res / FACE_RADIUS
    var_u = max(var_u - h * h / 12.0, 0.0)
    half_w = math.sqrt(var_u * 3.0)
    aus[AU_WIDEN] = (half_w - MOUTH_HALF_W_BASE) / MOUTH_WIDEN
    area = total * r.pix_area
    half_h = area / (4.0 * half_w)
    aus[AU_JAW] = (half_h - MOUTH_HALF_H_BASE) / MOUTH_OPEN
    # Corner curl from the mean v of the whole band: the parabolic centerline
    # MOUTH_V - curl * (u / w)^2 has coverage-weighted mean MOUTH_V - curl / 3,
    # so the offset of mean v from MOUTH_V reads the curl directly. Linear in
    # the measured v, unlike a regression on (u / w)^2 which amplifies
    # pixel-footprint noise in u.
    v_mean = (a * r.v).sum() / total
    aus[AU_SMILE] = 3.0 * (MOUTH_V - v_mean) / MOUTH_CURL

    # Marker bar areas -> the remaining 12 AUs.
    for (row_v, left_u), au_idx in zip(BAR_ANCHORS, BAR_AU_INDICES):
        mask = r.window(
            row_v - BAR_WINDOW_DV,
            row_v + BAR_WINDOW_DV,
            left_u - BAR_WINDOW_DU[0],
            left_u + BAR_W_BASE + BAR_W_GAIN + BAR_WINDOW_DU[1],
        )
        a = r.coverage(BAR_COLOR, mask)
        width = a.sum() * r.pix_area / (2.0 * BAR_HALF_H)
        aus[au_idx] = (width - BAR_W_BASE) / BAR_W_GAIN

    pitch, yaw, roll = r.pose()
    values = np.clip(np.concatenate([[pitch, yaw, roll], aus]), 0.0, 1.0)
    return FacialAttributeVector.from_values(values)


def oracle_identity(img: np.ndarray) -> SyntheticIdentity:
    """Recover identity appearance parameters from a sprite render."""
    r = SpriteReading(img)
    hue = colorsys.rgb_to_hsv(*np.clip(r.skin, 0.0, 1.0))[0]
    skin_hue = sprites.hue_to_skin_hue(hue)

    # Silhouette second moments give the ellipse radii ratio.
    var_u = r.u[r.sil].var()
    var_v = r.v[r.sil].var()
    aspect = FACE_RY_FACTOR * math.sqrt(var_u / var_v) if var_v > 0 else 1.0
    aspect = float(np.clip(aspect, *ASPECT_RANGE))

    eye_mask = r.labels == LBL_EYE
    lo, hi = EYE_SPACING_RANGE
    left = eye_mask & (r.u < 0)
    right = eye_mask & (r.u >= 0)
    if left.any() and right.any():
        es = (r.u[right].mean() - r.u[left].mean()) / 2.0
        eye_spacing = 0.3 + (es - lo) / (hi - lo) * 0.2
    else:
        eye_spacing = 0.4
    eye_spacing = float(np.clip(eye_spacing, 0.3, 0.5))

    return SyntheticIdentity(
        skin_hue=skin_hue, face_aspect=aspect, eye_spacing=eye_spacing, feature_seed=0
    )
