"""Procedural sprite-face renderer.

Every rendered pixel is a deterministic closed-form function of
(identity, attribute vector, resolution), which is what makes the
geometric decoder in :mod:`faceanim.oracle` possible:

* pitch / yaw translate the face ellipse vertically / horizontally,
  roll rotates it in-plane by the denormalized angle;
* AU04 lowers the brows, AU12 curves the mouth corners upward,
  AU25 widens the mouth, AU26 opens it, AU45 closes the eyelids;
* the remaining 12 AU intensities set the lengths of small marker
  bars laid out on the forehead, cheeks and chin;
* identity controls skin hue, face aspect and eye spacing only.

All shapes are composited with one-pixel antialiased edges so that part
areas and centroids can be recovered with sub-pixel accuracy.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass

import numpy as np

from .attributes import FacialAttributeVector
from .errors import ValidationError

VALID_RESOLUTIONS = (32, 64, 128)

# Canvas is [-1, 1]^2, x right, y down. Face geometry is expressed in a
# face-local frame (u right, v down) in units of FACE_RADIUS.
FACE_RADIUS = 0.58
TRANSLATION_AMPLITUDE = 0.30       # max |center offset| at yaw/pitch = 0 or 1
FACE_RY_FACTOR = 1.04              # vertical radius / FACE_RADIUS (fixed)
ASPECT_RANGE = (0.8, 1.2)          # face_aspect scales the horizontal radius
HUE_RANGE = (0.01, 0.31)           # skin hue as a function of skin_hue
EYE_SPACING_RANGE = (0.30, 0.42)   # half-distance between eye centers (local u)

# Eyes sit high, near the silhouette rim: background pixels unmix to zero
# against the white eye color, so the eye decode tolerates rim proximity,
# unlike the dark brows, which live further inside the face.
EYE_V = -0.55
EYE_HALF_W = 0.14
EYE_HALF_H_MAX = 0.10
EYE_CLOSURE = 0.72                 # AU45=1 shrinks eye height by this fraction

BROW_V_BASE = -0.37
BROW_DROP = 0.10                   # AU04=1 lowers brows by this much
BROW_HALF = (0.14, 0.05)

MOUTH_V = 0.52
MOUTH_HALF_W_BASE = 0.22
MOUTH_WIDEN = 0.08                 # AU25 widens the mouth
MOUTH_HALF_H_BASE = 0.07
MOUTH_OPEN = 0.10                  # AU26 opens the jaw
MOUTH_CURL = 0.10                  # AU12 lifts the mouth corners

BAR_HALF_H = 0.05
BAR_W_BASE = 0.05                  # bar width at intensity 0 (locator stub)
BAR_W_GAIN = 0.19                  # extra width at intensity 1

# (row v, left edge u) anchor per marker bar; bars grow rightward. Anchor
# spacing leaves a pixel-footprint margin between one bar's maximum extent
# and the next bar's decode window at the coarsest resolution.
BAR_ANCHORS = (
    (-0.80, -0.31), (-0.80, 0.04),                                      # forehead
    (-0.05, -0.68), (-0.05, -0.32), (-0.05, 0.04), (-0.05, 0.40),       # upper cheeks
    (0.16, -0.68), (0.16, -0.32), (0.16, 0.04), (0.16, 0.40),           # lower cheeks
    (0.80, -0.31), (0.80, 0.04),                                        # chin
)
# AU indices (within the 17-long AU block) rendered as marker bars, anchor-aligned:
# AU01 AU02 AU05 AU06 AU07 AU09 AU10 AU14 AU15 AU17 AU20 AU23
BAR_AU_INDICES = (0, 1, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13)
# AUs with dedicated facial geometry.
AU_BROW = 2     # AU04
AU_SMILE = 8    # AU12
AU_WIDEN = 14   # AU25
AU_JAW = 15     # AU26
AU_BLINK = 16   # AU45

BG_COLOR = np.array([0.06, 0.06, 0.10])
EYE_COLOR = np.array([0.97, 0.97, 0.97])
BROW_COLOR = np.array([0.30, 0.14, 0.05])
MOUTH_COLOR = np.array([0.88, 0.07, 0.42])
# Bright green: its projection onto the mouth color axis (and vice versa) is
# non-positive for every skin hue, so bar rows and the mouth window may share
# vertical territory without cross-talk.
BAR_COLOR = np.array([0.10, 0.95, 0.20])
SKIN_S_BASE = 0.50
SKIN_V_BASE = 0.85


@dataclass(frozen=True)
class SyntheticIdentity:
    """Appearance parameters of one synthetic person."""

    skin_hue: float
    face_aspect: float
    eye_spacing: float
    feature_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.skin_hue <= 1.0:
            raise ValidationError(f"skin_hue {self.skin_hue} outside [0, 1]")
        if not ASPECT_RANGE[0] <= self.face_aspect <= ASPECT_RANGE[1]:
            raise ValidationError(f"face_aspect {self.face_aspect} outside {ASPECT_RANGE}")
        if not 0.3 <= self.eye_spacing <= 0.5:
            raise ValidationError(f"eye_spacing {self.eye_spacing} outside [0.3, 0.5]")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "SyntheticIdentity":
        # Sampled from the ranges the extraction oracle is calibrated for;
        # renders outside them are legal but not oracle-guaranteed.
        return cls(
            skin_hue=float(rng.uniform(*HUE_RANGE)),
            face_aspect=float(rng.uniform(*ASPECT_RANGE)),
            eye_spacing=float(rng.uniform(*EYE_SPACING_RANGE)),
            feature_seed=int(rng.integers(0, 2**31 - 1)),
        )


@dataclass(frozen=True)
class RenderSpec:
    """Output raster parameters."""

    resolution: int = 128
    background: tuple[float, float, float] = tuple(BG_COLOR)

    def __post_init__(self):
        if self.resolution not in VALID_RESOLUTIONS:
            raise ValidationError(
                f"resolution {self.resolution} not in {VALID_RESOLUTIONS}"
            )


def skin_color(identity: SyntheticIdentity) -> np.ndarray:
    """Skin RGB for an identity; hue carries skin_hue, the seed jitters s/v."""
    hue = HUE_RANGE[0] + identity.skin_hue * (HUE_RANGE[1] - HUE_RANGE[0])
    rng = np.random.default_rng(identity.feature_seed)
    s = SKIN_S_BASE + float(rng.uniform(-0.05, 0.05))
    v = SKIN_V_BASE + float(rng.uniform(-0.04, 0.04))
    return np.array(colorsys.hsv_to_rgb(hue, s, v))


def hue_to_skin_hue(hue: float) -> float:
    """Invert the skin hue mapping (clipped to [0, 1])."""
    lo, hi = HUE_RANGE
    return float(np.clip((hue - lo) / (hi - lo), 0.0, 1.0))


def eye_spacing_local(identity: SyntheticIdentity) -> float:
    lo, hi = EYE_SPACING_RANGE
    return lo + (identity.eye_spacing - 0.3) / 0.2 * (hi - lo)


def face_frame(fa: FacialAttributeVector) -> tuple[np.ndarray, float]:
    """Face center (canvas coords) and roll angle in radians."""
    pitch, yaw, roll = fa.pose
    center = np.array(
        [
            (2.0 * yaw - 1.0) * TRANSLATION_AMPLITUDE,
            (2.0 * pitch - 1.0) * TRANSLATION_AMPLITUDE,
        ]
    )
    phi = (roll - 0.5) * math.pi
    return center, phi


def bar_width(value: float) -> float:
    return BAR_W_BASE + BAR_W_GAIN * value


def mouth_geometry(aus) -> tuple[float, float, float]:
    """(half_width, half_height, corner_curl) of the mouth band."""
    half_w = MOUTH_HALF_W_BASE + MOUTH_WIDEN * aus[AU_WIDEN]
    half_h = MOUTH_HALF_H_BASE + MOUTH_OPEN * aus[AU_JAW]
    curl = MOUTH_CURL * aus[AU_SMILE]
    return half_w, half_h, curl


def eye_half_height(aus) -> float:
    return EYE_HALF_H_MAX * (1.0 - EYE_CLOSURE * aus[AU_BLINK])


def brow_v(aus) -> float:
    return BROW_V_BASE + BROW_DROP * aus[AU_BROW]


SUPERSAMPLE = 4


def _coverage(sdf_canvas: np.ndarray, res: int) -> np.ndarray:
    # One-pixel linear ramp around the zero level set of the signed distance.
    return np.clip(0.5 - sdf_canvas * (res / 2.0), 0.0, 1.0)


def _ellipse_sdf(du: np.ndarray, dv: np.ndarray, a: float, b: float) -> np.ndarray:
    # Approximate SDF, accurate near the boundary for mild eccentricity.
    r = np.sqrt((du / a) ** 2 + (dv / b) ** 2)
    return (r - 1.0) * min(a, b)


def _rect_sdf(du: np.ndarray, dv: np.ndarray, half_w: float, half_h: float) -> np.ndarray:
    qx = np.abs(du) - half_w
    qy = np.abs(dv) - half_h
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


def pixel_grid(res: int) -> tuple[np.ndarray, np.ndarray]:
    """Canvas coordinates of pixel centers, shape (res, res) each."""
    coords = (np.arange(res) + 0.5) / res * 2.0 - 1.0
    x, y = np.meshgrid(coords, coords)
    return x, y


def render(
    identity: SyntheticIdentity,
    fa: FacialAttributeVector,
    spec: RenderSpec = RenderSpec(),
) -> np.ndarray:
    """Render a sprite face; returns an HxWx3 float64 array in [-1, 1]."""
    res = spec.resolution
    # Supersample: the 1-pixel coverage ramp sums to exact areas only for
    # lattice-aligned edges, so rotated sprites need finer sampling for the
    # area-coded attributes to stay sub-pixel accurate.
    fine = res * SUPERSAMPLE
    x, y = pixel_grid(fine)
    center, phi = face_frame(fa)
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    dx, dy = x - center[0], y - center[1]
    # Canvas -> face-local (rotate by -phi, scale by 1/FACE_RADIUS).
    u = (cos_p * dx + sin_p * dy) / FACE_RADIUS
    v = (-sin_p * dx + cos_p * dy) / FACE_RADIUS

    img = np.empty((fine, fine, 3), dtype=np.float64)
    img[:] = np.asarray(spec.background)

    def paint(sdf_local: np.ndarray, color: np.ndarray) -> None:
        alpha = _coverage(sdf_local * FACE_RADIUS, fine)[..., None]
        img[:] = img * (1.0 - alpha) + color * alpha

    # Face ellipse: rx scales with aspect, ry is fixed.
    rx = identity.face_aspect  # in FACE_RADIUS units
    ry = FACE_RY_FACTOR
    paint(_ellipse_sdf(u, v, rx, ry), skin_color(identity))

    aus = fa.aus
    es = eye_spacing_local(identity)

    # Eyes are rectangles: their area is exactly width x height, which keeps
    # the eyelid-closure decode free of ellipse-SDF area bias.
    eye_h = eye_half_height(aus)
    for side in (-1.0, 1.0):
        paint(_rect_sdf(u - side * es, v - EYE_V, EYE_HALF_W, eye_h), EYE_COLOR)

    bv = brow_v(aus)
    for side in (-1.0, 1.0):
        paint(_rect_sdf(u - side * es, v - bv, *BROW_HALF), BROW_COLOR)

    half_w, half_h, curl = mouth_geometry(aus)
    centerline = MOUTH_V - curl * (u / half_w) ** 2
    mouth_sdf = np.maximum(np.abs(v - centerline) - half_h, np.abs(u) - half_w)
    paint(mouth_sdf, MOUTH_COLOR)

    for (row_v, left_u), au_idx in zip(BAR_ANCHORS, BAR_AU_INDICES):
        w = bar_width(aus[au_idx])
        paint(_rect_sdf(u - (left_u + w / 2.0), v - row_v, w / 2.0, BAR_HALF_H), BAR_COLOR)

    img = img.reshape(res, SUPERSAMPLE, res, SUPERSAMPLE, 3).mean(axis=(1, 3))
    return np.clip(img * 2.0 - 1.0, -1.0, 1.0)
