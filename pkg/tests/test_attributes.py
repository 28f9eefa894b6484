import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from faceanim.attributes import (
    ATTRIBUTE_NAMES,
    AU_COLUMNS,
    NUM_ATTRIBUTES,
    NUM_AUS,
    POSE_COLUMNS,
    REQUIRED_COLUMNS,
    FacialAttributeVector,
    RawAttributes,
    denormalize,
    mix,
    neutral,
    normalize,
    parse_attribute_csv,
    serialize_attribute_csv,
)
from faceanim.errors import AttributeCSVError, ValidationError

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
unit_vec = st.lists(unit, min_size=NUM_ATTRIBUTES, max_size=NUM_ATTRIBUTES)


def test_packed_layout():
    assert NUM_ATTRIBUTES == 20
    assert NUM_AUS == 17
    assert len(ATTRIBUTE_NAMES) == 20
    assert ATTRIBUTE_NAMES[:3] == ("pitch", "yaw", "roll")
    assert ATTRIBUTE_NAMES[3:] == AU_COLUMNS


def test_neutral_vector():
    fa = neutral()
    assert fa.pose == (0.5, 0.5, 0.5)
    assert fa.aus == (0.0,) * NUM_AUS


def test_vector_validation():
    with pytest.raises(ValidationError):
        FacialAttributeVector(pose=(0.5, 0.5, 1.5), aus=(0.0,) * NUM_AUS)
    with pytest.raises(ValidationError):
        FacialAttributeVector(pose=(0.5, 0.5, 0.5), aus=(0.0,) * (NUM_AUS - 1))
    with pytest.raises(ValidationError):
        FacialAttributeVector.from_values([0.5] * 19)
    with pytest.raises(ValidationError):
        FacialAttributeVector(pose=(0.5, float("nan"), 0.5), aus=(0.0,) * NUM_AUS)


@given(unit_vec)
def test_normalize_denormalize_bijective(values):
    fa = FacialAttributeVector.from_values(values)
    back = normalize(denormalize(fa))
    assert np.abs(back.as_array() - fa.as_array()).max() <= 1e-9


def test_normalize_endpoints():
    raw = RawAttributes(
        pose_rad=(-math.pi / 2, 0.0, math.pi / 2),
        au_intensity=(0.0,) * 16 + (5.0,),
    )
    fa = normalize(raw)
    assert fa.pose == (0.0, 0.5, 1.0)
    assert fa.aus[-1] == 1.0


def test_normalize_clamps_out_of_range():
    raw = RawAttributes(pose_rad=(-10.0, 10.0, 0.0), au_intensity=(7.0,) + (0.0,) * 16)
    fa = normalize(raw)
    assert fa.pose == (0.0, 1.0, 0.5)
    assert fa.aus[0] == 1.0


def test_mix_overrides():
    fa = mix(neutral(), {1: 0.9, 14: 1.0})
    assert fa.values[1] == 0.9
    assert fa.values[14] == 1.0
    assert fa.values[0] == 0.5 and fa.values[3] == 0.0


def test_mix_rejects_bad_overrides():
    with pytest.raises(ValidationError):
        mix(neutral(), {20: 0.5})
    with pytest.raises(ValidationError):
        mix(neutral(), {0: 1.5})


def _csv_row(frame, pose, aus):
    return ",".join([str(frame)] + [repr(v) for v in pose + aus])


def test_csv_round_trip():
    records = [
        (0, RawAttributes(pose_rad=(0.1, -0.2, 0.3), au_intensity=tuple(np.linspace(0, 5, 17)))),
        (1, RawAttributes(pose_rad=(0.0, 0.0, 0.0), au_intensity=(2.5,) * 17)),
    ]
    parsed = parse_attribute_csv(serialize_attribute_csv(records))
    assert len(parsed) == 2
    for (f0, r0), (f1, r1) in zip(records, parsed):
        assert f0 == f1
        assert r0.pose_rad == r1.pose_rad
        assert r0.au_intensity == r1.au_intensity


def test_csv_permuted_columns():
    cols = list(REQUIRED_COLUMNS)
    perm = cols[::-1]
    values = {c: i * 0.01 for i, c in enumerate(cols) if c != "frame"}
    body = ",".join(perm) + "\n" + ",".join(
        "3" if c == "frame" else repr(values[c]) for c in perm
    )
    [(frame, raw)] = parse_attribute_csv(body)
    assert frame == 3
    assert raw.pose_rad == tuple(values[c] for c in POSE_COLUMNS)
    assert raw.au_intensity == tuple(values[c] for c in AU_COLUMNS)


def test_csv_missing_column():
    cols = [c for c in REQUIRED_COLUMNS if c != "AU12_r"]
    body = ",".join(cols) + "\n" + ",".join("0" for _ in cols)
    with pytest.raises(AttributeCSVError, match="AU12_r"):
        parse_attribute_csv(body)


def test_csv_empty_body():
    body = ",".join(REQUIRED_COLUMNS) + "\n"
    assert parse_attribute_csv(body) == []


def test_csv_empty_file():
    with pytest.raises(AttributeCSVError):
        parse_attribute_csv("")


def test_csv_non_numeric_cell():
    body = ",".join(REQUIRED_COLUMNS) + "\n" + ",".join(["0"] + ["x"] * 20)
    with pytest.raises(AttributeCSVError, match="non-numeric"):
        parse_attribute_csv(body)


def test_csv_extra_columns_ignored():
    cols = list(REQUIRED_COLUMNS) + ["confidence"]
    body = ",".join(cols) + "\n" + ",".join(["0"] + ["0.5"] * 20 + ["0.99"])
    [(frame, raw)] = parse_attribute_csv(body)
    assert frame == 0
    assert raw.pose_rad == (0.5, 0.5, 0.5)


def test_csv_au_clamped_to_range():
    body = ",".join(REQUIRED_COLUMNS) + "\n" + ",".join(["0", "0", "0", "0"] + ["9.5"] * 17)
    [(_, raw)] = parse_attribute_csv(body)
    assert raw.au_intensity == (5.0,) * 17
