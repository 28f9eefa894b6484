import base64
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from faceanim.networks import PRESETS, ModelBundle
from faceanim.service import checkpoint_fingerprint, create_app, decode_image, encode_png


@pytest.fixture(scope="module")
def bundle():
    torch.manual_seed(0)
    b = ModelBundle.create(PRESETS["desk"], n_identities=3)
    b.trained_steps = 42
    b.freeze_identity()
    b.eval_mode()
    return b


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle))


def _png_bytes(rng, size=64):
    arr = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _open_session(client, rng):
    resp = client.post("/sessions", content=_png_bytes(rng))
    assert resp.status_code == 201
    return resp.json()


def test_png_codec_round_trip(rng):
    img = np.round(rng.uniform(-1, 1, (16, 16, 3)) * 127.5) / 127.5
    back = decode_image(base64.b64decode(encode_png(img)))
    assert np.abs(back - img).max() < 1.0 / 127.5


def test_create_session(client, rng):
    doc = _open_session(client, rng)
    assert set(doc) == {"session_id", "neutral_preview"}
    preview = decode_image(base64.b64decode(doc["neutral_preview"]))
    assert preview.shape == (64, 64, 3)


def test_create_session_rejects_garbage(client):
    resp = client.post("/sessions", content=b"definitely not a png")
    assert resp.status_code == 400
    assert resp.json()["code"] == "undecodable_image"


def test_reenact_round_trip_and_determinism(client, rng):
    sid = _open_session(client, rng)["session_id"]
    attrs = [0.5] * 3 + [0.2] * 17
    r1 = client.post(f"/sessions/{sid}/reenact", json={"attributes": attrs})
    r2 = client.post(f"/sessions/{sid}/reenact", json={"attributes": attrs})
    assert r1.status_code == r2.status_code == 200
    assert r1.json()["clamped"] is False
    # Repeated identical requests must be byte-identical.
    assert r1.json()["image"] == r2.json()["image"]
    img = decode_image(base64.b64decode(r1.json()["image"]))
    assert img.shape == (64, 64, 3)


def test_reenact_clamps_out_of_range(client, rng):
    sid = _open_session(client, rng)["session_id"]
    attrs = [1.5] + [0.5] * 19
    with pytest.warns(UserWarning):
        resp = client.post(f"/sessions/{sid}/reenact", json={"attributes": attrs})
    assert resp.status_code == 200
    assert resp.json()["clamped"] is True


def test_reenact_error_codes(client, rng):
    sid = _open_session(client, rng)["session_id"]
    resp = client.post("/sessions/nope/reenact", json={"attributes": [0.5] * 20})
    assert resp.status_code == 404 and resp.json()["code"] == "unknown_session"
    resp = client.post(f"/sessions/{sid}/reenact", json={"attributes": [0.5] * 19})
    assert resp.status_code == 422 and resp.json()["code"] == "attribute_count"
    resp = client.post(f"/sessions/{sid}/reenact", json={"attributes": "all of them"})
    assert resp.status_code == 422 and resp.json()["code"] == "attribute_count"
    resp = client.post(
        f"/sessions/{sid}/reenact",
        content=b"{broken",
        headers={"content-type": "application/json"},
    )
    assert resp.status_code == 422 and resp.json()["code"] == "bad_json"


def test_import_attributes(client):
    from faceanim.attributes import REQUIRED_COLUMNS

    csv = (
        ",".join(REQUIRED_COLUMNS) + "\n"
        "0,0.0,0.0,0.0," + ",".join(["0"] * 17) + "\n"
        "1,1.5707963,0.0,0.0," + ",".join(["5"] * 17) + "\n"
    )
    resp = client.post("/attributes/import", content=csv.encode())
    assert resp.status_code == 200
    frames = resp.json()["frames"]
    assert len(frames) == 2 and len(frames[0]) == 20
    assert frames[0][:3] == [0.5, 0.5, 0.5]
    assert frames[1][0] == pytest.approx(1.0)
    assert frames[1][3:] == [1.0] * 17
    bad = client.post("/attributes/import", content=b"frame,pose_Rx\n0,0.0\n")
    assert bad.status_code == 422 and bad.json()["code"] == "csv_parse_error"


def test_model_info(client, bundle):
    resp = client.get("/model/info")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["checkpoint_hash"] == checkpoint_fingerprint(bundle)
    assert doc["resolution"] == 64
    assert doc["preset"] == "desk"
    assert doc["lambdas"] == {"lambda1": 10.0, "lambda2": 1.0, "lambda3": 10.0}
    assert doc["trained_steps"] == 42


def test_no_model_loaded(rng):
    client = TestClient(create_app(None))
    for resp in (
        client.post("/sessions", content=_png_bytes(rng)),
        client.get("/model/info"),
    ):
        assert resp.status_code == 503
        assert resp.json()["code"] == "no_model"


def test_session_ttl_eviction(bundle, rng):
    client = TestClient(create_app(bundle, session_ttl=0.0))
    sid = _open_session(client, rng)["session_id"]
    resp = client.post(f"/sessions/{sid}/reenact", json={"attributes": [0.5] * 20})
    assert resp.status_code == 404
