"""Local HTTP inference service around a trained checkpoint.

Sessions hold the uploaded source and its neutral template server-side, so
each slider move costs a single animator pass. Images travel as base64 PNG
inside JSON. Errors carry {code, message} bodies.
"""

from __future__ import annotations

import base64
import hashlib
import io
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from .attributes import (
    NUM_ATTRIBUTES,
    AttributeCSVError,
    normalize,
    parse_attribute_csv,
)
from .data import preprocess
from .datagen import image_to_uint8, uint8_to_image
from .networks import PRESETS, ModelBundle
from .reenact import animate, clamp_attributes, neutralize

DEFAULT_SESSION_TTL = 1800.0


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def encode_png(img: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image_to_uint8(img)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return uint8_to_image(np.asarray(im.convert("RGB")))


@dataclass
class Session:
    session_id: str
    source: np.ndarray
    neutral_image: np.ndarray
    checkpoint_hash: str
    created_at: float
    last_used: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, ttl: float):
        self.ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def put(self, session: Session) -> None:
        with self._lock:
            self._evict()
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            self._evict()
            session = self._sessions.get(session_id)
            if session is not None:
                session.last_used = time.monotonic()
            return session

    def _evict(self) -> None:
        cutoff = time.monotonic() - self.ttl
        for sid in [s for s, v in self._sessions.items() if v.last_used < cutoff]:
            del self._sessions[sid]


def checkpoint_fingerprint(bundle: ModelBundle) -> str:
    """Stable hash over all parameter bytes."""
    digest = hashlib.sha256()
    for module in (bundle.neutralizer, bundle.animator, bundle.discriminator, bundle.identity):
        for name, param in sorted(module.state_dict().items()):
            digest.update(name.encode())
            digest.update(param.numpy().tobytes())
    return digest.hexdigest()


def create_app(
    bundle: ModelBundle | None,
    session_ttl: float = DEFAULT_SESSION_TTL,
) -> FastAPI:
    app = FastAPI(title="face reenactment service")
    store = SessionStore(session_ttl)
    ckpt_hash = checkpoint_fingerprint(bundle) if bundle is not None else ""

    def model_missing() -> JSONResponse:
        return _error(503, "no_model", "no model checkpoint is loaded")

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        if bundle is None:
            return model_missing()
        body = await request.body()
        try:
            img = decode_image(body)
        except Exception:
            return _error(400, "undecodable_image", "request body is not a decodable image")
        img = preprocess(img, bundle.arch.resolution)
        neutral_img = neutralize(bundle, img)
        session = Session(
            session_id=secrets.token_urlsafe(24),
            source=img,
            neutral_image=neutral_img,
            checkpoint_hash=ckpt_hash,
            created_at=time.monotonic(),
            last_used=time.monotonic(),
        )
        store.put(session)
        return JSONResponse(
            status_code=201,
            content={
                "session_id": session.session_id,
                "neutral_preview": encode_png(neutral_img),
            },
        )

    @app.post("/sessions/{session_id}/reenact")
    async def reenact_endpoint(session_id: str, request: Request):
        if bundle is None:
            return model_missing()
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        try:
            doc = await request.json()
        except Exception:
            return _error(422, "bad_json", "request body is not valid JSON")
        attrs = doc.get("attributes") if isinstance(doc, dict) else None
        if not isinstance(attrs, list) or len(attrs) != NUM_ATTRIBUTES or not all(
            isinstance(v, (int, float)) for v in attrs
        ):
            return _error(
                422, "attribute_count", f"attributes must be {NUM_ATTRIBUTES} numbers"
            )
        arr = np.asarray(attrs, dtype=np.float64)
        clamped = bool(np.any((arr < 0.0) | (arr > 1.0)))
        fa = clamp_attributes(arr)
        with session.lock:
            out = animate(bundle, session.neutral_image, fa)
        return {"image": encode_png(out), "clamped": clamped}

    @app.post("/attributes/import")
    async def import_attributes(request: Request):
        body = await request.body()
        try:
            records = parse_attribute_csv(body.decode("utf-8", errors="strict"))
        except (AttributeCSVError, UnicodeDecodeError) as exc:
            return _error(422, "csv_parse_error", str(exc))
        frames = [list(normalize(raw).values) for _, raw in records]
        return {"frames": frames}

    @app.get("/model/info")
    async def model_info():
        if bundle is None:
            return model_missing()
        l1, l2, l3 = bundle.lambdas
        return {
            "checkpoint_hash": ckpt_hash,
            "resolution": bundle.arch.resolution,
            "preset": next(
                (k for k, v in PRESETS.items() if v == bundle.arch), "custom"
            ),
            "lambdas": {"lambda1": l1, "lambda2": l2, "lambda3": l3},
            "trained_steps": bundle.trained_steps,
        }

    return app
