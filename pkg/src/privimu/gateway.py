"""Trusted-module gateway: policy management, classification, sanitization, and
live stream sanitization over HTTP/WebSocket.

Endpoints (all JSON):

    GET/PUT /api/v1/policy      canonical policy form; PUT returns {"version": n}
    POST    /api/v1/classify    window -> {"top1", "ranking", "policy_version"}
    POST    /api/v1/sanitize    window -> sanitization result wire form
    GET     /api/v1/metrics     counters
    GET     /api/v1/activities  class list with current policy category
    WS      /api/v1/stream      {"seq", "window"} frames -> result + "seq"

Window JSON is `{"length": L, "channels": C, "data": [[...C floats...] x L]}`
with raw (pre-normalization) values, time-major.

Model and anchors are immutable after load; policy updates go through the
single-writer store and never touch the model, which is what makes dynamic
privacy work without retraining.
"""

from __future__ import annotations

import logging
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .corpus import DescriptionCorpus, corpus_hash, encoder_from_id, load_corpus
from .datasets import IMUWindow
from .imuclip import Checkpoint, compute_anchors, load_checkpoint, similarity
from .policy import (
    PolicyError,
    PolicyStore,
    categorize,
    load_policy,
    parse_policy,
)
from .sanitizer import ExemplarLibrary, load_library, result_to_wire, sanitize

logger = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    """Startup consistency failure (missing or mismatched artifacts)."""


@dataclass
class GatewayConfig:
    checkpoint_path: str
    corpus_path: str
    library_path: str
    policy_path: str
    host: str = "127.0.0.1"
    port: int = 8787
    unlisted_as_black: bool = False
    seed: int = 0
    top_k: int | None = None
    log_level: str = "info"


class Metrics:
    """Monotone counters shared across sessions."""

    def __init__(self):
        self._lock = threading.Lock()
        self.windows_seen = 0
        self.windows_replaced = 0
        self.per_class_replacements: dict[str, int] = {}
        self.started_at = time.time()

    def record(self, replaced_class: str | None) -> None:
        with self._lock:
            self.windows_seen += 1
            if replaced_class is not None:
                self.windows_replaced += 1
                self.per_class_replacements[replaced_class] = (
                    self.per_class_replacements.get(replaced_class, 0) + 1
                )

    def snapshot(self, policy_version: int) -> dict:
        with self._lock:
            return {
                "windows_seen": self.windows_seen,
                "windows_replaced": self.windows_replaced,
                "per_class_replacements": dict(self.per_class_replacements),
                "policy_version": policy_version,
                "uptime_s": time.time() - self.started_at,
            }


@dataclass
class GatewayState:
    checkpoint: Checkpoint
    corpus: DescriptionCorpus
    library: ExemplarLibrary
    policy_store: PolicyStore
    text_encoder: object
    anchors: dict[str, np.ndarray]
    config: GatewayConfig
    metrics: Metrics = field(default_factory=Metrics)
    ready: bool = True
    _window_counter: int = 0
    _counter_lock: threading.Lock = field(default_factory=threading.Lock)

    def next_window_seed(self) -> tuple[int, int]:
        with self._counter_lock:
            self._window_counter += 1
            return (self.config.seed, self._window_counter)


def load_state(config: GatewayConfig, text_encoder=None) -> GatewayState:
    """Load and cross-check all artifacts; anchors are precomputed here, once."""
    checkpoint = load_checkpoint(config.checkpoint_path)
    corpus = load_corpus(config.corpus_path)
    file_hash = corpus_hash(corpus)
    if file_hash != checkpoint.corpus_hash:
        raise GatewayError(
            f"corpus hash mismatch: checkpoint expects {checkpoint.corpus_hash}, "
            f"file {config.corpus_path} has {file_hash}"
        )
    library = load_library(config.library_path)
    if text_encoder is None:
        text_encoder = encoder_from_id(checkpoint.text_encoder_id)
    elif text_encoder.encoder_id != checkpoint.text_encoder_id:
        raise GatewayError(
            f"text encoder mismatch: checkpoint expects {checkpoint.text_encoder_id!r}, "
            f"got {text_encoder.encoder_id!r}"
        )
    policy = load_policy(config.policy_path)
    store = PolicyStore(policy, checkpoint.class_names, mirror_path=None)
    anchor_classes = [c for c in checkpoint.class_names if c in corpus.activities]
    anchors = compute_anchors(anchor_classes, corpus, checkpoint.model(), text_encoder)
    return GatewayState(
        checkpoint=checkpoint,
        corpus=corpus,
        library=library,
        policy_store=store,
        text_encoder=text_encoder,
        anchors=anchors,
        config=config,
    )


def _parse_window(body, checkpoint: Checkpoint) -> IMUWindow | JSONResponse:
    hp = checkpoint.hyperparams
    if not isinstance(body, dict):
        return JSONResponse(status_code=422, content={"error": "body must be a window object"})
    try:
        length = int(body["length"])
        channels = int(body["channels"])
        data = np.asarray(body["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        return JSONResponse(status_code=422, content={"error": f"malformed window: {e}"})
    if data.shape != (length, channels):
        return JSONResponse(
            status_code=422,
            content={"error": f"data shape {list(data.shape)} does not match "
                              f"declared ({length}, {channels})"},
        )
    if (length, channels) != (hp.window_length, hp.channels):
        return JSONResponse(
            status_code=422,
            content={"error": f"window shape mismatch: expected "
                              f"({hp.window_length}, {hp.channels}), got ({length}, {channels})"},
        )
    if not np.all(np.isfinite(data)):
        return JSONResponse(status_code=422, content={"error": "window contains non-finite values"})
    return IMUWindow(data=data, label=None, source_index=0)


def _policy_payload(store: PolicyStore) -> dict:
    p = store.current
    return {
        "black": sorted(p.black),
        "gray": sorted(p.gray),
        "version": p.version,
        "white": sorted(p.white),
    }


def create_app(config: GatewayConfig, state: GatewayState | None = None) -> FastAPI:
    """Build the service; artifacts load during startup (requests before that
    get 503). Pass a prebuilt `state` to skip file loading (tests)."""
    holder: dict[str, GatewayState | None] = {"state": state}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if holder["state"] is None:
            holder["state"] = load_state(config)
        try:
            yield
        finally:
            st = holder["state"]
            if st is not None:
                st.policy_store.flush()
                _persist_policy_if_dirty(st, config)

    app = FastAPI(title="privimu gateway", lifespan=lifespan)
    # The web console is served separately (static files); the gateway has no
    # auth (non-goal), so permissive CORS is fine.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def get_state() -> GatewayState | None:
        return holder["state"]

    @app.get("/api/v1/policy")
    def handle_policy_get():
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        return _policy_payload(st.policy_store)

    @app.put("/api/v1/policy")
    async def handle_policy_put(request: Request):
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        body = await request.body()
        try:
            policy = parse_policy(body.decode("utf-8"))
            version = st.policy_store.update(policy)
        except PolicyError as e:
            return JSONResponse(status_code=400, content={"errors": e.errors})
        return {"version": version}

    @app.post("/api/v1/classify")
    async def handle_classify(request: Request):
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        window = _parse_window(await request.json(), st.checkpoint)
        if isinstance(window, JSONResponse):
            return window
        from .imuclip import embed_windows

        z = embed_windows([window], st.checkpoint)[0]
        ranking = similarity(z, st.anchors, class_order=st.checkpoint.class_names)
        st.metrics.record(None)
        entries = ranking.entries
        if config.top_k is not None:
            entries = entries[: config.top_k]
        return {
            "top1": ranking.top1(),
            "ranking": [[name, score] for name, score in entries],
            "policy_version": st.policy_store.current.version,
        }

    @app.post("/api/v1/sanitize")
    async def handle_sanitize(request: Request):
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        window = _parse_window(await request.json(), st.checkpoint)
        if isinstance(window, JSONResponse):
            return window
        result = sanitize(
            window,
            st.checkpoint,
            st.policy_store.current,
            st.corpus,
            st.library,
            st.text_encoder,
            rng=np.random.default_rng(st.next_window_seed()),
            anchors=st.anchors,
            unlisted_as_black=config.unlisted_as_black,
        )
        st.metrics.record(result.replacement_class)
        return result_to_wire(result, top_k_size=config.top_k)

    @app.get("/api/v1/metrics")
    def handle_metrics():
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        return st.metrics.snapshot(st.policy_store.current.version)

    @app.get("/api/v1/activities")
    def handle_activities():
        st = get_state()
        if st is None:
            return JSONResponse(status_code=503, content={"error": "loading"})
        policy = st.policy_store.current
        return [
            {"name": name, "category": categorize(name, policy).value}
            for name in st.checkpoint.class_names
        ]

    @app.websocket("/api/v1/stream")
    async def handle_stream(ws: WebSocket):
        await ws.accept()
        st = get_state()
        if st is None:
            await ws.close(code=1013)
            return
        consecutive_bad = 0
        try:
            while True:
                try:
                    frame = await ws.receive_json()
                except WebSocketDisconnect:
                    return
                except Exception:
                    frame = None
                seq = frame.get("seq") if isinstance(frame, dict) else None
                window = (
                    _parse_window(frame.get("window"), st.checkpoint)
                    if isinstance(frame, dict)
                    else JSONResponse(status_code=422, content={"error": "malformed frame"})
                )
                if isinstance(window, JSONResponse):
                    consecutive_bad += 1
                    await ws.send_json(
                        {"seq": seq, "error": "malformed frame", "policy_version":
                         st.policy_store.current.version}
                    )
                    if consecutive_bad >= 3:
                        await ws.close(code=1008)
                        return
                    continue
                consecutive_bad = 0
                result = sanitize(
                    window,
                    st.checkpoint,
                    st.policy_store.current,
                    st.corpus,
                    st.library,
                    st.text_encoder,
                    rng=np.random.default_rng(st.next_window_seed()),
                    anchors=st.anchors,
                    unlisted_as_black=config.unlisted_as_black,
                )
                st.metrics.record(result.replacement_class)
                payload = result_to_wire(result, top_k_size=config.top_k)
                payload["seq"] = seq
                await ws.send_json(payload)
        except WebSocketDisconnect:
            return

    return app


def _persist_policy_if_dirty(state: GatewayState, config: GatewayConfig) -> None:
    """Mirror accepted updates back to the policy file at shutdown only, so an
    update-free run leaves the file byte-identical."""
    if state.policy_store.dirty:
        from .policy import save_policy

        save_policy(state.policy_store.current, config.policy_path)


def serve(config: GatewayConfig) -> None:
    """Run the gateway until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level)
