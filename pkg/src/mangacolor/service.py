"""HTTP session service for interactive revision.

A session wraps one uploaded page: its layout, the per-panel conditioning
state (feature, dots, dominant-bin scale, blend), and cached results.
Edits are explicit mutations; recolorization is requested per panel and at
most one recolorization may be in flight per panel (409 otherwise).
Sessions can optionally be persisted to a directory and restored on start.
"""

from __future__ import annotations

import io
import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image

from .features import (
    ColorFeature,
    binarize_palette,
    extract_histogram,
    feature_from_json,
    feature_to_json,
)
from .models import ColorizationModel, SRModel
from .panels import PageLayout, crop_panels, layout_to_json, segment_page
from .pipeline import BlendOption, ColorizeRequest, PageJob, colorize_page, colorize_panel
from .raster import Encoding, RasterImage, binarize
from .train import DotAnnotation


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _not_found(what: str) -> ApiError:
    return ApiError(404, "not_found", what)


def _bad_request(message: str) -> ApiError:
    return ApiError(400, "bad_request", message)


@dataclass
class PanelState:
    feature: ColorFeature
    dots: list[DotAnnotation] = field(default_factory=list)
    dominant_scale: float | None = None
    blend: BlendOption | None = None
    result: RasterImage | None = None

    def request(self, panel: RasterImage) -> ColorizeRequest:
        return ColorizeRequest(panel, self.feature, list(self.dots), self.dominant_scale, self.blend)


class Session:
    def __init__(self, session_id: str, page: RasterImage):
        self.id = session_id
        self.page = page
        self.mono = binarize(page)
        self.layout: PageLayout = segment_page(self.mono)
        self.crops = crop_panels(page, self.layout)
        self.panels = [PanelState(feature=extract_histogram(c)) for c in self.crops]
        self.revision = 0
        self.lock = threading.Lock()
        self.busy: set[int] = set()


class SessionStore:
    def __init__(self, persist_dir: str | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.persist_dir = persist_dir
        if persist_dir:
            os.makedirs(persist_dir, exist_ok=True)
            self._restore_all()

    def create(self, page: RasterImage, session_id: str | None = None) -> Session:
        session = Session(session_id or uuid.uuid4().hex, page)
        with self._lock:
            self._sessions[session.id] = session
        if self.persist_dir:
            self._persist_page(session)
            self.persist(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise _not_found(f"unknown session {session_id}")
        return session

    def persist(self, session: Session) -> None:
        if not self.persist_dir:
            return
        doc = {
            "id": session.id,
            "revision": session.revision,
            "panels": [
                {
                    "feature": json.loads(feature_to_json(p.feature)),
                    "dots": [{"x": d.x, "y": d.y, "a": d.a, "b": d.b} for d in p.dots],
                    "dominant_scale": p.dominant_scale,
                    "blend": None
                    if p.blend is None
                    else {"feature": json.loads(feature_to_json(p.blend.feature)), "ratio": p.blend.ratio},
                }
                for p in session.panels
            ],
        }
        sdir = os.path.join(self.persist_dir, session.id)
        os.makedirs(sdir, exist_ok=True)
        with open(os.path.join(sdir, "state.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    def _persist_page(self, session: Session) -> None:
        sdir = os.path.join(self.persist_dir, session.id)
        os.makedirs(sdir, exist_ok=True)
        Image.fromarray(session.page.data, "RGB").save(os.path.join(sdir, "page.png"))

    def _restore_all(self) -> None:
        for name in sorted(os.listdir(self.persist_dir)):
            sdir = os.path.join(self.persist_dir, name)
            state_path = os.path.join(sdir, "state.json")
            page_path = os.path.join(sdir, "page.png")
            if not (os.path.isfile(state_path) and os.path.isfile(page_path)):
                continue
            with open(state_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            page = RasterImage(Encoding.RGB8, np.asarray(Image.open(page_path).convert("RGB")))
            session = Session(doc["id"], page)
            session.revision = doc["revision"]
            for state, saved in zip(session.panels, doc["panels"]):
                state.feature = feature_from_json(json.dumps(saved["feature"]))
                state.dots = [DotAnnotation(d["x"], d["y"], d["a"], d["b"]) for d in saved["dots"]]
                state.dominant_scale = saved["dominant_scale"]
                if saved["blend"]:
                    state.blend = BlendOption(
                        feature_from_json(json.dumps(saved["blend"]["feature"])), saved["blend"]["ratio"]
                    )
            with self._lock:
                self._sessions[session.id] = session


def _png_response(img: RasterImage) -> Response:
    buf = io.BytesIO()
    Image.fromarray(img.data, "RGB").save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


def create_app(model: ColorizationModel, sr: SRModel | None = None, persist_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="mangacolor revision service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(persist_dir)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    def get_panel(session: Session, index: int) -> PanelState:
        if not 0 <= index < len(session.panels):
            raise _not_found(f"panel {index} out of range")
        return session.panels[index]

    def session_doc(session: Session) -> dict:
        return {
            "id": session.id,
            "revision": session.revision,
            "layout": json.loads(layout_to_json(session.layout)),
        }

    @app.post("/sessions")
    def create_session(page: UploadFile):
        try:
            pil = Image.open(io.BytesIO(page.file.read())).convert("RGB")
        except Exception as exc:
            raise _bad_request(f"cannot decode page image: {exc}")
        session = store.create(RasterImage(Encoding.RGB8, np.asarray(pil)))
        return session_doc(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_doc(store.get(session_id))

    @app.get("/sessions/{session_id}/panels/{index}")
    def get_panel_image(session_id: str, index: int):
        session = store.get(session_id)
        state = get_panel(session, index)
        with session.lock:
            result = state.result
        if result is None:
            result = colorize_panel(state.request(session.crops[index]), model)
            with session.lock:
                state.result = result
        return _png_response(result)

    @app.put("/sessions/{session_id}/panels/{index}/feature")
    async def put_feature(session_id: str, index: int, request: Request, mode: str = "histogram", tau: float = 0.005):
        session = store.get(session_id)
        state = get_panel(session, index)
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("reference")
            if upload is None:
                raise _bad_request("multipart feature upload needs a 'reference' file")
            try:
                pil = Image.open(io.BytesIO(await upload.read())).convert("RGB")
            except Exception as exc:
                raise _bad_request(f"cannot decode reference image: {exc}")
            feature = extract_histogram(RasterImage(Encoding.RGB8, np.asarray(pil)))
            if mode == "palette":
                feature = binarize_palette(feature, tau)
        else:
            try:
                feature = feature_from_json((await request.body()).decode("utf-8"))
            except Exception as exc:
                raise _bad_request(f"invalid feature JSON: {exc}")
        with session.lock:
            state.feature = feature
            session.revision += 1
            revision = session.revision
        store.persist(session)
        return {"revision": revision}

    @app.post("/sessions/{session_id}/panels/{index}/dots")
    def add_dot(session_id: str, index: int, dot: dict):
        session = store.get(session_id)
        state = get_panel(session, index)
        try:
            ann = DotAnnotation(int(dot["x"]), int(dot["y"]), float(dot["a"]), float(dot["b"]))
        except (KeyError, TypeError, ValueError):
            raise _bad_request("dot needs integer x,y and numeric a,b")
        crop = session.crops[index]
        if not (0 <= ann.x < crop.width and 0 <= ann.y < crop.height):
            raise _bad_request(f"dot ({ann.x},{ann.y}) outside panel {crop.width}x{crop.height}")
        with session.lock:
            state.dots.append(ann)
            session.revision += 1
            revision = session.revision
            count = len(state.dots)
        store.persist(session)
        return {"revision": revision, "index": count - 1}

    @app.delete("/sessions/{session_id}/panels/{index}/dots/{dot_index}")
    def delete_dot(session_id: str, index: int, dot_index: int):
        session = store.get(session_id)
        state = get_panel(session, index)
        with session.lock:
            if not 0 <= dot_index < len(state.dots):
                raise _not_found(f"dot {dot_index} out of range")
            state.dots.pop(dot_index)
            session.revision += 1
            revision = session.revision
        store.persist(session)
        return {"revision": revision}

    @app.put("/sessions/{session_id}/panels/{index}/dominant_scale")
    def put_dominant_scale(session_id: str, index: int, body: dict):
        session = store.get(session_id)
        state = get_panel(session, index)
        scale = body.get("scale")
        if not isinstance(scale, (int, float)) or scale < 0:
            raise _bad_request("scale must be a number >= 0")
        with session.lock:
            state.dominant_scale = float(scale)
            session.revision += 1
            revision = session.revision
        store.persist(session)
        return {"revision": revision}

    @app.put("/sessions/{session_id}/panels/{index}/blend")
    def put_blend(session_id: str, index: int, body: dict):
        session = store.get(session_id)
        state = get_panel(session, index)
        try:
            feature = feature_from_json(json.dumps(body["feature"]))
            ratio = float(body["ratio"])
        except (KeyError, ValueError) as exc:
            raise _bad_request(f"blend needs a feature and a ratio: {exc}")
        if not 0.0 <= ratio <= 1.0:
            raise _bad_request("blend ratio must be in [0, 1]")
        with session.lock:
            state.blend = BlendOption(feature, ratio)
            session.revision += 1
            revision = session.revision
        store.persist(session)
        return {"revision": revision}

    @app.post("/sessions/{session_id}/recolorize")
    def recolorize(session_id: str, panel: int):
        session = store.get(session_id)
        state = get_panel(session, panel)
        with session.lock:
            if panel in session.busy:
                raise ApiError(409, "conflict", f"panel {panel} recolorization already in flight")
            session.busy.add(panel)
            request_state = state.request(session.crops[panel])
        try:
            result = colorize_panel(request_state, model)
        except ApiError:
            raise
        except Exception as exc:
            raise _bad_request(f"recolorization failed: {exc}")
        finally:
            with session.lock:
                session.busy.discard(panel)
        with session.lock:
            state.result = result
            session.revision += 1
            revision = session.revision
        return {"revision": revision}

    @app.get("/sessions/{session_id}/page")
    def get_page(session_id: str):
        if sr is None:
            raise _bad_request("service started without a super-resolution model")
        session = store.get(session_id)
        with session.lock:
            overrides = {
                i: state.request(session.crops[i]) for i, state in enumerate(session.panels)
            }
        job = PageJob(page=session.page, default_feature=session.panels[0].feature, overrides=overrides)
        result = colorize_page(job, model, sr)
        return _png_response(result.page)

    return app
