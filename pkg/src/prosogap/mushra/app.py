"""HTTP layer of the listening test: a small FastAPI app over MushraService.

The API keeps conditions blinded: trial payloads carry opaque slot ids and
clip URLs only. Unblinded data leaves the service exclusively through the
stats and export endpoints, which a listener page never calls.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..errors import (
    DuplicateSubmission,
    EmptyAfterScreening,
    IncompleteRatings,
    NoTrialsLoaded,
    ScoreOutOfRange,
)
from .core import MushraService


def create_app(service: MushraService, static_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="listening test", docs_url=None, redoc_url=None)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "trials": len(service.trials)}

    @app.post("/api/session")
    def create_session() -> dict:
        try:
            return service.create_session()
        except NoTrialsLoaded as exc:
            raise HTTPException(status_code=503, detail=str(exc))

    @app.get("/api/trial/{trial_id}")
    def trial_view(trial_id: str, listener: str) -> dict:
        try:
            return service.trial_view(trial_id, listener)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown trial {trial_id!r}")

    @app.get("/clips/{trial_id}/{file_name}")
    def clip(trial_id: str, file_name: str) -> FileResponse:
        try:
            path = service.clip_path(trial_id, file_name)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown clip")
        except NoTrialsLoaded as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        if not path.is_file():
            raise HTTPException(status_code=404, detail="clip file missing")
        return FileResponse(path, media_type="audio/wav")

    @app.post("/api/ratings")
    async def submit_ratings(request: Request) -> dict:
        body = await request.json()
        listener_id = body.get("listener_id")
        trial_id = body.get("trial_id")
        scores = body.get("scores")
        if not isinstance(listener_id, str) or not isinstance(trial_id, str) or not isinstance(scores, dict):
            raise HTTPException(
                status_code=422,
                detail="body needs listener_id, trial_id and a scores object",
            )
        try:
            rows = service.submit(listener_id, trial_id, scores)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown trial {trial_id!r}")
        except (IncompleteRatings, ScoreOutOfRange) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except DuplicateSubmission as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"accepted": True, "recorded": len(rows)}

    @app.get("/api/stats")
    def stats() -> dict:
        try:
            return service.stats()
        except EmptyAfterScreening as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/api/export.csv")
    def export() -> PlainTextResponse:
        return PlainTextResponse(service.export_csv(), media_type="text/csv")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
