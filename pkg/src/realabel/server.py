"""HTTP/JSON facade over the task service for browser raters."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .annotation import TaskService
from .errors import AnswerRejected, UnknownIdError
from .tasking import task_to_json


def create_app(
    service: TaskService,
    *,
    image_base_url: str = "/images",
    ui_dir=None,
) -> FastAPI:
    app = FastAPI(title="realabel annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.get("/api/config")
    def config():
        return {"image_base_url": image_base_url}

    @app.get("/api/tasks/next")
    def next_task(rater_id: str):
        task = service.serve_next_task(rater_id)
        if task is None:
            return JSONResponse({"task": None})
        return {"task": task_to_json(task)}

    @app.get("/api/tasks/{task_id}")
    def get_task(task_id: str):
        try:
            return {"task": task_to_json(service.get_task(task_id))}
        except UnknownIdError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.post("/api/answers")
    async def post_answer(request: Request):
        body = await request.json()
        for key in ("task_id", "rater_id", "verdicts"):
            if key not in body:
                raise HTTPException(status_code=400, detail=f"missing field {key!r}")
        try:
            ack = service.submit(
                body["task_id"], body["rater_id"], list(body["verdicts"])
            )
        except UnknownIdError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except AnswerRejected as exc:
            status = 409 if "already" in str(exc) else 400
            raise HTTPException(status_code=status, detail=str(exc)) from None
        return {"ack": ack}

    @app.get("/api/progress")
    def progress():
        return service.progress()

    if ui_dir is not None:
        # Catch-all static mount; /api routes are matched first.
        app.mount(
            "/", StaticFiles(directory=str(Path(ui_dir)), html=True), name="ui"
        )

    return app


def run_server(service: TaskService, *, port: int, image_base_url: str, ui_dir=None):
    import uvicorn

    app = create_app(service, image_base_url=image_base_url, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
