"""HTTP JSON API over a Store.

Errors follow one shape: {"error": <code>, "detail": <message>} with the
status codes below. The optional ui_dir serves the compiled web frontend at
the root path; the API itself lives under the documented routes.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .active_loop import curves_to_csv
from .errors import (
    BusyError,
    ConfigError,
    ConflictError,
    EmptyPoolError,
    IngestError,
    NoRoundsYetError,
    NotFoundError,
    PoolExhaustedError,
    ReviewLoopError,
    TaxonomyError,
)
from .service import Store

ERROR_STATUS = {
    NotFoundError: (404, "not_found"),
    ConflictError: (409, "conflict"),
    BusyError: (409, "busy"),
    TaxonomyError: (400, "taxonomy_error"),
    IngestError: (400, "ingest_error"),
    EmptyPoolError: (400, "empty_pool"),
    ConfigError: (400, "config_error"),
    NoRoundsYetError: (404, "no_rounds_yet"),
    PoolExhaustedError: (404, "pool_exhausted"),
}


class LabelSubmission(BaseModel):
    aspects: list[str]
    sentiment: list[str]
    annotator: str


def create_app(store: Store, ui_dir=None) -> FastAPI:
    app = FastAPI(title="reviewloop annotation service")

    @app.exception_handler(ReviewLoopError)
    async def handle_domain_error(request: Request, exc: ReviewLoopError):
        status, code = ERROR_STATUS.get(type(exc), (400, "error"))
        return JSONResponse(status_code=status,
                            content={"error": code, "detail": str(exc)})

    @app.post("/corpus")
    async def ingest(request: Request):
        body = await request.body()
        delta = store.ingest_lines(body.decode("utf-8").splitlines())
        return {"ingested": delta, "counts": store.counts()}

    @app.get("/tasks")
    def tasks(n: int = Query(default=10, ge=1),
              annotator: str | None = None):
        result = store.queue_next(n, annotator=annotator)
        return {"selection": result["selection"],
                "tasks": [t.to_dict() for t in result["tasks"]]}

    @app.post("/tasks/{doc_id}/labels")
    def submit(doc_id: str, body: LabelSubmission):
        return store.submit_labels(doc_id, body.aspects, body.sentiment,
                                   body.annotator)

    @app.post("/train", status_code=202)
    def trigger_train():
        return store.trigger_retrain()

    @app.get("/train/status")
    def train_status():
        return store.train_status()

    @app.get("/metrics")
    def metrics():
        return store.get_metrics()

    @app.get("/curve")
    def curve(format: str = Query(default="json", pattern="^(json|csv)$")):
        lc = store.get_curve()
        if format == "csv":
            return Response(content=curves_to_csv([lc]), media_type="text/csv")
        return {
            "setting": lc.setting,
            "seed": lc.seed,
            "points": {
                task: [{"round": i, "labeled_count": n, "micro_precision": p,
                        "micro_recall": r, "micro_f1": f1}
                       for i, (n, p, r, f1) in enumerate(pts)]
                for task, pts in lc.points.items()
            },
        }

    @app.get("/taxonomy")
    def taxonomy():
        return store.taxonomy.to_dict()

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
