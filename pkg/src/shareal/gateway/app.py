"""The HTTP API binding every module behind one surface.

All endpoints live under /api and return JSON except the dataset content,
job log, history CSV, and chat stream routes. Module errors surface as
``{"code", "message"}`` envelopes with a stable code per failure; the same
envelope shape covers unknown routes, bad methods, and malformed requests.
"""

from __future__ import annotations

import json
import logging

from fastapi import Depends, FastAPI, File, Form, Query, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from .. import timeseries
from ..catalog import User, now_ms
from ..errors import ApiError, InvalidRequest, Unauthorized
from ..service import Service
from . import schemas as s

log = logging.getLogger(__name__)


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="shareal", docs_url=None, redoc_url=None, openapi_url=None)

    def principal(request: Request) -> User:
        header = request.headers.get("authorization") or ""
        if not header.lower().startswith("bearer "):
            raise Unauthorized("missing bearer token")
        return service.catalog.resolve_token(header[7:].strip())

    # ------------------------------------------------------------ errors

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.http_status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "invalid-request", "message": str(exc.errors()[:3])}
        )

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        if exc.status_code == 404:
            code = "unknown-route"
        elif exc.status_code == 405:
            code = "method-not-allowed"
        else:
            code = "internal-error"
        return JSONResponse(
            status_code=exc.status_code, content={"code": code, "message": str(exc.detail)}
        )

    @app.exception_handler(Exception)
    async def on_unexpected(request: Request, exc: Exception):
        log.exception("unhandled error on %s %s", request.method, request.url.path)
        return JSONResponse(
            status_code=500, content={"code": "internal-error", "message": "internal error"}
        )

    # -------------------------------------------------------------- auth

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/auth/login", response_model=s.TokenResponse)
    def login(body: s.LoginRequest):
        session = service.login(body.name, body.secret)
        return s.TokenResponse(token=session.token, expires_at=session.expires_at)

    @app.post("/api/users", response_model=s.UserOut)
    def create_user(body: s.UserCreate, user: User = Depends(principal)):
        created = service.catalog.register_user(user, body.name, body.role, body.secret)
        return s.UserOut.of(created)

    @app.get("/api/users/me", response_model=s.UserOut)
    def whoami(user: User = Depends(principal)):
        return s.UserOut.of(user)

    # ----------------------------------------------------------- catalog

    @app.post("/api/datasets", response_model=s.DatasetOut)
    def create_dataset(
        meta: str = Form(...),
        content: UploadFile = File(...),
        user: User = Depends(principal),
    ):
        parsed = _parse_meta(meta, s.DatasetMetaIn)
        ds = service.catalog.create_dataset(
            user,
            parsed.name,
            content.file,
            description=parsed.description,
            tags=parsed.tags,
            format_hint=parsed.format_hint,
            collected_at=parsed.collected_at,
            collection_method=parsed.collection_method,
            expires_at=parsed.expires_at,
        )
        return s.DatasetOut.of(ds)

    @app.get("/api/datasets", response_model=list[s.DatasetOut])
    def search_datasets(q: str = "", user: User = Depends(principal)):
        return [s.DatasetOut.of(d) for d in service.catalog.search(user, "dataset", q)]

    @app.get("/api/datasets/{dataset_id}", response_model=s.DatasetOut)
    def get_dataset(dataset_id: str, user: User = Depends(principal)):
        return s.DatasetOut.of(service.catalog.get_dataset(user, dataset_id))

    @app.patch("/api/datasets/{dataset_id}", response_model=s.DatasetOut)
    def patch_dataset(dataset_id: str, body: s.DatasetPatch, user: User = Depends(principal)):
        patch = body.model_dump(exclude_unset=True)
        return s.DatasetOut.of(service.catalog.update_meta(user, dataset_id, patch))

    @app.get("/api/datasets/{dataset_id}/content")
    def dataset_content(dataset_id: str, user: User = Depends(principal)):
        stream, ds = service.catalog.open_content(user, dataset_id)
        media = "text/csv" if ds.format_hint == "csv" else "application/octet-stream"
        return StreamingResponse(_chunks(stream), media_type=media)

    @app.put("/api/datasets/{dataset_id}/policy", response_model=s.DatasetOut)
    def set_dataset_policy(dataset_id: str, body: s.PolicyIn, user: User = Depends(principal)):
        service.catalog.load_unchecked(dataset_id, "dataset")
        return s.DatasetOut.of(
            service.catalog.set_policy(user, dataset_id, body.visibility, body.shared_with)
        )

    @app.post("/api/analytics", response_model=s.AnalyticOut)
    def create_analytic(
        meta: str = Form(...),
        content: UploadFile = File(...),
        user: User = Depends(principal),
    ):
        parsed = _parse_meta(meta, s.AnalyticMetaIn)
        analytic = service.catalog.create_analytic(
            user,
            parsed.name,
            content.file,
            runtime_id=parsed.runtime_id,
            description=parsed.description,
            tags=parsed.tags,
            default_params=parsed.default_params,
        )
        return s.AnalyticOut.of(analytic)

    @app.get("/api/analytics", response_model=list[s.AnalyticOut])
    def search_analytics(q: str = "", user: User = Depends(principal)):
        return [s.AnalyticOut.of(a) for a in service.catalog.search(user, "analytic", q)]

    @app.get("/api/analytics/{analytic_id}", response_model=s.AnalyticOut)
    def get_analytic(analytic_id: str, user: User = Depends(principal)):
        return s.AnalyticOut.of(service.catalog.get_analytic(user, analytic_id))

    @app.patch("/api/analytics/{analytic_id}", response_model=s.AnalyticOut)
    def patch_analytic(analytic_id: str, body: s.AnalyticPatch, user: User = Depends(principal)):
        patch = body.model_dump(exclude_unset=True)
        return s.AnalyticOut.of(service.catalog.update_meta(user, analytic_id, patch))

    @app.put("/api/analytics/{analytic_id}/policy", response_model=s.AnalyticOut)
    def set_analytic_policy(analytic_id: str, body: s.PolicyIn, user: User = Depends(principal)):
        service.catalog.load_unchecked(analytic_id, "analytic")
        return s.AnalyticOut.of(
            service.catalog.set_policy(user, analytic_id, body.visibility, body.shared_with)
        )

    @app.get("/api/runtimes", response_model=s.RuntimesOut)
    def runtimes(user: User = Depends(principal)):
        return s.RuntimesOut(runtimes=service.cluster.list_runtimes())

    # --------------------------------------------------------- telemetry

    @app.post("/api/ingest", response_model=s.IngestResponse)
    async def ingest(request: Request, user: User = Depends(principal)):
        body = await request.body()
        points, parse_rejected = timeseries.parse_ndjson(body)
        report = service.telemetry.ingest_batch(points)
        return s.IngestResponse(
            accepted=report.accepted, rejected=report.rejected + parse_rejected
        )

    @app.get("/api/series")
    def series(
        source: str,
        channel: list[str] = Query(...),
        start: int = Query(alias="from"),
        end: int = Query(alias="to"),
        bucket_ms: int | None = None,
        agg: str | None = None,
        user: User = Depends(principal),
    ):
        q = timeseries.SeriesQuery(
            source=source,
            channels=tuple(channel),
            start=start,
            end=end,
            bucket_ms=bucket_ms,
            agg=agg,
        )
        result = service.telemetry.query_range(q)
        return {
            "source": source,
            "from": start,
            "to": end,
            "series": {ch: [[ts, v] for ts, v in pts] for ch, pts in result.items()},
        }

    @app.post("/api/series/extract", response_model=s.DatasetOut)
    def extract(body: s.ExtractRequest, user: User = Depends(principal)):
        ds = service.extract_dataset(
            user, body.source, body.channels, body.start, body.end, body.name
        )
        return s.DatasetOut.of(ds)

    # -------------------------------------------------------------- jobs

    @app.post("/api/jobs", response_model=s.JobOut)
    def submit_job(body: s.JobCreate, user: User = Depends(principal)):
        job = service.cluster.submit(
            user, body.analytic_id, body.dataset_id, body.params, body.timeout_ms
        )
        return s.JobOut.of(job)

    @app.get("/api/jobs", response_model=list[s.JobOut])
    def list_jobs(
        state: str | None = None, mine: bool = False, user: User = Depends(principal)
    ):
        submitted_by = user.id if mine else None
        jobs = service.cluster.list_jobs(user, state=state, submitted_by=submitted_by)
        return [s.JobOut.of(j) for j in jobs]

    @app.get("/api/jobs/{job_id}", response_model=s.JobOut)
    def get_job(job_id: int, user: User = Depends(principal)):
        return s.JobOut.of(service.cluster.get(user, job_id))

    @app.delete("/api/jobs/{job_id}", response_model=s.JobOut)
    def cancel_job(job_id: int, user: User = Depends(principal)):
        return s.JobOut.of(service.cluster.cancel(user, job_id))

    @app.get("/api/jobs/{job_id}/log")
    def job_log(job_id: int, user: User = Depends(principal)):
        return PlainTextResponse(service.cluster.read_log(user, job_id))

    @app.get("/api/jobs/{job_id}/result")
    def job_result(job_id: int, user: User = Depends(principal)):
        return service.cluster.collect(user, job_id)

    # -------------------------------------------------- facilities/scores

    @app.post("/api/facilities", response_model=s.FacilityOut)
    def create_facility(body: s.FacilityCreate, user: User = Depends(principal)):
        facility = service.catalog.create_facility(
            user, body.name, location_label=body.location_label, description=body.description
        )
        return s.FacilityOut.of(facility, [])

    @app.get("/api/facilities", response_model=list[s.FacilityOut])
    def list_facilities(q: str = "", user: User = Depends(principal)):
        out = []
        for f in service.catalog.search(user, "facility", q):
            out.append(s.FacilityOut.of(f, service.scores.bindings_for_facility(f.id)))
        return out

    @app.get("/api/facilities/{facility_id}", response_model=s.FacilityOut)
    def get_facility(facility_id: str, user: User = Depends(principal)):
        f = service.catalog.get_facility(user, facility_id)
        return s.FacilityOut.of(f, service.scores.bindings_for_facility(f.id))

    @app.post("/api/facilities/{facility_id}/metrics", response_model=s.MetricOut)
    def attach_metric(facility_id: str, body: s.MetricCreate, user: User = Depends(principal)):
        binding = service.scores.attach_metric(
            user, facility_id, body.analytic_id, body.label, body.weight
        )
        return s.MetricOut.of(binding)

    @app.delete("/api/metrics/{binding_id}")
    def detach_metric(binding_id: str, user: User = Depends(principal)):
        service.scores.detach_metric(user, binding_id)
        return {"detached": True}

    @app.get("/api/facilities/{facility_id}/score", response_model=s.CompositeOut)
    def facility_score(
        facility_id: str, at: int | None = None, user: User = Depends(principal)
    ):
        service.catalog.get_facility(user, facility_id)
        at = now_ms() if at is None else at
        return s.CompositeOut.of(service.scores.composite(facility_id, at))

    @app.get("/api/facilities/{facility_id}/history")
    def facility_history(
        facility_id: str,
        start: int = Query(alias="from"),
        end: int = Query(alias="to"),
        format: str | None = None,
        user: User = Depends(principal),
    ):
        service.catalog.get_facility(user, facility_id)
        points = service.scores.history(facility_id, start, end)
        if format == "csv":
            lines = ["ts,value"] + [f"{p.ts},{p.value}" for p in points]
            return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")
        return [s.CompositeOut.of(p) for p in points]

    # -------------------------------------------------------------- chat

    @app.post("/api/rooms", response_model=s.RoomOut)
    def create_room(body: s.RoomCreate, user: User = Depends(principal)):
        return s.RoomOut.of(service.chat.create_room(user, body.name))

    @app.get("/api/rooms", response_model=list[s.RoomOut])
    def list_rooms(user: User = Depends(principal)):
        return [s.RoomOut.of(r) for r in service.chat.list_rooms()]

    @app.post("/api/rooms/{room_id}/messages", response_model=s.MessageOut)
    def post_message(room_id: str, body: s.MessageCreate, user: User = Depends(principal)):
        return s.MessageOut.of(service.chat.post(user, room_id, body.body))

    @app.get("/api/rooms/{room_id}/messages", response_model=list[s.MessageOut])
    def fetch_messages(
        room_id: str,
        since: int = Query(default=0, ge=0),
        limit: int = 1000,
        user: User = Depends(principal),
    ):
        msgs = service.chat.fetch(room_id, since_seq=since, limit=limit)
        return [s.MessageOut.of(m) for m in msgs]

    @app.get("/api/rooms/{room_id}/stream")
    def stream_messages(
        room_id: str, from_seq: int = 1, user: User = Depends(principal)
    ):
        service.chat.get_room(room_id)

        def lines():
            for message in service.chat.subscribe(room_id, from_seq=from_seq, idle_yield=True):
                if message is None:
                    yield "\n"  # keepalive; clients skip blank lines
                else:
                    yield s.MessageOut.of(message).model_dump_json() + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    if service.config.static_dir is not None:
        app.mount("/", StaticFiles(directory=service.config.static_dir, html=True), name="ui")

    return app


def _parse_meta(raw: str, model):
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise InvalidRequest(f"meta must be a JSON object: {exc}")
    if not isinstance(data, dict):
        raise InvalidRequest("meta must be a JSON object")
    try:
        return model.model_validate(data)
    except Exception as exc:
        raise InvalidRequest(f"invalid meta: {exc}")


def _chunks(stream, size: int = 64 * 1024):
    try:
        while True:
            block = stream.read(size)
            if not block:
                return
            yield block
    finally:
        stream.close()
