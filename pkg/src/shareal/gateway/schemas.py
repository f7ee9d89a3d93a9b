"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .. import catalog, chat, executor, scoring

Visibility = Literal["private", "shared", "public"]
Role = Literal["admin", "analyst"]
JobState = Literal["QUEUED", "RUNNING", "SUCCEEDED", "FAILED", "CANCELLED", "TIMEOUT"]


class LoginRequest(BaseModel):
    name: str
    secret: str


class TokenResponse(BaseModel):
    token: str
    expires_at: int


class UserCreate(BaseModel):
    name: str
    role: Role
    secret: str


class UserOut(BaseModel):
    id: str
    name: str
    role: str
    created_at: int

    @classmethod
    def of(cls, u: catalog.User) -> "UserOut":
        return cls(id=u.id, name=u.name, role=u.role, created_at=u.created_at)


class PolicyIn(BaseModel):
    visibility: Visibility
    shared_with: list[str] = []


class PolicyOut(BaseModel):
    owner: str
    visibility: str
    shared_with: list[str]


class DatasetMetaIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    description: str = ""
    tags: list[str] = []
    format_hint: str = ""
    collected_at: Optional[int] = None
    collection_method: str = ""
    expires_at: Optional[int] = None


class DatasetPatch(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    description: Optional[str] = None
    tags: Optional[list[str]] = None
    format_hint: Optional[str] = None
    collected_at: Optional[int] = None
    collection_method: Optional[str] = None
    expires_at: Optional[int] = None


class DatasetOut(BaseModel):
    id: str
    name: str
    description: str
    tags: list[str]
    format_hint: str
    size_bytes: int
    checksum: str
    collected_at: Optional[int]
    collection_method: str
    expires_at: Optional[int]
    expired_flag: bool
    origin: str
    policy: PolicyOut
    version: int
    created_at: int
    updated_at: int

    @classmethod
    def of(cls, ds: catalog.Dataset) -> "DatasetOut":
        return cls(
            id=ds.id,
            name=ds.name,
            description=ds.description,
            tags=list(ds.tags),
            format_hint=ds.format_hint,
            size_bytes=ds.size_bytes,
            checksum=ds.checksum,
            collected_at=ds.collected_at,
            collection_method=ds.collection_method,
            expires_at=ds.expires_at,
            expired_flag=ds.expired_flag,
            origin=ds.origin,
            policy=_policy(ds.policy),
            version=ds.version,
            created_at=ds.created_at,
            updated_at=ds.updated_at,
        )


class AnalyticMetaIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    runtime_id: str
    description: str = ""
    tags: list[str] = []
    default_params: dict = {}


class AnalyticPatch(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    description: Optional[str] = None
    tags: Optional[list[str]] = None
    runtime_id: Optional[str] = None
    default_params: Optional[dict] = None


class AnalyticOut(BaseModel):
    id: str
    name: str
    description: str
    tags: list[str]
    runtime_id: str
    checksum: str
    default_params: dict
    policy: PolicyOut
    version: int
    created_at: int
    updated_at: int

    @classmethod
    def of(cls, a: catalog.Analytic) -> "AnalyticOut":
        return cls(
            id=a.id,
            name=a.name,
            description=a.description,
            tags=list(a.tags),
            runtime_id=a.runtime_id,
            checksum=a.checksum,
            default_params=a.default_params,
            policy=_policy(a.policy),
            version=a.version,
            created_at=a.created_at,
            updated_at=a.updated_at,
        )


class FacilityCreate(BaseModel):
    name: str
    location_label: str = ""
    description: str = ""


class MetricOut(BaseModel):
    id: str
    facility_id: str
    analytic_id: str
    label: str
    weight: float
    created_at: int

    @classmethod
    def of(cls, b: scoring.MetricBinding) -> "MetricOut":
        return cls(
            id=b.id,
            facility_id=b.facility_id,
            analytic_id=b.analytic_id,
            label=b.label,
            weight=b.weight,
            created_at=b.created_at,
        )


class FacilityOut(BaseModel):
    id: str
    name: str
    location_label: str
    description: str
    image_ref: Optional[str]
    policy: PolicyOut
    created_at: int
    metrics: list[MetricOut] = []

    @classmethod
    def of(cls, f: catalog.Facility, metrics: list[scoring.MetricBinding]) -> "FacilityOut":
        return cls(
            id=f.id,
            name=f.name,
            location_label=f.location_label,
            description=f.description,
            image_ref=f.image_ref,
            policy=_policy(f.policy),
            created_at=f.created_at,
            metrics=[MetricOut.of(b) for b in metrics],
        )


class MetricCreate(BaseModel):
    analytic_id: str
    label: str
    weight: float


class ContributionOut(BaseModel):
    metric_id: str
    score: float
    weight: float


class CompositeOut(BaseModel):
    facility_id: str
    ts: int
    value: Optional[float]
    contributing: list[ContributionOut]

    @classmethod
    def of(cls, c: scoring.CompositeScore) -> "CompositeOut":
        return cls(
            facility_id=c.facility_id,
            ts=c.ts,
            value=c.value,
            contributing=[
                ContributionOut(metric_id=x.metric_id, score=x.score, weight=x.weight)
                for x in c.contributing
            ],
        )


class IngestResponse(BaseModel):
    accepted: int
    rejected: int


class ExtractRequest(BaseModel):
    source: str
    channels: list[str] = Field(min_length=1)
    start: int = Field(alias="from")
    end: int = Field(alias="to")
    name: str


class JobCreate(BaseModel):
    analytic_id: str
    dataset_id: str
    params: dict = {}
    timeout_ms: Optional[int] = None


class JobOut(BaseModel):
    id: int
    analytic_id: str
    dataset_id: str
    params: dict
    submitted_by: str
    timeout_ms: Optional[int]
    state: str
    submit_ts: int
    start_ts: Optional[int]
    end_ts: Optional[int]
    exit_code: Optional[int]
    reason: Optional[str]
    log_ref: Optional[str]
    result_ref: Optional[str]

    @classmethod
    def of(cls, j: executor.Job) -> "JobOut":
        return cls(
            id=j.id,
            analytic_id=j.analytic_id,
            dataset_id=j.dataset_id,
            params=j.params,
            submitted_by=j.submitted_by,
            timeout_ms=j.timeout_ms,
            state=j.state,
            submit_ts=j.submit_ts,
            start_ts=j.start_ts,
            end_ts=j.end_ts,
            exit_code=j.exit_code,
            reason=j.reason,
            log_ref=f"/api/jobs/{j.id}/log" if j.log_path else None,
            result_ref=f"/api/jobs/{j.id}/result" if j.result is not None else None,
        )


class RuntimesOut(BaseModel):
    runtimes: list[str]


class RoomCreate(BaseModel):
    name: str


class RoomOut(BaseModel):
    id: str
    name: str
    created_by: str
    created_at: int

    @classmethod
    def of(cls, r: chat.Room) -> "RoomOut":
        return cls(id=r.id, name=r.name, created_by=r.created_by, created_at=r.created_at)


class MessageCreate(BaseModel):
    body: str


class MessageOut(BaseModel):
    room: str
    seq: int
    author: str
    ts: int
    body: str

    @classmethod
    def of(cls, m: chat.Message) -> "MessageOut":
        return cls(room=m.room_id, seq=m.seq, author=m.author, ts=m.ts, body=m.body)


def _policy(p: catalog.AccessPolicy) -> PolicyOut:
    return PolicyOut(owner=p.owner, visibility=p.visibility, shared_with=list(p.shared_with))
