"""Facility characterization scores.

Analytics are bound to facilities as weighted metrics; every successful job
of a bound analytic appends one score sample per binding. The composite value
for a facility at time t is the weighted arithmetic mean of each current
binding's latest sample at or before t; bindings without samples contribute
nothing. Detaching a metric keeps its samples (audit trail) but removes them
from all future composite evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import Catalog, User, can_administer, can_read
from .errors import DuplicateBinding, InvalidRange, InvalidWeight, NotAuthorized, NotFound
from .storage import Database, new_id

_SCHEMA = """
CREATE TABLE IF NOT EXISTS metric_bindings(
    id TEXT PRIMARY KEY,
    facility_id TEXT NOT NULL,
    analytic_id TEXT NOT NULL,
    label TEXT NOT NULL,
    weight REAL NOT NULL,
    created_at INTEGER NOT NULL,
    UNIQUE(facility_id, analytic_id, label)
);
CREATE INDEX IF NOT EXISTS bindings_analytic ON metric_bindings(analytic_id);

CREATE TABLE IF NOT EXISTS score_samples(
    metric_id TEXT NOT NULL,
    ts INTEGER NOT NULL,
    score REAL NOT NULL,
    job_id INTEGER NOT NULL,
    PRIMARY KEY(metric_id, ts, job_id)
);
"""


@dataclass(frozen=True)
class MetricBinding:
    id: str
    facility_id: str
    analytic_id: str
    label: str
    weight: float
    created_at: int


@dataclass(frozen=True)
class ScoreSample:
    metric_id: str
    ts: int
    score: float
    job_id: int


@dataclass(frozen=True)
class Contribution:
    metric_id: str
    score: float
    weight: float


@dataclass(frozen=True)
class CompositeScore:
    facility_id: str
    ts: int
    value: float | None
    contributing: tuple[Contribution, ...]


class ScoreBoard:
    def __init__(self, db: Database, catalog: Catalog):
        self.db = db
        self.catalog = catalog
        self.db.executescript(_SCHEMA)

    def attach_metric(
        self, actor: User, facility_id: str, analytic_id: str, label: str, weight: float
    ) -> MetricBinding:
        self.catalog.get_facility(actor, facility_id)
        self.catalog.get_analytic(actor, analytic_id)
        if not weight > 0:
            raise InvalidWeight("weight must be strictly positive")
        binding = MetricBinding(
            id=new_id(),
            facility_id=facility_id,
            analytic_id=analytic_id,
            label=label,
            weight=float(weight),
            created_at=self.catalog.clock(),
        )
        with self.db.tx() as conn:
            dup = conn.execute(
                "SELECT 1 FROM metric_bindings WHERE facility_id = ? AND analytic_id = ?"
                " AND label = ?",
                (facility_id, analytic_id, label),
            ).fetchone()
            if dup:
                raise DuplicateBinding(
                    f"metric {label!r} already binds this analytic to the facility"
                )
            conn.execute(
                "INSERT INTO metric_bindings(id, facility_id, analytic_id, label,"
                " weight, created_at) VALUES(?,?,?,?,?,?)",
                (
                    binding.id,
                    binding.facility_id,
                    binding.analytic_id,
                    binding.label,
                    binding.weight,
                    binding.created_at,
                ),
            )
        return binding

    def detach_metric(self, actor: User, binding_id: str) -> None:
        binding = self.get_binding(binding_id)
        facility = self.catalog.load_unchecked(binding.facility_id, "facility")
        if not can_administer(actor, facility.policy):
            raise NotAuthorized("only the facility owner or an admin may detach metrics")
        with self.db.tx() as conn:
            conn.execute("DELETE FROM metric_bindings WHERE id = ?", (binding_id,))

    def get_binding(self, binding_id: str) -> MetricBinding:
        row = self.db.one("SELECT * FROM metric_bindings WHERE id = ?", (binding_id,))
        if row is None:
            raise NotFound(f"no metric binding {binding_id}")
        return _binding(row)

    def bindings_for_facility(self, facility_id: str) -> list[MetricBinding]:
        rows = self.db.query(
            "SELECT * FROM metric_bindings WHERE facility_id = ? ORDER BY created_at, id",
            (facility_id,),
        )
        return [_binding(r) for r in rows]

    def record_score(self, job, result: dict) -> list[ScoreSample]:
        """Fan a successful job's score out to every binding of its analytic.

        A binding only receives the sample when the job's submitter can read
        the bound facility.
        """
        score = result.get("score")
        if score is None:
            return []
        submitter = self.catalog.get_user(job.submitted_by)
        samples = []
        rows = self.db.query(
            "SELECT * FROM metric_bindings WHERE analytic_id = ?", (job.analytic_id,)
        )
        for row in rows:
            facility = self.catalog.load_unchecked(row["facility_id"], "facility")
            if not can_read(submitter, facility.policy):
                continue
            samples.append(
                ScoreSample(
                    metric_id=row["id"], ts=job.end_ts, score=float(score), job_id=job.id
                )
            )
        with self.db.tx() as conn:
            conn.executemany(
                "INSERT OR IGNORE INTO score_samples(metric_id, ts, score, job_id)"
                " VALUES(?,?,?,?)",
                [(s.metric_id, s.ts, s.score, s.job_id) for s in samples],
            )
        return samples

    def samples_for_metric(self, metric_id: str) -> list[ScoreSample]:
        rows = self.db.query(
            "SELECT * FROM score_samples WHERE metric_id = ? ORDER BY ts, job_id",
            (metric_id,),
        )
        return [ScoreSample(r["metric_id"], r["ts"], r["score"], r["job_id"]) for r in rows]

    def composite(self, facility_id: str, at: int) -> CompositeScore:
        self.catalog.load_unchecked(facility_id, "facility")
        contributing = []
        for binding in self.bindings_for_facility(facility_id):
            row = self.db.one(
                "SELECT score FROM score_samples WHERE metric_id = ? AND ts <= ?"
                " ORDER BY ts DESC, job_id DESC LIMIT 1",
                (binding.id, at),
            )
            if row is None:
                continue
            contributing.append(Contribution(binding.id, row["score"], binding.weight))
        value = None
        if contributing:
            value = sum(c.score * c.weight for c in contributing) / sum(
                c.weight for c in contributing
            )
        return CompositeScore(facility_id, at, value, tuple(contributing))

    def history(self, facility_id: str, start: int, end: int) -> list[CompositeScore]:
        """The composite step function sampled at every relevant timestamp."""
        if start >= end:
            raise InvalidRange("window must satisfy from < to")
        self.catalog.load_unchecked(facility_id, "facility")
        rows = self.db.query(
            "SELECT DISTINCT s.ts AS ts FROM score_samples s"
            " JOIN metric_bindings b ON b.id = s.metric_id"
            " WHERE b.facility_id = ? AND s.ts >= ? AND s.ts < ? ORDER BY s.ts ASC",
            (facility_id, start, end),
        )
        return [self.composite(facility_id, row["ts"]) for row in rows]


def _binding(row) -> MetricBinding:
    return MetricBinding(
        id=row["id"],
        facility_id=row["facility_id"],
        analytic_id=row["analytic_id"],
        label=row["label"],
        weight=row["weight"],
        created_at=row["created_at"],
    )
