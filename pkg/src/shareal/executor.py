"""Simulated HPC cluster: FIFO job queue over local subprocesses.

A job runs one cataloged analytic against one cataloged dataset inside an
isolated work directory. Runtimes are command templates with {ARTIFACT},
{DATASET}, {PARAMS} and {OUTPUT} placeholders, loaded from an editable JSON
registry, so pointing a runtime at a real queueing system later only means
editing that file. One scheduler loop owns all queue and slot state; request
handlers only write intents (submit/cancel) under the same lock the scheduler
holds while it starts, times out, and reaps processes.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shlex
import signal
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path

from .catalog import Catalog, User, can_read, now_ms
from .errors import (
    AlreadyTerminal,
    ConfigInvalid,
    DatasetExpired,
    InvalidRequest,
    NotAuthorized,
    NotFound,
    ResultMissing,
    UnknownRuntime,
)
from .storage import Database

log = logging.getLogger(__name__)

PLACEHOLDERS = ("{ARTIFACT}", "{DATASET}", "{OUTPUT}", "{PARAMS}")

# Host command templates for the supported analytic runtimes. The c entry
# expects a ready-to-run executable; matlab requires a local MATLAB install
# and exists as an editable stub. rt-echo copies the params document to the
# output for hermetic tests.
DEFAULT_RUNTIMES = {
    "bash": "bash {ARTIFACT} {DATASET} {PARAMS} {OUTPUT}",
    "c": "{ARTIFACT} {DATASET} {PARAMS} {OUTPUT}",
    "matlab": "matlab -batch {ARTIFACT} {DATASET} {PARAMS} {OUTPUT}",
    "python": "python3 {ARTIFACT} {DATASET} {PARAMS} {OUTPUT}",
    "rt-echo": "cp {PARAMS} {OUTPUT} && true {ARTIFACT} {DATASET}",
}

STATES = ("QUEUED", "RUNNING", "SUCCEEDED", "FAILED", "CANCELLED", "TIMEOUT")
TERMINAL_STATES = frozenset({"SUCCEEDED", "FAILED", "CANCELLED", "TIMEOUT"})
LEGAL_TRANSITIONS = {
    "QUEUED": frozenset({"RUNNING", "CANCELLED"}),
    "RUNNING": frozenset({"SUCCEEDED", "FAILED", "CANCELLED", "TIMEOUT"}),
    "SUCCEEDED": frozenset(),
    "FAILED": frozenset(),
    "CANCELLED": frozenset(),
    "TIMEOUT": frozenset(),
}

_SCHEMA = """
CREATE TABLE IF NOT EXISTS jobs(
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    analytic_id TEXT NOT NULL,
    dataset_id TEXT NOT NULL,
    params TEXT NOT NULL DEFAULT '{}',
    submitted_by TEXT NOT NULL,
    timeout_ms INTEGER,
    state TEXT NOT NULL DEFAULT 'QUEUED',
    submit_ts INTEGER NOT NULL,
    start_ts INTEGER,
    end_ts INTEGER,
    exit_code INTEGER,
    reason TEXT,
    result TEXT,
    log_path TEXT,
    workdir TEXT
);
CREATE INDEX IF NOT EXISTS jobs_state ON jobs(state);
"""


@dataclass(frozen=True)
class ClusterConfig:
    slots: int
    default_timeout_ms: int
    workdir_root: Path

    def validate(self) -> None:
        if self.slots < 1:
            raise ConfigInvalid("slots must be >= 1")
        if self.default_timeout_ms <= 0:
            raise ConfigInvalid("default_timeout_ms must be positive")


@dataclass(frozen=True)
class Job:
    id: int
    analytic_id: str
    dataset_id: str
    params: dict
    submitted_by: str
    timeout_ms: int | None
    state: str
    submit_ts: int
    start_ts: int | None
    end_ts: int | None
    exit_code: int | None
    reason: str | None
    log_path: str | None
    workdir: str | None
    result: dict | None


class RunnerRegistry:
    """runtime_id -> command template, backed by an editable JSON file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._templates: dict[str, str] = {}
        self.reload()

    @staticmethod
    def ensure_default_file(path: str | Path) -> None:
        path = Path(path)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(DEFAULT_RUNTIMES, indent=2, sort_keys=True) + "\n")

    def reload(self) -> None:
        try:
            raw = json.loads(self.path.read_text())
        except FileNotFoundError:
            raise ConfigInvalid(f"runner registry file {self.path} does not exist")
        except ValueError as exc:
            raise ConfigInvalid(f"runner registry is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigInvalid("runner registry must be a JSON object")
        for runtime_id, template in raw.items():
            if not isinstance(template, str):
                raise ConfigInvalid(f"template for {runtime_id!r} must be a string")
            for placeholder in PLACEHOLDERS:
                if template.count(placeholder) != 1:
                    raise ConfigInvalid(
                        f"template for {runtime_id!r} must contain {placeholder} exactly once"
                    )
        self._templates = dict(raw)

    def get(self, runtime_id: str) -> str | None:
        return self._templates.get(runtime_id)

    def runtime_ids(self) -> list[str]:
        return sorted(self._templates)


class Cluster:
    def __init__(
        self,
        db: Database,
        catalog: Catalog,
        registry: RunnerRegistry,
        config: ClusterConfig,
        clock=now_ms,
        score_sink=None,
    ):
        config.validate()
        self.db = db
        self.catalog = catalog
        self.registry = registry
        self.config = config
        self.clock = clock
        self.score_sink = score_sink
        self.db.executescript(_SCHEMA)
        self._lock = threading.RLock()
        self._procs: dict[int, subprocess.Popen] = {}
        # transition log (job_id, from_state, to_state, ts) for property checks
        self.events: list[tuple[int, str, str, int]] = []
        Path(config.workdir_root).mkdir(parents=True, exist_ok=True)

    # ----------------------------------------------------------- intents

    def submit(
        self,
        actor: User,
        analytic_id: str,
        dataset_id: str,
        params: dict | None = None,
        timeout_ms: int | None = None,
    ) -> Job:
        analytic = self.catalog.get_analytic(actor, analytic_id)
        dataset = self.catalog.get_dataset(actor, dataset_id)
        if self.registry.get(analytic.runtime_id) is None:
            raise UnknownRuntime(f"runtime {analytic.runtime_id!r} is not configured")
        if dataset.expired_flag:
            raise DatasetExpired(f"dataset {dataset_id} is expired")
        if timeout_ms is not None and timeout_ms <= 0:
            raise InvalidRequest("timeout_ms must be positive")
        effective = {**analytic.default_params, **(params or {})}
        now = self.clock()
        with self._lock, self.db.tx() as conn:
            cur = conn.execute(
                "INSERT INTO jobs(analytic_id, dataset_id, params, submitted_by,"
                " timeout_ms, state, submit_ts) VALUES(?,?,?,?,?,'QUEUED',?)",
                (analytic_id, dataset_id, json.dumps(effective), actor.id, timeout_ms, now),
            )
            job_id = cur.lastrowid
        return self._load(job_id)

    def cancel(self, actor: User, job_id: int) -> Job:
        with self._lock:
            job = self._load(job_id)
            if actor.id != job.submitted_by and actor.role != "admin":
                raise NotAuthorized("only the submitter or an admin may cancel")
            if job.state == "QUEUED":
                self._transition(job_id, "QUEUED", "CANCELLED", end_ts=self.clock())
            elif job.state == "RUNNING":
                self._kill(job_id)
                self._transition(job_id, "RUNNING", "CANCELLED", end_ts=self.clock())
            else:
                raise AlreadyTerminal(f"job {job_id} is already {job.state}")
            return self._load(job_id)

    # --------------------------------------------------------- scheduler

    def tick(self, now: int | None = None) -> list[tuple[int, str, str]]:
        """One scheduler step: reap exits, enforce deadlines, fill free slots."""
        changes: list[tuple[int, str, str]] = []
        with self._lock:
            now = self.clock() if now is None else now
            for job_id, proc in list(self._procs.items()):
                rc = proc.poll()
                if rc is None:
                    continue
                del self._procs[job_id]
                self._finalize(job_id, rc, now, changes)
            for row in self.db.query("SELECT * FROM jobs WHERE state = 'RUNNING'"):
                timeout = row["timeout_ms"] or self.config.default_timeout_ms
                if now - row["start_ts"] > timeout and row["id"] in self._procs:
                    self._kill(row["id"])
                    self._transition(row["id"], "RUNNING", "TIMEOUT", end_ts=now)
                    changes.append((row["id"], "RUNNING", "TIMEOUT"))
            while len(self._procs) < self.config.slots:
                row = self.db.one(
                    "SELECT * FROM jobs WHERE state = 'QUEUED' ORDER BY id ASC LIMIT 1"
                )
                if row is None:
                    break
                self._start(row, now, changes)
        return changes

    def _start(self, row, now: int, changes: list) -> None:
        job_id = row["id"]
        workdir = Path(self.config.workdir_root) / f"job-{job_id:06d}"
        log_path = workdir / "log.txt"
        self._transition(
            job_id,
            "QUEUED",
            "RUNNING",
            start_ts=now,
            log_path=str(log_path),
            workdir=str(workdir),
        )
        changes.append((job_id, "QUEUED", "RUNNING"))
        try:
            workdir.mkdir(parents=True, exist_ok=True)
            analytic = self.catalog.load_unchecked(row["analytic_id"], "analytic")
            dataset = self.catalog.load_unchecked(row["dataset_id"], "dataset")
            artifact_path = workdir / "artifact"
            artifact_path.write_bytes(self.catalog.blobs.read(analytic.artifact_ref))
            artifact_path.chmod(0o755)
            dataset_path = workdir / _dataset_filename(dataset.format_hint)
            dataset_path.write_bytes(self.catalog.blobs.read(dataset.content_ref))
            params_path = workdir / "params.json"
            params_path.write_text(row["params"])
            output_path = workdir / "output.json"
            template = self.registry.get(analytic.runtime_id)
            if template is None:
                raise UnknownRuntime(analytic.runtime_id)
            command = _render(template, artifact_path, dataset_path, params_path, output_path)
            with open(log_path, "wb") as log_file:
                proc = subprocess.Popen(
                    command,
                    shell=True,
                    cwd=str(workdir),
                    stdout=log_file,
                    stderr=subprocess.STDOUT,
                    start_new_session=True,
                )
            self._procs[job_id] = proc
        except Exception as exc:
            log.warning("job %s failed to launch: %s", job_id, exc)
            self._transition(
                job_id, "RUNNING", "FAILED", end_ts=self.clock(), reason="launch-failure"
            )
            changes.append((job_id, "RUNNING", "FAILED"))

    def _finalize(self, job_id: int, rc: int, now: int, changes: list) -> None:
        if rc != 0:
            self._transition(
                job_id, "RUNNING", "FAILED", end_ts=now, exit_code=rc
            )
            changes.append((job_id, "RUNNING", "FAILED"))
            return
        row = self.db.one("SELECT workdir FROM jobs WHERE id = ?", (job_id,))
        result, reason = _read_result(Path(row["workdir"]) / "output.json")
        if reason is not None:
            self._transition(
                job_id, "RUNNING", "FAILED", end_ts=now, exit_code=0, reason=reason
            )
            changes.append((job_id, "RUNNING", "FAILED"))
            return
        self._transition(
            job_id,
            "RUNNING",
            "SUCCEEDED",
            end_ts=now,
            exit_code=0,
            result=json.dumps(result),
        )
        changes.append((job_id, "RUNNING", "SUCCEEDED"))
        if self.score_sink is not None and result.get("score") is not None:
            try:
                self.score_sink(self._load(job_id), result)
            except Exception:
                log.exception("score notification for job %s failed", job_id)

    def _kill(self, job_id: int) -> None:
        proc = self._procs.pop(job_id, None)
        if proc is None:
            return
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            log.warning("process of job %s did not exit after SIGKILL", job_id)

    def _transition(self, job_id: int, expect: str, to: str, **fields) -> None:
        with self.db.tx() as conn:
            row = conn.execute("SELECT state FROM jobs WHERE id = ?", (job_id,)).fetchone()
            current = row["state"]
            if current != expect or to not in LEGAL_TRANSITIONS[current]:
                raise AlreadyTerminal(
                    f"illegal transition {current} -> {to} for job {job_id}"
                )
            sets = ["state = ?"]
            args: list = [to]
            for key, value in fields.items():
                sets.append(f"{key} = ?")
                args.append(value)
            conn.execute(f"UPDATE jobs SET {', '.join(sets)} WHERE id = ?", args + [job_id])
        self.events.append((job_id, expect, to, self.clock()))

    # ------------------------------------------------------------- reads

    def get(self, actor: User, job_id: int) -> Job:
        job = self._load(job_id)
        if not self._visible(actor, job):
            raise NotAuthorized(f"no access to job {job_id}")
        return job

    def list_jobs(
        self, actor: User, state: str | None = None, submitted_by: str | None = None
    ) -> list[Job]:
        if state is not None and state not in STATES:
            raise InvalidRequest(f"state must be one of {STATES}")
        rows = self.db.query("SELECT * FROM jobs ORDER BY id ASC")
        jobs = []
        for row in rows:
            job = _job_from_row(row)
            if state is not None and job.state != state:
                continue
            if submitted_by is not None and job.submitted_by != submitted_by:
                continue
            if self._visible(actor, job):
                jobs.append(job)
        return jobs

    def collect(self, actor: User, job_id: int) -> dict:
        """The validated result document of a SUCCEEDED job; idempotent.

        Re-fires the scoring notification so metrics bound after the job
        finished still pick the score up; sample storage deduplicates.
        """
        job = self.get(actor, job_id)
        if job.state != "SUCCEEDED" or job.result is None:
            raise ResultMissing(f"job {job_id} has no result (state {job.state})")
        if self.score_sink is not None and job.result.get("score") is not None:
            try:
                self.score_sink(job, job.result)
            except Exception:
                log.exception("score notification for job %s failed", job_id)
        return job.result

    def read_log(self, actor: User, job_id: int) -> str:
        job = self.get(actor, job_id)
        if not job.log_path or not Path(job.log_path).exists():
            return ""
        return Path(job.log_path).read_text(errors="replace")

    def list_runtimes(self) -> list[str]:
        return self.registry.runtime_ids()

    def running_count(self) -> int:
        with self._lock:
            return len(self._procs)

    def _visible(self, actor: User, job: Job) -> bool:
        if actor.id == job.submitted_by or actor.role == "admin":
            return True
        try:
            analytic = self.catalog.load_unchecked(job.analytic_id, "analytic")
            dataset = self.catalog.load_unchecked(job.dataset_id, "dataset")
        except NotFound:
            return False
        return can_read(actor, analytic.policy) and can_read(actor, dataset.policy)

    def _load(self, job_id: int) -> Job:
        row = self.db.one("SELECT * FROM jobs WHERE id = ?", (job_id,))
        if row is None:
            raise NotFound(f"no job {job_id}")
        return _job_from_row(row)

    # --------------------------------------------------------- lifecycle

    def recover(self) -> list[int]:
        """Fail jobs that were RUNNING when the previous process died."""
        now = self.clock()
        with self._lock:
            interrupted = [
                row["id"] for row in self.db.query("SELECT id FROM jobs WHERE state = 'RUNNING'")
            ]
            for job_id in interrupted:
                self._transition(
                    job_id, "RUNNING", "FAILED", end_ts=now, reason="interrupted"
                )
        return interrupted

    def shutdown(self) -> None:
        """Terminate running jobs on graceful stop."""
        now = self.clock()
        with self._lock:
            for job_id in list(self._procs):
                self._kill(job_id)
                if self._load(job_id).state == "RUNNING":
                    self._transition(job_id, "RUNNING", "FAILED", end_ts=now, reason="shutdown")


def _render(template: str, artifact, dataset, params, output) -> str:
    return (
        template.replace("{ARTIFACT}", shlex.quote(str(artifact)))
        .replace("{DATASET}", shlex.quote(str(dataset)))
        .replace("{PARAMS}", shlex.quote(str(params)))
        .replace("{OUTPUT}", shlex.quote(str(output)))
    )


def _dataset_filename(format_hint: str) -> str:
    hint = (format_hint or "").strip().lower()
    if hint.isalnum() and len(hint) <= 8:
        return f"dataset.{hint}"
    return "dataset"


def _read_result(output_path: Path) -> tuple[dict | None, str | None]:
    """Parse and validate an analytic's output document.

    Returns (result, None) on success or (None, failure reason) where the
    reason is one of result-missing, result-malformed, score-out-of-range.
    """
    if not output_path.exists():
        return None, "result-missing"
    try:
        result = json.loads(output_path.read_text())
    except (ValueError, UnicodeDecodeError):
        return None, "result-malformed"
    if not isinstance(result, dict):
        return None, "result-malformed"
    if "score" in result:
        score = result["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            return None, "result-malformed"
        if math.isnan(score) or not 0 <= score <= 100:
            return None, "score-out-of-range"
    return result, None


def _job_from_row(row) -> Job:
    return Job(
        id=row["id"],
        analytic_id=row["analytic_id"],
        dataset_id=row["dataset_id"],
        params=json.loads(row["params"]),
        submitted_by=row["submitted_by"],
        timeout_ms=row["timeout_ms"],
        state=row["state"],
        submit_ts=row["submit_ts"],
        start_ts=row["start_ts"],
        end_ts=row["end_ts"],
        exit_code=row["exit_code"],
        reason=row["reason"],
        log_path=row["log_path"],
        workdir=row["workdir"],
        result=json.loads(row["result"]) if row["result"] else None,
    )
