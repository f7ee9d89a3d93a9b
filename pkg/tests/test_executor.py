from __future__ import annotations

import json
import random
import time
from pathlib import Path

import pytest

from shareal.config import ServiceConfig
from shareal.errors import (
    AlreadyTerminal,
    ConfigInvalid,
    DatasetExpired,
    NotAuthorized,
    NotFound,
    ResultMissing,
    UnknownRuntime,
)
from shareal.executor import DEFAULT_RUNTIMES, LEGAL_TRANSITIONS, RunnerRegistry
from shareal.service import Service

SLEEP_SCRIPT = b'#!/bin/sh\nsleep 0.2\ncp "$2" "$3"\n'
FOREVER_SCRIPT = b"#!/bin/sh\nsleep 30\n"
NO_OUTPUT_SCRIPT = b"#!/bin/sh\ntrue\n"
BAD_JSON_SCRIPT = b'#!/bin/sh\nprintf "not json" > "$3"\n'
EXIT_3_SCRIPT = b"#!/bin/sh\nexit 3\n"


def make_fixtures(svc, admin, script=SLEEP_SCRIPT, runtime="bash", params=None, name="an"):
    ds = svc.catalog.create_dataset(admin, f"{name}-ds", b"1,2,3\n")
    an = svc.catalog.create_analytic(
        admin, name, script, runtime_id=runtime, default_params=params or {}
    )
    return an, ds


def run_to_terminal(svc, admin, job_id, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        svc.cluster.tick()
        job = svc.cluster.get(admin, job_id)
        if job.state not in ("QUEUED", "RUNNING"):
            return job
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not reach a terminal state")


# ------------------------------------------------------------------ registry


def test_default_registry(svc):
    assert svc.cluster.list_runtimes() == sorted(DEFAULT_RUNTIMES)
    assert {"bash", "c", "matlab", "python", "rt-echo"} <= set(svc.cluster.list_runtimes())


def test_registry_validates_templates(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"x": "run {ARTIFACT} {DATASET} {OUTPUT}"}))  # missing PARAMS
    with pytest.raises(ConfigInvalid):
        RunnerRegistry(bad)
    bad.write_text(json.dumps({"x": "{ARTIFACT} {ARTIFACT} {DATASET} {PARAMS} {OUTPUT}"}))
    with pytest.raises(ConfigInvalid):
        RunnerRegistry(bad)


def test_registry_reload_picks_up_new_runtime(svc):
    registry = svc.cluster.registry
    templates = json.loads(Path(registry.path).read_text())
    templates["rt-A"] = "run {ARTIFACT} {DATASET} {PARAMS} {OUTPUT}"
    Path(registry.path).write_text(json.dumps(templates))
    assert "rt-A" not in svc.cluster.list_runtimes()
    registry.reload()
    assert "rt-A" in svc.cluster.list_runtimes()


def test_empty_registry(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert RunnerRegistry(empty).runtime_ids() == []


# -------------------------------------------------------------------- submit


def test_submit_monotone_ids(svc, admin):
    an, ds = make_fixtures(svc, admin)
    ids = [svc.cluster.submit(admin, an.id, ds.id).id for _ in range(5)]
    assert ids == sorted(ids)
    assert len(set(ids)) == 5
    job = svc.cluster.get(admin, ids[0])
    assert job.state == "QUEUED"


def test_submit_unknown_runtime(svc, admin):
    an, ds = make_fixtures(svc, admin, runtime="rt-Z")
    with pytest.raises(UnknownRuntime):
        svc.cluster.submit(admin, an.id, ds.id)


def test_submit_expired_dataset(svc, admin):
    an, ds = make_fixtures(svc, admin)
    svc.catalog.update_meta(admin, ds.id, {"expires_at": 1})
    svc.catalog.sweep_expirations(now=10)
    with pytest.raises(DatasetExpired):
        svc.cluster.submit(admin, an.id, ds.id)


def test_submit_requires_readable_resources(svc, admin, analyst):
    an, ds = make_fixtures(svc, admin)
    with pytest.raises(NotAuthorized):
        svc.cluster.submit(analyst, an.id, ds.id)
    with pytest.raises(NotFound):
        svc.cluster.submit(admin, "missing", ds.id)


def test_submit_merges_default_params(svc, admin):
    an, ds = make_fixtures(
        svc, admin, runtime="rt-echo", params={"score": 10, "keep": 1}, name="merge"
    )
    job = svc.cluster.submit(admin, an.id, ds.id, params={"score": 20})
    assert job.params == {"score": 20, "keep": 1}


# ---------------------------------------------------------------- scheduling


def test_slot_cap(svc, admin):
    an, ds = make_fixtures(svc, admin)  # sleeps 200 ms
    for _ in range(5):
        svc.cluster.submit(admin, an.id, ds.id)
    svc.cluster.tick()
    jobs = svc.cluster.list_jobs(admin)
    states = [j.state for j in jobs]
    assert states.count("RUNNING") == 2  # slots=2 in the fixture
    assert states.count("QUEUED") == 3


def test_timeout(svc, admin):
    an, ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT)
    job = svc.cluster.submit(admin, an.id, ds.id, timeout_ms=150)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "TIMEOUT"
    assert job.end_ts is not None
    assert job.end_ts >= job.start_ts >= job.submit_ts


def test_fifo_start_order(svc, admin):
    an, ds = make_fixtures(svc, admin, script=b'#!/bin/sh\nsleep 0.05\ncp "$2" "$3"\n')
    ids = [svc.cluster.submit(admin, an.id, ds.id).id for _ in range(6)]
    for jid in ids:
        run_to_terminal(svc, admin, jid)
    jobs = [svc.cluster.get(admin, jid) for jid in ids]
    starts = [j.start_ts for j in jobs]
    assert starts == sorted(starts)  # submit order == start order


def test_success_and_failure_modes(svc, admin):
    cases = [
        (SLEEP_SCRIPT, {"score": 42}, "SUCCEEDED", None),
        (NO_OUTPUT_SCRIPT, {}, "FAILED", "result-missing"),
        (BAD_JSON_SCRIPT, {}, "FAILED", "result-malformed"),
        (EXIT_3_SCRIPT, {}, "FAILED", None),
    ]
    for i, (script, params, want_state, want_reason) in enumerate(cases):
        an, ds = make_fixtures(svc, admin, script=script, params=params, name=f"case{i}")
        job = svc.cluster.submit(admin, an.id, ds.id)
        job = run_to_terminal(svc, admin, job.id)
        assert job.state == want_state, (i, job.reason)
        assert job.reason == want_reason
        if script is EXIT_3_SCRIPT:
            assert job.exit_code == 3


def test_score_out_of_range_fails_job(svc, admin):
    an, ds = make_fixtures(svc, admin, runtime="rt-echo", params={"score": 140}, name="oor")
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "FAILED"
    assert job.reason == "score-out-of-range"
    assert job.exit_code == 0


def test_collect(svc, admin):
    an, ds = make_fixtures(svc, admin, runtime="rt-echo", params={"score": 72.5}, name="ok")
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "SUCCEEDED"
    first = svc.cluster.collect(admin, job.id)
    assert first == {"score": 72.5}
    assert svc.cluster.collect(admin, job.id) == first  # idempotent

    queued_an, queued_ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT, name="q")
    queued = svc.cluster.submit(admin, queued_an.id, queued_ds.id)
    with pytest.raises(ResultMissing):
        svc.cluster.collect(admin, queued.id)


def test_payload_without_score_is_valid(svc, admin):
    an, ds = make_fixtures(
        svc, admin, runtime="rt-echo", params={"payload": {"rows": 3}}, name="np"
    )
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "SUCCEEDED"
    assert svc.cluster.collect(admin, job.id) == {"payload": {"rows": 3}}


def test_job_log_captured(svc, admin):
    an, ds = make_fixtures(
        svc, admin, script=b'#!/bin/sh\necho "hello from the job"\ncp "$2" "$3"\n', name="log"
    )
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "SUCCEEDED"
    assert "hello from the job" in svc.cluster.read_log(admin, job.id)


# -------------------------------------------------------------------- cancel


def test_cancel_queued(svc, admin):
    an, ds = make_fixtures(svc, admin)
    job = svc.cluster.submit(admin, an.id, ds.id)
    cancelled = svc.cluster.cancel(admin, job.id)
    assert cancelled.state == "CANCELLED"
    svc.cluster.tick()
    assert svc.cluster.get(admin, job.id).state == "CANCELLED"  # never runs
    with pytest.raises(AlreadyTerminal):
        svc.cluster.cancel(admin, job.id)


def test_cancel_running(svc, admin):
    an, ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT)
    job = svc.cluster.submit(admin, an.id, ds.id)
    svc.cluster.tick()
    assert svc.cluster.get(admin, job.id).state == "RUNNING"
    cancelled = svc.cluster.cancel(admin, job.id)
    assert cancelled.state == "CANCELLED"
    assert svc.cluster.running_count() == 0


def test_cancel_authorization(svc, admin):
    owner = svc.catalog.register_user(admin, "own", "analyst", "pw")
    other = svc.catalog.register_user(admin, "other", "analyst", "pw")
    ds = svc.catalog.create_dataset(owner, "d", b"x")
    an = svc.catalog.create_analytic(owner, "a", SLEEP_SCRIPT, runtime_id="bash")
    job = svc.cluster.submit(owner, an.id, ds.id)
    with pytest.raises(NotAuthorized):
        svc.cluster.cancel(other, job.id)
    assert svc.cluster.cancel(admin, job.id).state == "CANCELLED"


# --------------------------------------------------------------- visibility


def test_job_visibility(svc, admin):
    owner = svc.catalog.register_user(admin, "own", "analyst", "pw")
    stranger = svc.catalog.register_user(admin, "str", "analyst", "pw")
    ds = svc.catalog.create_dataset(owner, "d", b"x")
    an = svc.catalog.create_analytic(owner, "a", SLEEP_SCRIPT, runtime_id="bash")
    job = svc.cluster.submit(owner, an.id, ds.id)

    assert svc.cluster.get(owner, job.id).id == job.id
    assert svc.cluster.get(admin, job.id).id == job.id
    with pytest.raises(NotAuthorized):
        svc.cluster.get(stranger, job.id)
    assert svc.cluster.list_jobs(stranger) == []

    # making both resources readable opens the job up
    svc.catalog.set_policy(owner, ds.id, "public")
    with pytest.raises(NotAuthorized):
        svc.cluster.get(stranger, job.id)  # analytic still private
    svc.catalog.set_policy(owner, an.id, "public")
    assert svc.cluster.get(stranger, job.id).id == job.id


def test_list_jobs_filters(svc, admin):
    an, ds = make_fixtures(svc, admin)
    for _ in range(3):
        svc.cluster.submit(admin, an.id, ds.id)
    queued = svc.cluster.list_jobs(admin, state="QUEUED")
    assert len(queued) == 3
    assert [j.id for j in queued] == sorted(j.id for j in queued)
    assert svc.cluster.list_jobs(admin, state="SUCCEEDED") == []
    mine = svc.cluster.list_jobs(admin, submitted_by=admin.id)
    assert len(mine) == 3


# ---------------------------------------------------------------- properties


def test_workdir_isolation(svc, admin):
    an, ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT)
    j1 = svc.cluster.submit(admin, an.id, ds.id)
    j2 = svc.cluster.submit(admin, an.id, ds.id)
    svc.cluster.tick()
    a = svc.cluster.get(admin, j1.id)
    b = svc.cluster.get(admin, j2.id)
    assert a.workdir != b.workdir
    for job in (a, b):
        contents = {p.name for p in Path(job.workdir).iterdir()}
        assert {"artifact", "dataset.dat", "params.json", "log.txt"} <= contents or {
            "artifact",
            "dataset",
            "params.json",
            "log.txt",
        } <= contents
    svc.cluster.cancel(admin, j1.id)
    svc.cluster.cancel(admin, j2.id)


def test_randomized_ops_respect_state_machine_and_slot_cap(svc, admin):
    rng = random.Random(4242)
    an, ds = make_fixtures(svc, admin, script=b'#!/bin/sh\nsleep 0.03\ncp "$2" "$3"\n')
    submitted = []
    for _ in range(120):
        op = rng.random()
        if op < 0.4:
            submitted.append(svc.cluster.submit(admin, an.id, ds.id).id)
        elif op < 0.55 and submitted:
            try:
                svc.cluster.cancel(admin, rng.choice(submitted))
            except AlreadyTerminal:
                pass
        else:
            svc.cluster.tick()
            time.sleep(rng.uniform(0, 0.01))
        assert svc.cluster.running_count() <= svc.cluster.config.slots
    for jid in submitted:
        job = svc.cluster.get(admin, jid)
        if job.state in ("QUEUED", "RUNNING"):
            run_to_terminal(svc, admin, jid)

    by_job: dict[int, list[tuple[str, str]]] = {}
    for job_id, src, dst, _ts in svc.cluster.events:
        by_job.setdefault(job_id, []).append((src, dst))
    assert by_job, "no transitions recorded"
    for job_id, transitions in by_job.items():
        state = "QUEUED"
        for src, dst in transitions:
            assert src == state, f"job {job_id}: expected from {state}, saw {src}->{dst}"
            assert dst in LEGAL_TRANSITIONS[src], f"job {job_id}: illegal {src}->{dst}"
            state = dst


def test_collect_backfills_late_metric_bindings(svc, admin):
    an, ds = make_fixtures(svc, admin, runtime="rt-echo", params={"score": 64}, name="late")
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    assert job.state == "SUCCEEDED"
    fac = svc.catalog.create_facility(admin, "late-fac")
    svc.scores.attach_metric(admin, fac.id, an.id, "m", 1.0)
    assert svc.scores.composite(fac.id, job.end_ts).value is None
    svc.cluster.collect(admin, job.id)  # result retrieval re-notifies scoring
    assert svc.scores.composite(fac.id, job.end_ts).value == 64.0
    svc.cluster.collect(admin, job.id)  # and stays idempotent
    assert len(svc.scores.history(fac.id, 0, job.end_ts + 1)) == 1


def test_result_is_immutable_after_collect(svc, admin):
    an, ds = make_fixtures(svc, admin, runtime="rt-echo", params={"score": 10}, name="imm")
    job = svc.cluster.submit(admin, an.id, ds.id)
    job = run_to_terminal(svc, admin, job.id)
    doc = svc.cluster.collect(admin, job.id)
    doc["score"] = 99  # mutating the returned copy must not leak back
    assert svc.cluster.collect(admin, job.id) == {"score": 10}


# ----------------------------------------------------------------- lifecycle


def test_recovery_marks_interrupted(tmp_path):
    data = tmp_path / "data"
    svc = Service(ServiceConfig(data_dir=data, bootstrap_secret="pw", slots=2))
    admin = svc.catalog.resolve_token(svc.login("admin", "pw").token)
    an, ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT)
    job = svc.cluster.submit(admin, an.id, ds.id)
    svc.cluster.tick()
    assert svc.cluster.get(admin, job.id).state == "RUNNING"

    # a second service over the same data dir plays the part of a restart
    # after an unclean death: the old RUNNING row must come back FAILED
    svc2 = Service(ServiceConfig(data_dir=data, bootstrap_secret="pw", slots=2))
    try:
        recovered = svc2.cluster.get(admin, job.id)
        assert recovered.state == "FAILED"
        assert recovered.reason == "interrupted"
    finally:
        svc2.close()
        svc.close()


def test_shutdown_marks_running_jobs(svc, admin):
    an, ds = make_fixtures(svc, admin, script=FOREVER_SCRIPT)
    job = svc.cluster.submit(admin, an.id, ds.id)
    svc.cluster.tick()
    svc.cluster.shutdown()
    final = svc.cluster.get(admin, job.id)
    assert final.state == "FAILED"
    assert final.reason == "shutdown"
    assert svc.cluster.running_count() == 0
