from __future__ import annotations

import hashlib
import random

import pytest

from shareal.errors import (
    BadCredentials,
    DuplicateName,
    EmptyArtifact,
    EmptyName,
    InvalidPolicy,
    InvalidRequest,
    NotAuthorized,
    Unauthorized,
)

from .matrix import run_access_matrix
from .oracles import oracle_search


def test_register_and_duplicate(svc, admin):
    alice = svc.catalog.register_user(admin, "alice", "analyst", "pw")
    assert alice.name == "alice"
    assert alice.role == "analyst"
    with pytest.raises(DuplicateName):
        svc.catalog.register_user(admin, "alice", "analyst", "pw2")
    with pytest.raises(DuplicateName):
        svc.catalog.register_user(admin, "ALICE", "analyst", "pw2")


def test_register_requires_admin(svc, admin, analyst):
    with pytest.raises(NotAuthorized):
        svc.catalog.register_user(analyst, "bob", "analyst", "pw")


def test_authenticate_round_trip(svc, admin):
    svc.catalog.register_user(admin, "alice", "analyst", "pw")
    session = svc.login("alice", "pw")
    user = svc.catalog.resolve_token(session.token)
    assert user.name == "alice"
    with pytest.raises(BadCredentials):
        svc.login("alice", "wrong")
    with pytest.raises(BadCredentials):
        svc.login("ghost", "pw")


def test_token_expiry(svc, admin):
    session = svc.catalog.authenticate("admin", "adminpw", ttl_ms=1)
    import time

    time.sleep(0.01)
    with pytest.raises(Unauthorized):
        svc.catalog.resolve_token(session.token)
    with pytest.raises(Unauthorized):
        svc.catalog.resolve_token("not-a-token")


def test_create_dataset_fields(svc, admin):
    content = b"x" * 1024
    ds = svc.catalog.create_dataset(admin, "house7-aug", content, format_hint="csv")
    assert ds.version == 1
    assert ds.size_bytes == 1024
    assert ds.checksum == hashlib.sha256(content).hexdigest()
    assert ds.policy.owner == admin.id
    assert ds.policy.visibility == "private"
    assert ds.origin == "upload"

    empty = svc.catalog.create_dataset(admin, "empty", b"")
    assert empty.size_bytes == 0
    with pytest.raises(EmptyName):
        svc.catalog.create_dataset(admin, "", b"data")


def test_update_meta_versions(svc, admin, analyst):
    ds = svc.catalog.create_dataset(admin, "d", b"data")
    for expected in (2, 3, 4):
        ds = svc.catalog.update_meta(admin, ds.id, {"description": f"v{expected}"})
        assert ds.version == expected
    # empty patch still bumps
    ds = svc.catalog.update_meta(admin, ds.id, {})
    assert ds.version == 5
    with pytest.raises(NotAuthorized):
        svc.catalog.update_meta(analyst, ds.id, {"description": "nope"})
    with pytest.raises(InvalidRequest):
        svc.catalog.update_meta(admin, ds.id, {"checksum": "bad"})
    with pytest.raises(EmptyName):
        svc.catalog.update_meta(admin, ds.id, {"name": " "})


def test_version_sequence_has_no_gaps(svc, admin):
    ds = svc.catalog.create_dataset(admin, "d", b"data")
    seen = [ds.version]
    for i in range(9):
        ds = svc.catalog.update_meta(admin, ds.id, {"description": str(i)})
        seen.append(ds.version)
    assert seen == list(range(1, 11))


def test_get_content_round_trip_and_access(svc, admin, analyst):
    owner = svc.catalog.register_user(admin, "own", "analyst", "pw")
    ds = svc.catalog.create_dataset(owner, "private-ds", b"secret bytes")
    assert svc.catalog.get_content(owner, ds.id) == b"secret bytes"
    with pytest.raises(NotAuthorized):
        svc.catalog.get_content(analyst, ds.id)
    svc.catalog.set_policy(owner, ds.id, "public")
    assert svc.catalog.get_content(analyst, ds.id) == b"secret bytes"


def test_content_integrity(svc, admin):
    for blob in (b"", b"abc", b"\x00\xff" * 500):
        ds = svc.catalog.create_dataset(admin, "blob", blob)
        assert hashlib.sha256(svc.catalog.get_content(admin, ds.id)).hexdigest() == ds.checksum


def test_set_policy_rules(svc, admin):
    owner = svc.catalog.register_user(admin, "own", "analyst", "pw")
    bob = svc.catalog.register_user(admin, "bob", "analyst", "pw")
    carol = svc.catalog.register_user(admin, "carol", "analyst", "pw")
    ds = svc.catalog.create_dataset(owner, "d", b"data")

    shared = svc.catalog.set_policy(owner, ds.id, "shared", [bob.id])
    assert shared.policy.owner == owner.id  # owner survives policy replacement
    assert svc.catalog.get_content(bob, ds.id) == b"data"
    with pytest.raises(NotAuthorized):
        svc.catalog.get_content(carol, ds.id)

    with pytest.raises(InvalidPolicy):
        svc.catalog.set_policy(owner, ds.id, "shared", [])
    with pytest.raises(InvalidPolicy):
        svc.catalog.set_policy(owner, ds.id, "private", [bob.id])
    with pytest.raises(InvalidPolicy):
        svc.catalog.set_policy(owner, ds.id, "shared", ["no-such-user"])
    with pytest.raises(NotAuthorized):
        svc.catalog.set_policy(bob, ds.id, "public")


def test_search_basics(svc, admin):
    svc.catalog.create_dataset(admin, "house7-aug", b"1")
    svc.catalog.create_dataset(admin, "house7-sep", b"2")
    svc.catalog.create_dataset(admin, "lab", b"3", tags=("august", "power"))
    all_ds = svc.catalog.search(admin, "dataset", "")
    assert len(all_ds) == 3
    hits = svc.catalog.search(admin, "dataset", "AUG")
    assert {d.name for d in hits} == {"house7-aug", "lab"}


def test_search_excludes_unreadable(svc, admin):
    owner = svc.catalog.register_user(admin, "own", "analyst", "pw")
    stranger = svc.catalog.register_user(admin, "str", "analyst", "pw")
    pub1 = svc.catalog.create_dataset(owner, "pub1", b"1")
    pub2 = svc.catalog.create_dataset(owner, "pub2", b"2")
    svc.catalog.create_dataset(owner, "hidden", b"3")
    svc.catalog.set_policy(owner, pub1.id, "public")
    svc.catalog.set_policy(owner, pub2.id, "public")
    names = {d.name for d in svc.catalog.search(stranger, "dataset", "")}
    assert names == {"pub1", "pub2"}


def test_search_matches_brute_force_oracle(svc, admin):
    rng = random.Random(20250810)
    users = [svc.catalog.register_user(admin, f"u{i}", "analyst", "pw") for i in range(4)]
    words = ["alpha", "beta", "gamma", "delta", "watt", "hvac"]
    resources = []
    for i in range(60):
        owner = rng.choice(users)
        name = f"{rng.choice(words)}-{i}"
        tags = tuple(rng.sample(words, rng.randint(0, 3)))
        ds = svc.catalog.create_dataset(
            owner, name, b"x", description=rng.choice(words), tags=tags
        )
        visibility = rng.choice(["private", "shared", "public"])
        if visibility == "shared":
            members = [u.id for u in rng.sample(users, rng.randint(1, 3))]
            ds = svc.catalog.set_policy(owner, ds.id, "shared", members)
        elif visibility == "public":
            ds = svc.catalog.set_policy(owner, ds.id, "public")
        resources.append(ds)

    from shareal.catalog import can_read

    for actor in users + [admin]:
        readable = {r.id for r in resources if can_read(actor, r.policy)}
        for query in ["", "alpha", "WATT", "zz", "a"]:
            got = [r.id for r in svc.catalog.search(actor, "dataset", query)]
            assert got == oracle_search(resources, readable, query)


def test_search_ordering(svc, admin):
    ticks = iter(range(1_000, 2_000))
    svc.catalog.clock = lambda: next(ticks)  # force distinct timestamps
    a = svc.catalog.create_dataset(admin, "a", b"1")
    b = svc.catalog.create_dataset(admin, "b", b"2")
    svc.catalog.update_meta(admin, a.id, {"description": "touched last"})
    ordered = svc.catalog.search(admin, "dataset", "")
    assert [d.id for d in ordered] == [a.id, b.id]  # most recently updated first


def test_create_analytic(svc, admin):
    an = svc.catalog.create_analytic(
        admin, "hvac-score", b"echo hi", runtime_id="rt-A", default_params={"k": 1}
    )
    assert an.version == 1
    assert an.runtime_id == "rt-A"  # unknown runtime accepted at upload
    with pytest.raises(EmptyArtifact):
        svc.catalog.create_analytic(admin, "empty", b"", runtime_id="bash")


def test_create_facility(svc, admin):
    fac = svc.catalog.create_facility(admin, "Site 12", location_label="east campus")
    assert fac.name == "Site 12"
    with pytest.raises(DuplicateName):
        svc.catalog.create_facility(admin, "Site 12")
    with pytest.raises(EmptyName):
        svc.catalog.create_facility(admin, "")


def test_sweep_boundary(svc, admin):
    t = 1_000_000
    ds = svc.catalog.create_dataset(admin, "d", b"data", expires_at=t)
    assert svc.catalog.sweep_expirations(now=t - 1) == []
    assert not svc.catalog.get_dataset(admin, ds.id).expired_flag
    assert svc.catalog.sweep_expirations(now=t) == [ds.id]
    assert svc.catalog.get_dataset(admin, ds.id).expired_flag


def test_sweep_flags_exactly_the_expired(svc, admin):
    now = 5_000_000
    expected = set()
    for i in range(5):
        expires = now - 10 if i < 3 else now + 10_000
        ds = svc.catalog.create_dataset(admin, f"d{i}", b"x", expires_at=expires)
        if expires <= now:  # independent comparison
            expected.add(ds.id)
    flagged = set(svc.catalog.sweep_expirations(now=now))
    assert flagged == expected


def test_expiration_never_deletes(svc, admin):
    ds = svc.catalog.create_dataset(admin, "d", b"keep me", expires_at=1)
    before = svc.catalog.get_content(admin, ds.id)
    svc.catalog.sweep_expirations(now=10)
    after = svc.catalog.get_content(admin, ds.id)
    assert before == after == b"keep me"


def test_expiry_flag_follows_patched_deadline(svc, admin):
    ds = svc.catalog.create_dataset(admin, "d", b"x", expires_at=100)
    svc.catalog.sweep_expirations(now=200)
    assert svc.catalog.get_dataset(admin, ds.id).expired_flag
    ds = svc.catalog.update_meta(admin, ds.id, {"expires_at": 1_000_000})
    assert not ds.expired_flag


def test_access_matrix(svc, admin):
    for principal, visibility, op, allowed, expected in run_access_matrix(svc, admin):
        assert allowed == expected, f"{principal}/{visibility}/{op}"
