"""Shared knowledge catalog: users, datasets, analytics, facilities.

All resource metadata lives in one SQLite database; content bytes live in the
content-addressed blob store. Every resource carries an access policy and the
single read predicate :func:`can_read` decides visibility everywhere (search,
content download, job submission, scoring).
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
import time
from dataclasses import dataclass, field, replace

from .errors import (
    BadCredentials,
    DuplicateName,
    EmptyArtifact,
    EmptyName,
    InvalidPolicy,
    InvalidRequest,
    NotAuthorized,
    NotFound,
    Unauthorized,
)
from .storage import BlobStore, Database, new_id

ROLES = ("admin", "analyst")
VISIBILITIES = ("private", "shared", "public")
KINDS = ("dataset", "analytic", "facility")

PBKDF2_ITERATIONS = 20_000


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass(frozen=True)
class User:
    id: str
    name: str
    role: str
    created_at: int


@dataclass(frozen=True)
class Session:
    token: str
    user_id: str
    issued_at: int
    expires_at: int


@dataclass(frozen=True)
class AccessPolicy:
    owner: str
    visibility: str = "private"
    shared_with: tuple[str, ...] = ()


@dataclass(frozen=True)
class Dataset:
    id: str
    name: str
    description: str
    tags: tuple[str, ...]
    format_hint: str
    content_ref: str
    size_bytes: int
    checksum: str
    collected_at: int | None
    collection_method: str
    expires_at: int | None
    expired_flag: bool
    origin: str
    policy: AccessPolicy
    version: int
    created_at: int
    updated_at: int


@dataclass(frozen=True)
class Analytic:
    id: str
    name: str
    description: str
    tags: tuple[str, ...]
    runtime_id: str
    artifact_ref: str
    checksum: str
    default_params: dict
    policy: AccessPolicy
    version: int
    created_at: int
    updated_at: int


@dataclass(frozen=True)
class Facility:
    id: str
    name: str
    location_label: str
    description: str
    image_ref: str | None
    policy: AccessPolicy
    created_at: int
    updated_at: int


def can_read(principal: User, policy: AccessPolicy) -> bool:
    """Owner, admin, public, or member of a shared policy's audience."""
    return (
        principal.id == policy.owner
        or principal.role == "admin"
        or policy.visibility == "public"
        or (policy.visibility == "shared" and principal.id in policy.shared_with)
    )


def can_administer(principal: User, policy: AccessPolicy) -> bool:
    """Owner or admin; gates metadata updates and policy changes."""
    return principal.id == policy.owner or principal.role == "admin"


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users(
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    role TEXT NOT NULL,
    salt BLOB NOT NULL,
    digest BLOB NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS users_name_nocase ON users(name COLLATE NOCASE);

CREATE TABLE IF NOT EXISTS sessions(
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    issued_at INTEGER NOT NULL,
    expires_at INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS resources(
    id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    name TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    tags TEXT NOT NULL DEFAULT '[]',
    format_hint TEXT,
    content_ref TEXT,
    size_bytes INTEGER,
    checksum TEXT,
    collected_at INTEGER,
    collection_method TEXT,
    expires_at INTEGER,
    expired_flag INTEGER NOT NULL DEFAULT 0,
    origin TEXT,
    runtime_id TEXT,
    artifact_ref TEXT,
    default_params TEXT,
    location_label TEXT,
    image_ref TEXT,
    owner TEXT NOT NULL,
    visibility TEXT NOT NULL DEFAULT 'private',
    shared_with TEXT NOT NULL DEFAULT '[]',
    version INTEGER NOT NULL DEFAULT 1,
    created_at INTEGER NOT NULL,
    updated_at INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS resources_kind ON resources(kind);

CREATE TABLE IF NOT EXISTS catalog_meta(key TEXT PRIMARY KEY, value TEXT NOT NULL);
"""

# metadata fields a PATCH may touch, per resource kind
_PATCHABLE = {
    "dataset": {
        "name",
        "description",
        "tags",
        "format_hint",
        "collected_at",
        "collection_method",
        "expires_at",
    },
    "analytic": {"name", "description", "tags", "runtime_id", "default_params"},
}


class Catalog:
    def __init__(self, db: Database, blobs: BlobStore, clock=now_ms):
        self.db = db
        self.blobs = blobs
        self.clock = clock
        self.db.executescript(_SCHEMA)

    # ------------------------------------------------------------- users

    def register_user(self, actor: User, name: str, role: str, secret: str) -> User:
        if actor.role != "admin":
            raise NotAuthorized("only admins may register users")
        return self._insert_user(name, role, secret)

    def ensure_admin(self, name: str, secret: str) -> User | None:
        """Create the bootstrap admin on a fresh database; no-op otherwise."""
        if self.db.one("SELECT id FROM users LIMIT 1") is not None:
            return None
        return self._insert_user(name, "admin", secret)

    def _insert_user(self, name: str, role: str, secret: str) -> User:
        if not name or not name.strip():
            raise EmptyName("user name must be nonempty")
        if role not in ROLES:
            raise InvalidRequest(f"role must be one of {ROLES}")
        salt = os.urandom(16)
        digest = _kdf(secret, salt)
        uid = new_id()
        ts = self.clock()
        with self.db.tx() as conn:
            dup = conn.execute(
                "SELECT 1 FROM users WHERE name = ? COLLATE NOCASE", (name,)
            ).fetchone()
            if dup:
                raise DuplicateName(f"user name {name!r} already taken")
            conn.execute(
                "INSERT INTO users(id, name, role, salt, digest, created_at)"
                " VALUES(?,?,?,?,?,?)",
                (uid, name, role, salt, digest, ts),
            )
        return User(uid, name, role, ts)

    def get_user(self, user_id: str) -> User:
        row = self.db.one("SELECT * FROM users WHERE id = ?", (user_id,))
        if row is None:
            raise NotFound(f"no user {user_id}")
        return User(row["id"], row["name"], row["role"], row["created_at"])

    def authenticate(self, name: str, secret: str, ttl_ms: int) -> Session:
        row = self.db.one("SELECT * FROM users WHERE name = ? COLLATE NOCASE", (name,))
        if row is None:
            # burn a KDF round so unknown users cost the same as wrong secrets
            _kdf(secret, b"\x00" * 16)
            raise BadCredentials()
        if not hmac.compare_digest(_kdf(secret, row["salt"]), row["digest"]):
            raise BadCredentials()
        now = self.clock()
        session = Session(secrets.token_hex(16), row["id"], now, now + ttl_ms)
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO sessions(token, user_id, issued_at, expires_at)"
                " VALUES(?,?,?,?)",
                (session.token, session.user_id, session.issued_at, session.expires_at),
            )
        return session

    def resolve_token(self, token: str) -> User:
        row = self.db.one("SELECT * FROM sessions WHERE token = ?", (token,))
        if row is None or row["expires_at"] <= self.clock():
            raise Unauthorized()
        return self.get_user(row["user_id"])

    # --------------------------------------------------------- resources

    def create_dataset(
        self,
        actor: User,
        name: str,
        content,
        *,
        description: str = "",
        tags=(),
        format_hint: str = "",
        collected_at: int | None = None,
        collection_method: str = "",
        expires_at: int | None = None,
        origin: str = "upload",
    ) -> Dataset:
        if not name or not name.strip():
            raise EmptyName("dataset name must be nonempty")
        if origin not in ("upload", "extracted"):
            raise InvalidRequest("origin must be upload or extracted")
        digest, size = self.blobs.put(content)
        rid = new_id()
        ts = self.clock()
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO resources(id, kind, name, description, tags, format_hint,"
                " content_ref, size_bytes, checksum, collected_at, collection_method,"
                " expires_at, origin, owner, created_at, updated_at)"
                " VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    rid,
                    "dataset",
                    name,
                    description,
                    json.dumps(list(tags)),
                    format_hint,
                    digest,
                    size,
                    digest,
                    collected_at,
                    collection_method,
                    expires_at,
                    origin,
                    actor.id,
                    ts,
                    ts,
                ),
            )
        return self.get_dataset(actor, rid)

    def create_analytic(
        self,
        actor: User,
        name: str,
        artifact,
        *,
        runtime_id: str,
        description: str = "",
        tags=(),
        default_params: dict | None = None,
    ) -> Analytic:
        if not name or not name.strip():
            raise EmptyName("analytic name must be nonempty")
        digest, size = self.blobs.put(artifact)
        if size == 0:
            raise EmptyArtifact("analytic artifact must be nonempty")
        rid = new_id()
        ts = self.clock()
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO resources(id, kind, name, description, tags, runtime_id,"
                " artifact_ref, size_bytes, checksum, default_params, owner,"
                " created_at, updated_at) VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    rid,
                    "analytic",
                    name,
                    description,
                    json.dumps(list(tags)),
                    runtime_id,
                    digest,
                    size,
                    digest,
                    json.dumps(default_params or {}),
                    actor.id,
                    ts,
                    ts,
                ),
            )
        return self.get_analytic(actor, rid)

    def create_facility(
        self,
        actor: User,
        name: str,
        *,
        location_label: str = "",
        description: str = "",
        image: bytes | None = None,
    ) -> Facility:
        if not name or not name.strip():
            raise EmptyName("facility name must be nonempty")
        for existing in self.search(actor, "facility", ""):
            if existing.name == name:
                raise DuplicateName(f"facility {name!r} already visible to you")
        image_ref = None
        if image:
            image_ref, _ = self.blobs.put(image)
        rid = new_id()
        ts = self.clock()
        with self.db.tx() as conn:
            conn.execute(
                "INSERT INTO resources(id, kind, name, description, location_label,"
                " image_ref, owner, created_at, updated_at)"
                " VALUES(?,?,?,?,?,?,?,?,?)",
                (rid, "facility", name, description, location_label, image_ref, actor.id, ts, ts),
            )
        return self.get_facility(actor, rid)

    def get_dataset(self, actor: User, rid: str) -> Dataset:
        return self._get_checked(actor, rid, "dataset")

    def get_analytic(self, actor: User, rid: str) -> Analytic:
        return self._get_checked(actor, rid, "analytic")

    def get_facility(self, actor: User, rid: str) -> Facility:
        return self._get_checked(actor, rid, "facility")

    def _get_checked(self, actor: User, rid: str, kind: str | None = None):
        obj = self._load(rid, kind)
        if not can_read(actor, obj.policy):
            raise NotAuthorized(f"no read access to {rid}")
        return obj

    def _load(self, rid: str, kind: str | None = None):
        row = self.db.one("SELECT * FROM resources WHERE id = ?", (rid,))
        if row is None or (kind is not None and row["kind"] != kind):
            raise NotFound(f"no {kind or 'resource'} {rid}")
        return _from_row(row)

    def load_unchecked(self, rid: str, kind: str | None = None):
        """Internal access without a read check (scheduler, scoring fan-out)."""
        return self._load(rid, kind)

    def open_content(self, actor: User, dataset_id: str):
        ds = self.get_dataset(actor, dataset_id)
        return self.blobs.open(ds.content_ref), ds

    def get_content(self, actor: User, dataset_id: str) -> bytes:
        ds = self.get_dataset(actor, dataset_id)
        return self.blobs.read(ds.content_ref)

    def get_artifact_bytes(self, analytic: Analytic) -> bytes:
        return self.blobs.read(analytic.artifact_ref)

    def update_meta(self, actor: User, rid: str, patch: dict):
        obj = self._load(rid)
        kind = _kind_of(obj)
        if kind not in _PATCHABLE:
            raise InvalidRequest(f"{kind} metadata is immutable")
        if not can_administer(actor, obj.policy):
            raise NotAuthorized("only the owner or an admin may update metadata")
        unknown = set(patch) - _PATCHABLE[kind]
        if unknown:
            raise InvalidRequest(f"unknown patch fields: {sorted(unknown)}")
        if "name" in patch and not str(patch["name"]).strip():
            raise EmptyName("name must be nonempty")

        sets, args = [], []
        for key, value in patch.items():
            if key == "tags":
                value = json.dumps(list(value))
            elif key == "default_params":
                value = json.dumps(value or {})
            sets.append(f"{key} = ?")
            args.append(value)
        now = self.clock()
        with self.db.tx() as conn:
            if "expires_at" in patch:
                # keep flag consistent with the new deadline vs the last sweep
                last_sweep = self._last_sweep(conn)
                flagged = patch["expires_at"] is not None and patch["expires_at"] <= last_sweep
                sets.append("expired_flag = ?")
                args.append(1 if flagged else 0)
            sql = (
                f"UPDATE resources SET {', '.join(sets + ['version = version + 1', 'updated_at = ?'])}"
                " WHERE id = ?"
            )
            conn.execute(sql, args + [now, rid])
        return self._get_checked(actor, rid)

    def set_policy(self, actor: User, rid: str, visibility: str, shared_with=()) -> object:
        obj = self._load(rid)
        if not can_administer(actor, obj.policy):
            raise NotAuthorized("only the owner or an admin may change the policy")
        if visibility not in VISIBILITIES:
            raise InvalidPolicy(f"visibility must be one of {VISIBILITIES}")
        members = sorted(set(shared_with))
        if visibility == "shared" and not members:
            raise InvalidPolicy("shared visibility requires a nonempty member set")
        if visibility != "shared" and members:
            raise InvalidPolicy("member set only applies to shared visibility")
        for uid in members:
            if self.db.one("SELECT 1 FROM users WHERE id = ?", (uid,)) is None:
                raise InvalidPolicy(f"unknown user id {uid!r} in member set")
        with self.db.tx() as conn:
            conn.execute(
                "UPDATE resources SET visibility = ?, shared_with = ? WHERE id = ?",
                (visibility, json.dumps(members), rid),
            )
        return self._load(rid)

    def search(self, actor: User, kind: str, query: str) -> list:
        if kind not in KINDS:
            raise InvalidRequest(f"kind must be one of {KINDS}")
        rows = self.db.query("SELECT * FROM resources WHERE kind = ?", (kind,))
        needle = (query or "").lower()
        out = []
        for row in rows:
            obj = _from_row(row)
            if not can_read(actor, obj.policy):
                continue
            if needle and not _matches(obj, needle):
                continue
            out.append(obj)
        out.sort(key=lambda r: (-r.updated_at, r.id))
        return out

    # -------------------------------------------------------- expiration

    def sweep_expirations(self, now: int | None = None) -> list[str]:
        """Flag every dataset past its deadline; returns their ids. Never deletes."""
        now = self.clock() if now is None else now
        with self.db.tx() as conn:
            rows = conn.execute(
                "SELECT id FROM resources WHERE kind = 'dataset'"
                " AND expires_at IS NOT NULL AND expires_at <= ?",
                (now,),
            ).fetchall()
            expired = [r["id"] for r in rows]
            conn.execute(
                "UPDATE resources SET expired_flag = CASE WHEN expires_at IS NOT NULL"
                " AND expires_at <= ? THEN 1 ELSE 0 END WHERE kind = 'dataset'",
                (now,),
            )
            conn.execute(
                "INSERT INTO catalog_meta(key, value) VALUES('last_sweep_ms', ?)"
                " ON CONFLICT(key) DO UPDATE SET value = excluded.value",
                (str(now),),
            )
        return expired

    def _last_sweep(self, conn) -> int:
        row = conn.execute(
            "SELECT value FROM catalog_meta WHERE key = 'last_sweep_ms'"
        ).fetchone()
        return int(row["value"]) if row else 0


def _kdf(secret: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, PBKDF2_ITERATIONS)


def _kind_of(obj) -> str:
    return {Dataset: "dataset", Analytic: "analytic", Facility: "facility"}[type(obj)]


def _matches(obj, needle: str) -> bool:
    if needle in obj.name.lower() or needle in obj.description.lower():
        return True
    tags = getattr(obj, "tags", ())
    return any(needle in tag.lower() for tag in tags)


def _policy_from_row(row) -> AccessPolicy:
    return AccessPolicy(
        owner=row["owner"],
        visibility=row["visibility"],
        shared_with=tuple(json.loads(row["shared_with"])),
    )


def _from_row(row):
    kind = row["kind"]
    policy = _policy_from_row(row)
    if kind == "dataset":
        return Dataset(
            id=row["id"],
            name=row["name"],
            description=row["description"],
            tags=tuple(json.loads(row["tags"])),
            format_hint=row["format_hint"] or "",
            content_ref=row["content_ref"],
            size_bytes=row["size_bytes"],
            checksum=row["checksum"],
            collected_at=row["collected_at"],
            collection_method=row["collection_method"] or "",
            expires_at=row["expires_at"],
            expired_flag=bool(row["expired_flag"]),
            origin=row["origin"],
            policy=policy,
            version=row["version"],
            created_at=row["created_at"],
            updated_at=row["updated_at"],
        )
    if kind == "analytic":
        return Analytic(
            id=row["id"],
            name=row["name"],
            description=row["description"],
            tags=tuple(json.loads(row["tags"])),
            runtime_id=row["runtime_id"],
            artifact_ref=row["artifact_ref"],
            checksum=row["checksum"],
            default_params=json.loads(row["default_params"] or "{}"),
            policy=policy,
            version=row["version"],
            created_at=row["created_at"],
            updated_at=row["updated_at"],
        )
    return Facility(
        id=row["id"],
        name=row["name"],
        location_label=row["location_label"] or "",
        description=row["description"],
        image_ref=row["image_ref"],
        policy=policy,
        created_at=row["created_at"],
        updated_at=row["updated_at"],
    )
