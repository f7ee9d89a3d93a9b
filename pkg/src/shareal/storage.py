"""SQLite and blob-store primitives shared by the service modules.

Metadata lives in ordinary SQLite files (WAL journal, immediate
transactions), so a crash at any instant leaves only whole transactions
behind. Content bytes live in a content-addressed directory keyed by their
SHA-256 digest; files are written to a temp name and renamed into place, so a
partially written blob is never reachable from committed metadata.
"""

from __future__ import annotations

import hashlib
import os
import sqlite3
import threading
import uuid
from contextlib import contextmanager
from pathlib import Path

CHUNK = 64 * 1024


def new_id() -> str:
    return uuid.uuid4().hex


class Database:
    """One SQLite file behind a re-entrant lock.

    The lock serializes writers (so versions and sequence numbers never
    collide) while the WAL journal keeps whole transactions atomic under
    kill -9.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(
            str(self.path), check_same_thread=False, isolation_level=None
        )
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute("PRAGMA busy_timeout=10000")

    @contextmanager
    def tx(self):
        """A serialized read-modify-write transaction."""
        with self._lock:
            self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield self._conn
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            else:
                self._conn.execute("COMMIT")

    def query(self, sql: str, args=()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, args).fetchall()

    def one(self, sql: str, args=()) -> sqlite3.Row | None:
        rows = self.query(sql, args)
        return rows[0] if rows else None

    def executescript(self, sql: str) -> None:
        with self._lock:
            self._conn.executescript(sql)

    def close(self) -> None:
        with self._lock:
            self._conn.close()


class BlobStore:
    """Content-addressed files under ``<root>/sha256/<hex digest>``."""

    def __init__(self, root: str | Path):
        self.root = Path(root) / "sha256"
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / digest

    def put(self, content: bytes | "os.PathLike | object") -> tuple[str, int]:
        """Store bytes or a binary stream; returns (hex digest, size)."""
        tmp = self.root / f".tmp-{uuid.uuid4().hex}"
        hasher = hashlib.sha256()
        size = 0
        try:
            with open(tmp, "wb") as out:
                if isinstance(content, (bytes, bytearray)):
                    hasher.update(content)
                    out.write(content)
                    size = len(content)
                else:
                    while True:
                        chunk = content.read(CHUNK)
                        if not chunk:
                            break
                        hasher.update(chunk)
                        out.write(chunk)
                        size += len(chunk)
                out.flush()
                os.fsync(out.fileno())
            digest = hasher.hexdigest()
            final = self._path(digest)
            if final.exists():
                tmp.unlink()
            else:
                os.replace(tmp, final)
            return digest, size
        except BaseException:
            tmp.unlink(missing_ok=True)
            raise

    def exists(self, digest: str) -> bool:
        return self._path(digest).is_file()

    def read(self, digest: str) -> bytes:
        return self._path(digest).read_bytes()

    def open(self, digest: str):
        return open(self._path(digest), "rb")

    def size(self, digest: str) -> int:
        return self._path(digest).stat().st_size


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
