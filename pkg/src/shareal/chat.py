"""Team chat: rooms with densely sequenced, immutable message logs.

Sequence numbers are assigned inside a single write transaction, so the seqs
of a room are always exactly 1..N with no gaps regardless of how many clients
post concurrently. Subscriptions are pull generators over the persisted log:
they replay history from a starting seq and then block on a condition that
every successful post signals.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .catalog import User, now_ms
from .errors import BodyTooLarge, DuplicateName, EmptyBody, EmptyName, InvalidLimit, NotFound
from .storage import Database, new_id

MAX_BODY_BYTES = 8192
MAX_FETCH_LIMIT = 1000

_SCHEMA = """
CREATE TABLE IF NOT EXISTS rooms(
    id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    created_by TEXT NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS rooms_name_nocase ON rooms(name COLLATE NOCASE);

CREATE TABLE IF NOT EXISTS messages(
    room_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    author TEXT NOT NULL,
    ts INTEGER NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY(room_id, seq)
) WITHOUT ROWID;
"""


@dataclass(frozen=True)
class Room:
    id: str
    name: str
    created_by: str
    created_at: int


@dataclass(frozen=True)
class Message:
    room_id: str
    seq: int
    author: str
    ts: int
    body: str


class ChatLog:
    def __init__(self, db: Database, clock=now_ms):
        self.db = db
        self.clock = clock
        self.db.executescript(_SCHEMA)
        self._new_message = threading.Condition()

    def create_room(self, actor: User, name: str) -> Room:
        if not name or not name.strip():
            raise EmptyName("room name must be nonempty")
        room = Room(new_id(), name, actor.id, self.clock())
        with self.db.tx() as conn:
            dup = conn.execute(
                "SELECT 1 FROM rooms WHERE name = ? COLLATE NOCASE", (name,)
            ).fetchone()
            if dup:
                raise DuplicateName(f"room {name!r} already exists")
            conn.execute(
                "INSERT INTO rooms(id, name, created_by, created_at) VALUES(?,?,?,?)",
                (room.id, room.name, room.created_by, room.created_at),
            )
        return room

    def list_rooms(self) -> list[Room]:
        rows = self.db.query("SELECT * FROM rooms ORDER BY created_at, id")
        return [Room(r["id"], r["name"], r["created_by"], r["created_at"]) for r in rows]

    def get_room(self, room_id: str) -> Room:
        row = self.db.one("SELECT * FROM rooms WHERE id = ?", (room_id,))
        if row is None:
            raise NotFound(f"no room {room_id}")
        return Room(row["id"], row["name"], row["created_by"], row["created_at"])

    def post(self, actor: User, room_id: str, body: str) -> Message:
        if not body:
            raise EmptyBody("message body must be nonempty")
        if len(body.encode("utf-8")) > MAX_BODY_BYTES:
            raise BodyTooLarge(f"message body exceeds {MAX_BODY_BYTES} bytes")
        self.get_room(room_id)
        now = self.clock()
        with self.db.tx() as conn:
            row = conn.execute(
                "SELECT seq, ts FROM messages WHERE room_id = ?"
                " ORDER BY seq DESC LIMIT 1",
                (room_id,),
            ).fetchone()
            seq = (row["seq"] if row else 0) + 1
            ts = max(now, row["ts"]) if row else now  # non-decreasing within a room
            conn.execute(
                "INSERT INTO messages(room_id, seq, author, ts, body) VALUES(?,?,?,?,?)",
                (room_id, seq, actor.id, ts, body),
            )
        message = Message(room_id, seq, actor.id, ts, body)
        with self._new_message:
            self._new_message.notify_all()
        return message

    def fetch(self, room_id: str, since_seq: int = 0, limit: int = MAX_FETCH_LIMIT) -> list[Message]:
        if not 1 <= limit <= MAX_FETCH_LIMIT:
            raise InvalidLimit(f"limit must lie in [1, {MAX_FETCH_LIMIT}]")
        if since_seq < 0:
            raise InvalidLimit("since_seq must be >= 0")
        self.get_room(room_id)
        rows = self.db.query(
            "SELECT * FROM messages WHERE room_id = ? AND seq > ?"
            " ORDER BY seq ASC LIMIT ?",
            (room_id, since_seq, limit),
        )
        return [_message(r) for r in rows]

    def subscribe(
        self,
        room_id: str,
        from_seq: int = 1,
        poll_seconds: float = 0.5,
        idle_yield: bool = False,
    ):
        """Yield every message with seq >= from_seq exactly once, in order.

        Blocks waiting for new posts; the generator runs until the consumer
        closes it (client disconnect). With idle_yield the generator emits
        None after each quiet poll interval so transports can send keepalives
        and tear the stream down promptly.
        """
        self.get_room(room_id)
        last = max(from_seq, 1) - 1
        while True:
            batch = self.fetch(room_id, since_seq=last, limit=MAX_FETCH_LIMIT)
            if batch:
                for message in batch:
                    yield message
                    last = message.seq
                continue
            with self._new_message:
                self._new_message.wait(timeout=poll_seconds)
            if idle_yield:
                yield None

    def latest_seq(self, room_id: str) -> int:
        row = self.db.one(
            "SELECT MAX(seq) AS s FROM messages WHERE room_id = ?", (room_id,)
        )
        return row["s"] or 0


def _message(row) -> Message:
    return Message(row["room_id"], row["seq"], row["author"], row["ts"], row["body"])
