"""Streaming telemetry: ingest, range/bucket queries, CSV extraction, synthesis.

Points are keyed by (source, channel, ts); re-ingesting a key overwrites the
stored value, so replaying a stream is idempotent. All windows are half-open
[from, to). The store is a separate SQLite file from the catalog so the
static and streaming sides stay independent.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import struct
from dataclasses import dataclass, field

from .errors import InvalidBucket, InvalidRange, InvalidSpec
from .storage import Database

AGGREGATIONS = ("mean", "min", "max", "last")
AGGREGATE_CHANNEL = "aggregate_w"

# values are stored as packed IEEE doubles: SQLite's REAL column would
# normalize -0.0 to 0.0, and the round-trip contract is bit-identity
_SCHEMA = """
CREATE TABLE IF NOT EXISTS points(
    source TEXT NOT NULL,
    channel TEXT NOT NULL,
    ts INTEGER NOT NULL,
    value BLOB NOT NULL,
    PRIMARY KEY(source, channel, ts)
) WITHOUT ROWID;
"""


@dataclass(frozen=True)
class TelemetryPoint:
    source: str
    channel: str
    ts: int
    value: float


@dataclass(frozen=True)
class IngestReport:
    accepted: int
    rejected: int


@dataclass(frozen=True)
class SeriesQuery:
    source: str
    channels: tuple[str, ...]
    start: int
    end: int
    bucket_ms: int | None = None
    agg: str | None = None

    def validate(self) -> None:
        if self.start >= self.end:
            raise InvalidRange("window must satisfy from < to")
        if not self.channels:
            raise InvalidRange("at least one channel required")
        if (self.bucket_ms is None) != (self.agg is None):
            raise InvalidBucket("bucket_ms and agg must be given together")
        if self.bucket_ms is not None and self.bucket_ms <= 0:
            raise InvalidBucket("bucket_ms must be positive")
        if self.agg is not None and self.agg not in AGGREGATIONS:
            raise InvalidBucket(f"agg must be one of {AGGREGATIONS}")


@dataclass(frozen=True)
class DeviceSpec:
    channel: str
    period_ms: int
    duty: float
    on_watts: float
    off_watts: float


@dataclass(frozen=True)
class SynthSpec:
    devices: tuple[DeviceSpec, ...]
    start: int
    end: int
    sample_ms: int
    seed: int
    noise_watts: float = 0.0
    source: str = "synth"


def coerce_point(obj) -> TelemetryPoint | None:
    """Validate one wire-format point; None when it must be rejected."""
    if not isinstance(obj, dict):
        return None
    source = obj.get("source")
    channel = obj.get("channel")
    ts = obj.get("ts")
    value = obj.get("value")
    if not isinstance(source, str) or not source:
        return None
    if not isinstance(channel, str) or not channel:
        return None
    if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    value = float(value)
    if not math.isfinite(value):
        return None
    return TelemetryPoint(source, channel, ts, value)


def parse_ndjson(body: bytes) -> tuple[list[TelemetryPoint], int]:
    """Decode newline-delimited JSON points; returns (valid points, rejected count)."""
    points: list[TelemetryPoint] = []
    rejected = 0
    for raw in body.splitlines():
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except (ValueError, UnicodeDecodeError):
            rejected += 1
            continue
        point = coerce_point(obj)
        if point is None:
            rejected += 1
        else:
            points.append(point)
    return points, rejected


class TelemetryStore:
    def __init__(self, db: Database):
        self.db = db
        self.db.executescript(_SCHEMA)

    def ingest_batch(self, points) -> IngestReport:
        accepted = 0
        rejected = 0
        rows = []
        for p in points:
            if isinstance(p, TelemetryPoint):
                coerced = coerce_point(
                    {"source": p.source, "channel": p.channel, "ts": p.ts, "value": p.value}
                )
            else:
                coerced = coerce_point(p)
            if coerced is None:
                rejected += 1
                continue
            rows.append(
                (coerced.source, coerced.channel, coerced.ts, struct.pack("<d", coerced.value))
            )
            accepted += 1
        with self.db.tx() as conn:
            conn.executemany(
                "INSERT INTO points(source, channel, ts, value) VALUES(?,?,?,?)"
                " ON CONFLICT(source, channel, ts) DO UPDATE SET value = excluded.value",
                rows,
            )
        return IngestReport(accepted=accepted, rejected=rejected)

    def query_range(self, q: SeriesQuery) -> dict[str, list[tuple[int, float]]]:
        q.validate()
        out: dict[str, list[tuple[int, float]]] = {}
        for channel in q.channels:
            rows = self.db.query(
                "SELECT ts, value FROM points WHERE source = ? AND channel = ?"
                " AND ts >= ? AND ts < ? ORDER BY ts ASC",
                (q.source, channel, q.start, q.end),
            )
            raw = [(row["ts"], struct.unpack("<d", row["value"])[0]) for row in rows]
            if q.bucket_ms is None:
                out[channel] = raw
            else:
                out[channel] = _bucketize(raw, q.start, q.bucket_ms, q.agg)
        return out

    def extract_csv(self, source: str, channels, start: int, end: int) -> str:
        """Raw rows for the window as CSV, sorted by (ts, channel)."""
        q = SeriesQuery(source=source, channels=tuple(channels), start=start, end=end)
        series = self.query_range(q)
        rows = []
        for channel, pts in series.items():
            rows.extend((ts, channel, value) for ts, value in pts)
        rows.sort(key=lambda r: (r[0], r[1]))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "channel", "ts", "value"])
        for ts, channel, value in rows:
            writer.writerow([source, channel, ts, value])
        return buf.getvalue()


def _bucketize(raw, start: int, bucket_ms: int, agg: str) -> list[tuple[int, float]]:
    buckets: dict[int, list[float]] = {}
    for ts, value in raw:
        k = (ts - start) // bucket_ms
        buckets.setdefault(k, []).append(value)
    out = []
    for k in sorted(buckets):
        values = buckets[k]
        if agg == "mean":
            v = sum(values) / len(values)
        elif agg == "min":
            v = min(values)
        elif agg == "max":
            v = max(values)
        else:  # last: raw is ts-ascending, so the final value is the latest
            v = values[-1]
        out.append((start + k * bucket_ms, v))
    return out


def synth_nilm(spec: SynthSpec) -> list[TelemetryPoint]:
    """Square-wave per-device power plus an aggregate channel.

    Each device is on for the first duty fraction of every period and off for
    the rest; uniform noise in [-noise, +noise] is added per device sample.
    The aggregate channel is the sum of the (noised) device samples at each
    timestamp. Deterministic for a fixed seed.
    """
    _validate_synth(spec)
    rng = random.Random(spec.seed)
    points: list[TelemetryPoint] = []
    for ts in range(spec.start, spec.end, spec.sample_ms):
        total = 0.0
        for dev in spec.devices:
            phase = (ts - spec.start) % dev.period_ms
            base = dev.on_watts if phase < dev.duty * dev.period_ms else dev.off_watts
            value = base + rng.uniform(-spec.noise_watts, spec.noise_watts)
            points.append(TelemetryPoint(spec.source, dev.channel, ts, value))
            total += value
        points.append(TelemetryPoint(spec.source, AGGREGATE_CHANNEL, ts, total))
    return points


def _validate_synth(spec: SynthSpec) -> None:
    if not spec.devices:
        raise InvalidSpec("at least one device required")
    if spec.start >= spec.end:
        raise InvalidSpec("span must satisfy from < to")
    if spec.sample_ms <= 0:
        raise InvalidSpec("sample_ms must be positive")
    if (spec.end - spec.start) % spec.sample_ms != 0:
        raise InvalidSpec("sample_ms must divide the span evenly")
    if spec.noise_watts < 0:
        raise InvalidSpec("noise_watts must be >= 0")
    if not spec.source:
        raise InvalidSpec("source must be nonempty")
    seen = set()
    for dev in spec.devices:
        if not dev.channel or dev.channel == AGGREGATE_CHANNEL:
            raise InvalidSpec("device channels must be nonempty and not the aggregate")
        if dev.channel in seen:
            raise InvalidSpec(f"duplicate device channel {dev.channel!r}")
        seen.add(dev.channel)
        if dev.period_ms <= 0:
            raise InvalidSpec("period_ms must be positive")
        if not 0.0 <= dev.duty <= 1.0:
            raise InvalidSpec("duty must lie in [0, 1]")
