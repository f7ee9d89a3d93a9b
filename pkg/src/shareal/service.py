"""Wires the modules into one service and runs the background loops.

The service owns two SQLite databases (catalog/jobs/scores/chat in one,
telemetry in the other, mirroring the static vs streaming split), the blob
store, the scheduler loop, and the expiration sweeper. Restarting a service
on the same data directory recovers everything durable; jobs that were
RUNNING when the process died come back as FAILED("interrupted").
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

from .catalog import Catalog, User
from .chat import ChatLog
from .config import ServiceConfig
from .errors import InvalidRange
from .executor import Cluster, ClusterConfig, RunnerRegistry
from .scoring import ScoreBoard
from .storage import BlobStore, Database
from .timeseries import TelemetryStore


class Service:
    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.blobs = BlobStore(config.data_dir / "blobs")
        self.db = Database(config.data_dir / "catalog.db")
        self.tsdb = Database(config.data_dir / "telemetry.db")

        self.catalog = Catalog(self.db, self.blobs)
        self.telemetry = TelemetryStore(self.tsdb)
        self.scores = ScoreBoard(self.db, self.catalog)
        self.chat = ChatLog(self.db)

        RunnerRegistry.ensure_default_file(config.runner_registry_path)
        registry = RunnerRegistry(config.runner_registry_path)
        self.cluster = Cluster(
            self.db,
            self.catalog,
            registry,
            ClusterConfig(
                slots=config.slots,
                default_timeout_ms=config.default_timeout_ms,
                workdir_root=config.data_dir / "jobs",
            ),
            score_sink=self.scores.record_score,
        )
        self.cluster.recover()
        self.catalog.ensure_admin(config.bootstrap_admin, config.bootstrap_secret)

        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    # ------------------------------------------------------- cross-module

    def extract_dataset(
        self, actor: User, source: str, channels, start: int, end: int, name: str
    ):
        """Materialize a telemetry window as a cataloged CSV dataset."""
        if start >= end:
            raise InvalidRange("window must satisfy from < to")
        text = self.telemetry.extract_csv(source, channels, start, end)
        return self.catalog.create_dataset(
            actor,
            name,
            text.encode("utf-8"),
            format_hint="csv",
            origin="extracted",
            collection_method=f"extracted from {source} [{start}, {end})",
        )

    def login(self, name: str, secret: str):
        return self.catalog.authenticate(name, secret, self.config.session_ttl_ms)

    # --------------------------------------------------------- lifecycle

    def start_background(self) -> None:
        if self._threads:
            return
        self._stop.clear()
        scheduler = threading.Thread(target=self._scheduler_loop, daemon=True, name="scheduler")
        sweeper = threading.Thread(target=self._sweeper_loop, daemon=True, name="sweeper")
        self._threads = [scheduler, sweeper]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=5)
        self._threads = []
        self.cluster.shutdown()

    def close(self) -> None:
        self.stop()
        self.db.close()
        self.tsdb.close()

    def _scheduler_loop(self) -> None:
        while not self._stop.wait(self.config.tick_interval_ms / 1000):
            try:
                self.cluster.tick()
            except Exception:
                logging.getLogger(__name__).exception("scheduler tick failed")

    def _sweeper_loop(self) -> None:
        self.catalog.sweep_expirations()
        while not self._stop.wait(self.config.sweep_interval_ms / 1000):
            try:
                self.catalog.sweep_expirations()
            except Exception:
                logging.getLogger(__name__).exception("expiration sweep failed")
