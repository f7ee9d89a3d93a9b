from __future__ import annotations

import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from shareal.config import ServiceConfig
from shareal.gateway import create_app
from shareal.service import Service


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def svc(tmp_path):
    service = Service(
        ServiceConfig(
            data_dir=tmp_path / "data",
            slots=2,
            tick_interval_ms=20,
            bootstrap_admin="admin",
            bootstrap_secret="adminpw",
        )
    )
    yield service
    service.close()


@pytest.fixture
def admin(svc):
    return svc.catalog.resolve_token(svc.login("admin", "adminpw").token)


@pytest.fixture
def analyst(svc, admin):
    return svc.catalog.register_user(admin, "lee", "analyst", "leepw")


@pytest.fixture
def client(svc):
    app = create_app(svc)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def login(client, name, secret) -> dict:
    r = client.post("/api/auth/login", json={"name": name, "secret": secret})
    assert r.status_code == 200, r.text
    return {"Authorization": f"Bearer {r.json()['token']}"}


@pytest.fixture
def admin_headers(client):
    return login(client, "admin", "adminpw")


@pytest.fixture
def live_server(svc):
    """A real uvicorn listener in a thread; required for endless streams."""
    svc.start_background()
    port = free_port()
    config = uvicorn.Config(
        create_app(svc), host="127.0.0.1", port=port, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise RuntimeError("uvicorn failed to start")
        time.sleep(0.01)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
