"""Operator entry point: build the service and run the HTTP listener."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import uvicorn

from .config import ServiceConfig
from .errors import ApiError, ConfigInvalid
from .gateway import create_app
from .service import Service


def build_config(argv=None) -> ServiceConfig:
    parser = argparse.ArgumentParser(prog="shareal-server")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--data-dir", help="state directory (overrides config)")
    parser.add_argument("--host", help="listen address")
    parser.add_argument("--port", type=int, help="listen port")
    parser.add_argument("--slots", type=int, help="concurrent job slots")
    parser.add_argument("--static-dir", help="directory of web UI assets to serve at /")
    args = parser.parse_args(argv)

    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigInvalid(f"config file {args.config} does not exist")
        except ValueError as exc:
            raise ConfigInvalid(f"config file is not valid JSON: {exc}")
    if args.data_dir:
        raw["data_dir"] = args.data_dir
    if args.host:
        raw["listen_host"] = args.host
    if args.port:
        raw["listen_port"] = args.port
    if args.slots:
        raw["slots"] = args.slots
    if args.static_dir:
        raw["static_dir"] = args.static_dir
    if "data_dir" not in raw:
        parser.error("either --config or --data-dir is required")
    try:
        return ServiceConfig(**raw)
    except TypeError as exc:
        raise ConfigInvalid(f"bad config: {exc}")


def main(argv=None) -> int:
    try:
        config = build_config(argv)
        service = Service(config)
    except ApiError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 1
    app = create_app(service)
    service.start_background()
    try:
        uvicorn.run(
            app,
            host=config.listen_host,
            port=config.listen_port,
            log_level="warning",
            timeout_graceful_shutdown=5,
        )
    except OSError as exc:
        print(f"bind-failure: {exc}", file=sys.stderr)
        return 1
    finally:
        service.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
