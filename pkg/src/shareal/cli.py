"""Thin command-line client for the HTTP API.

Reads the server URL from SHAREAL_URL and the bearer token from
SHAREAL_TOKEN; every subcommand except ``login`` and ``synth`` is a direct
API call with JSON output.
"""

from __future__ import annotations

import json
import os
import sys

import click
import httpx

from .timeseries import DeviceSpec, SynthSpec, synth_nilm

DEFAULT_URL = "http://127.0.0.1:8080"


class Api:
    def __init__(self, url: str, token: str | None):
        self.url = url.rstrip("/")
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.http = httpx.Client(base_url=self.url, headers=headers, timeout=30.0)

    def request(self, method: str, path: str, **kwargs):
        response = self.http.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                err = response.json()
                message = f"{err.get('code')}: {err.get('message')}"
            except ValueError:
                message = response.text
            raise click.ClickException(message)
        return response

    def json(self, method: str, path: str, **kwargs):
        return self.request(method, path, **kwargs).json()


pass_api = click.make_pass_decorator(Api)


def _emit(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@click.group()
@click.option("--url", envvar="SHAREAL_URL", default=DEFAULT_URL, show_default=True)
@click.option("--token", envvar="SHAREAL_TOKEN", default=None)
@click.pass_context
def main(ctx, url, token):
    """Client for a running shareal service."""
    ctx.obj = Api(url, token)


@main.command()
@click.option("--name", required=True)
@click.option("--secret", required=True)
@pass_api
def login(api: Api, name, secret):
    """Authenticate; prints the bearer token for SHAREAL_TOKEN."""
    out = api.json("POST", "/api/auth/login", json={"name": name, "secret": secret})
    click.echo(out["token"])


# ------------------------------------------------------------------ datasets


@main.group()
def dataset():
    """Manage datasets."""


@dataset.command("upload")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", required=True)
@click.option("--description", default="")
@click.option("--tag", "tags", multiple=True)
@click.option("--format", "format_hint", default="")
@click.option("--collected-at", type=int, default=None)
@click.option("--collection-method", default="")
@click.option("--expires-at", type=int, default=None)
@pass_api
def dataset_upload(api: Api, file, name, description, tags, format_hint, collected_at,
                   collection_method, expires_at):
    meta = {
        "name": name,
        "description": description,
        "tags": list(tags),
        "format_hint": format_hint,
        "collected_at": collected_at,
        "collection_method": collection_method,
        "expires_at": expires_at,
    }
    with open(file, "rb") as fh:
        out = api.json(
            "POST",
            "/api/datasets",
            data={"meta": json.dumps(meta)},
            files={"content": (os.path.basename(file), fh)},
        )
    _emit(out)


@dataset.command("list")
@pass_api
def dataset_list(api: Api):
    _emit(api.json("GET", "/api/datasets"))


@dataset.command("search")
@click.argument("query")
@pass_api
def dataset_search(api: Api, query):
    _emit(api.json("GET", "/api/datasets", params={"q": query}))


@dataset.command("share")
@click.argument("dataset_id")
@click.option("--visibility", type=click.Choice(["private", "shared", "public"]), required=True)
@click.option("--with", "members", multiple=True, help="user id; repeatable")
@pass_api
def dataset_share(api: Api, dataset_id, visibility, members):
    body = {"visibility": visibility, "shared_with": list(members)}
    _emit(api.json("PUT", f"/api/datasets/{dataset_id}/policy", json=body))


@dataset.command("get")
@click.argument("dataset_id")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
@pass_api
def dataset_get(api: Api, dataset_id, output):
    response = api.request("GET", f"/api/datasets/{dataset_id}/content")
    if output:
        with open(output, "wb") as fh:
            fh.write(response.content)
        click.echo(f"wrote {len(response.content)} bytes to {output}")
    else:
        sys.stdout.buffer.write(response.content)


# ----------------------------------------------------------------- analytics


@main.group()
def analytic():
    """Manage analytics."""


@analytic.command("upload")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", required=True)
@click.option("--runtime", "runtime_id", required=True)
@click.option("--description", default="")
@click.option("--tag", "tags", multiple=True)
@click.option("--params", "default_params", default="{}", help="default params JSON")
@pass_api
def analytic_upload(api: Api, file, name, runtime_id, description, tags, default_params):
    meta = {
        "name": name,
        "runtime_id": runtime_id,
        "description": description,
        "tags": list(tags),
        "default_params": json.loads(default_params),
    }
    with open(file, "rb") as fh:
        out = api.json(
            "POST",
            "/api/analytics",
            data={"meta": json.dumps(meta)},
            files={"content": (os.path.basename(file), fh)},
        )
    _emit(out)


@analytic.command("list")
@pass_api
def analytic_list(api: Api):
    _emit(api.json("GET", "/api/analytics"))


@analytic.command("share")
@click.argument("analytic_id")
@click.option("--visibility", type=click.Choice(["private", "shared", "public"]), required=True)
@click.option("--with", "members", multiple=True, help="user id; repeatable")
@pass_api
def analytic_share(api: Api, analytic_id, visibility, members):
    body = {"visibility": visibility, "shared_with": list(members)}
    _emit(api.json("PUT", f"/api/analytics/{analytic_id}/policy", json=body))


# ----------------------------------------------------------------- telemetry


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@pass_api
def ingest(api: Api, file):
    """Send an NDJSON file of telemetry points."""
    with open(file, "rb") as fh:
        _emit(api.json("POST", "/api/ingest", content=fh.read()))


@main.command()
@click.option("--source", required=True)
@click.option("--channel", "channels", multiple=True, required=True)
@click.option("--from", "start", type=int, required=True)
@click.option("--to", "end", type=int, required=True)
@click.option("--name", required=True)
@pass_api
def extract(api: Api, source, channels, start, end, name):
    """Materialize a telemetry window as a CSV dataset."""
    body = {"source": source, "channels": list(channels), "from": start, "to": end, "name": name}
    _emit(api.json("POST", "/api/series/extract", json=body))


@main.command()
@click.option("--device", "devices", multiple=True, required=True,
              help="channel:period_ms:duty:on_watts:off_watts; repeatable")
@click.option("--from", "start", type=int, required=True)
@click.option("--to", "end", type=int, required=True)
@click.option("--sample-ms", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise-watts", type=float, default=0.0, show_default=True)
@click.option("--source", default="synth", show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None,
              help="NDJSON file (default stdout)")
def synth(devices, start, end, sample_ms, seed, noise_watts, source, output):
    """Generate synthetic per-device power telemetry locally."""
    parsed = []
    for text in devices:
        parts = text.split(":")
        if len(parts) != 5:
            raise click.ClickException(f"bad --device {text!r}; expected 5 ':'-separated fields")
        parsed.append(
            DeviceSpec(
                channel=parts[0],
                period_ms=int(parts[1]),
                duty=float(parts[2]),
                on_watts=float(parts[3]),
                off_watts=float(parts[4]),
            )
        )
    spec = SynthSpec(
        devices=tuple(parsed),
        start=start,
        end=end,
        sample_ms=sample_ms,
        seed=seed,
        noise_watts=noise_watts,
        source=source,
    )
    points = synth_nilm(spec)
    lines = (
        json.dumps({"source": p.source, "channel": p.channel, "ts": p.ts, "value": p.value})
        for p in points
    )
    if output:
        with open(output, "w") as fh:
            for line in lines:
                fh.write(line + "\n")
        click.echo(f"wrote {len(points)} points to {output}", err=True)
    else:
        for line in lines:
            click.echo(line)


# ---------------------------------------------------------------------- jobs


@main.group()
def job():
    """Run and inspect cluster jobs."""


@job.command("submit")
@click.option("--analytic", "analytic_id", required=True)
@click.option("--dataset", "dataset_id", required=True)
@click.option("--params", default="{}", help="params JSON")
@click.option("--timeout-ms", type=int, default=None)
@pass_api
def job_submit(api: Api, analytic_id, dataset_id, params, timeout_ms):
    body = {
        "analytic_id": analytic_id,
        "dataset_id": dataset_id,
        "params": json.loads(params),
        "timeout_ms": timeout_ms,
    }
    _emit(api.json("POST", "/api/jobs", json=body))


@job.command("status")
@click.argument("job_id", type=int)
@pass_api
def job_status(api: Api, job_id):
    _emit(api.json("GET", f"/api/jobs/{job_id}"))


@job.command("log")
@click.argument("job_id", type=int)
@pass_api
def job_log(api: Api, job_id):
    click.echo(api.request("GET", f"/api/jobs/{job_id}/log").text, nl=False)


@job.command("cancel")
@click.argument("job_id", type=int)
@pass_api
def job_cancel(api: Api, job_id):
    _emit(api.json("DELETE", f"/api/jobs/{job_id}"))


@job.command("list")
@click.option("--state", default=None)
@click.option("--mine", is_flag=True, default=False)
@pass_api
def job_list(api: Api, state, mine):
    params = {}
    if state:
        params["state"] = state
    if mine:
        params["mine"] = "true"
    _emit(api.json("GET", "/api/jobs", params=params))


# ----------------------------------------------------------------- facilities


@main.group()
def facility():
    """Facility dashboards and metrics."""


@facility.command("create")
@click.option("--name", required=True)
@click.option("--location", "location_label", default="")
@click.option("--description", default="")
@pass_api
def facility_create(api: Api, name, location_label, description):
    body = {"name": name, "location_label": location_label, "description": description}
    _emit(api.json("POST", "/api/facilities", json=body))


@facility.command("list")
@pass_api
def facility_list(api: Api):
    _emit(api.json("GET", "/api/facilities"))


@facility.command("metric-add")
@click.argument("facility_id")
@click.option("--analytic", "analytic_id", required=True)
@click.option("--label", required=True)
@click.option("--weight", type=float, default=1.0, show_default=True)
@pass_api
def facility_metric_add(api: Api, facility_id, analytic_id, label, weight):
    body = {"analytic_id": analytic_id, "label": label, "weight": weight}
    _emit(api.json("POST", f"/api/facilities/{facility_id}/metrics", json=body))


@facility.command("score")
@click.argument("facility_id")
@click.option("--at", type=int, default=None)
@pass_api
def facility_score(api: Api, facility_id, at):
    params = {"at": at} if at is not None else {}
    _emit(api.json("GET", f"/api/facilities/{facility_id}/score", params=params))


@facility.command("history")
@click.argument("facility_id")
@click.option("--from", "start", type=int, required=True)
@click.option("--to", "end", type=int, required=True)
@click.option("--csv", is_flag=True, default=False)
@pass_api
def facility_history(api: Api, facility_id, start, end, csv):
    params = {"from": start, "to": end}
    if csv:
        params["format"] = "csv"
        click.echo(
            api.request("GET", f"/api/facilities/{facility_id}/history", params=params).text,
            nl=False,
        )
    else:
        _emit(api.json("GET", f"/api/facilities/{facility_id}/history", params=params))


# ---------------------------------------------------------------------- chat


@main.group()
def chat():
    """Team chat."""


@chat.command("rooms")
@click.option("--create", "create_name", default=None, help="create a room with this name")
@pass_api
def chat_rooms(api: Api, create_name):
    if create_name:
        _emit(api.json("POST", "/api/rooms", json={"name": create_name}))
    else:
        _emit(api.json("GET", "/api/rooms"))


@chat.command("post")
@click.argument("room_id")
@click.argument("body")
@pass_api
def chat_post(api: Api, room_id, body):
    _emit(api.json("POST", f"/api/rooms/{room_id}/messages", json={"body": body}))


@chat.command("tail")
@click.argument("room_id")
@click.option("--from-seq", type=int, default=1, show_default=True)
@pass_api
def chat_tail(api: Api, room_id, from_seq):
    """Follow a room's message stream; Ctrl-C to stop."""
    with api.http.stream(
        "GET", f"/api/rooms/{room_id}/stream", params={"from_seq": from_seq}, timeout=None
    ) as response:
        if response.status_code >= 400:
            raise click.ClickException(f"stream failed: {response.status_code}")
        for line in response.iter_lines():
            if line:
                click.echo(line)


if __name__ == "__main__":
    main()
