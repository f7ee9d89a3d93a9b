// Integration suite against a real server subprocess. Covers the three UI
// acceptance checks: dashboard fixture displaying 70, the job console driving
// an rt-echo job to SUCCEEDED, and lossless chat stream resume after a
// forced disconnect.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient, type ChatMessage } from "../src/api.js";
import { ChatFeed, liveConnect } from "../src/chat.js";
import { buildDashboard, renderDashboard } from "../src/dashboard.js";
import { runAnalysisFlow } from "../src/jobs.js";

let proc: ChildProcess;
let base: string;
const api = new ApiClient("");

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "shareal-ui-"));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const config = join(dir, "server.json");
  writeFileSync(
    config,
    JSON.stringify({
      data_dir: join(dir, "data"),
      listen_port: port,
      slots: 2,
      tick_interval_ms: 25,
      bootstrap_secret: "adminpw",
    }),
  );
  proc = spawn("python3", ["-m", "shareal.server", "--config", config], {
    stdio: "ignore",
  });
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const r = await fetch(`${base}/api/health`);
      if (r.ok) break;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  (api as { baseUrl: string }).baseUrl = base;
  await api.login("admin", "adminpw");
}, 60_000);

afterAll(() => {
  proc?.kill("SIGTERM");
});

async function uploadEcho(name: string, score: number) {
  return api.uploadAnalytic(
    { name, runtime_id: "rt-echo", default_params: { score } },
    new Blob([new TextEncoder().encode("echo artifact")]),
    name,
  );
}

describe("web ui against a live server", () => {
  it("job console drives an rt-echo job to SUCCEEDED and the dashboard shows 70", async () => {
    const dataset = await api.uploadDataset(
      { name: "ui-ds", format_hint: "csv" },
      new Blob([new TextEncoder().encode("a\n1\n")]),
      "ui-ds.csv",
    );
    const heavy = await uploadEcho("ui-heavy", 90);
    const light = await uploadEcho("ui-light", 30);
    const facility = await api.createFacility("UI Site");
    await api.attachMetric(facility.id, heavy.id, "heavy", 2);
    await api.attachMetric(facility.id, light.id, "light", 1);

    const states: string[] = [];
    const job1 = await runAnalysisFlow(api, heavy.id, dataset.id, {}, {
      pollMs: 50,
      onUpdate: (j) => states.push(j.state),
    });
    expect(job1.state).toBe("SUCCEEDED");
    expect(states[0]).toBe("QUEUED");
    const job2 = await runAnalysisFlow(api, light.id, dataset.id, {}, { pollMs: 50 });
    expect(job2.state).toBe("SUCCEEDED");
    expect(await api.jobResult(job1.id)).toEqual({ score: 90 });

    const fresh = await api.getFacility(facility.id);
    const score = await api.score(facility.id);
    const history = await api.history(facility.id, 0, Date.now() + 1000);
    expect(score.value).toBe(70); // (2*90 + 1*30) / 3, computed by the server
    const html = renderDashboard(buildDashboard(fresh, score, history));
    expect(html).toContain('data-testid="composite">70<');
    expect(html).toContain("heavy");
  }, 60_000);

  it("chat stream resumes with no gaps after a forced disconnect", async () => {
    const room = await api.createRoom("ui-room");
    for (let i = 1; i <= 3; i++) await api.postMessage(room.id, `pre-${i}`);

    const received: ChatMessage[] = [];
    const done = new AbortController();
    let dropped = false;
    let innerAbort: AbortController | null = null;

    // wrap the live connection so the first one is killed mid-stream
    const connect = (fromSeq: number, signal: AbortSignal) => {
      innerAbort = new AbortController();
      const inner = innerAbort;
      signal.addEventListener("abort", () => inner.abort());
      return liveConnect(api, room.id)(fromSeq, inner.signal);
    };

    const total = 8;
    const feed = new ChatFeed(connect, (m) => {
      received.push(m);
      if (!dropped && received.length === 2) {
        dropped = true;
        innerAbort!.abort(); // forced disconnect mid-stream
      }
      if (received.length === total) done.abort();
    }, { retryMs: 25 });
    const running = feed.run(1, done.signal);

    for (let i = 4; i <= total; i++) {
      await api.postMessage(room.id, `live-${i}`);
      await new Promise((r) => setTimeout(r, 30));
    }
    await running;

    expect(dropped).toBe(true);
    expect(received.map((m) => m.seq)).toEqual(
      Array.from({ length: total }, (_, i) => i + 1),
    );
  }, 60_000);
});
