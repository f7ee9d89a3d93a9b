// Single-page UI over the gateway API: login, facility dashboards, data
// browser, job console, telemetry chart, and chat. One state store, hash
// routing, no framework.

import { ApiClient, ApiError, Facility, Job, User } from "./api.js";
import { ChatFeed, liveConnect } from "./chat.js";
import { lineChartSvg } from "./charts.js";
import {
  DEFAULT_ALERT_THRESHOLD,
  buildDashboard,
  escapeHtml,
  renderDashboard,
} from "./dashboard.js";
import { renderJobRow, runAnalysisFlow } from "./jobs.js";

const api = new ApiClient("");

interface AppState {
  user: User | null;
  route: string;
  chatAbort: AbortController | null;
}

const state: AppState = { user: null, route: "#/facilities", chatAbort: null };

function $(selector: string): HTMLElement {
  const el = document.querySelector(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el as HTMLElement;
}

function threshold(): number {
  const raw = localStorage.getItem("shareal.threshold");
  return raw ? Number(raw) : DEFAULT_ALERT_THRESHOLD;
}

function flash(message: string, isError = false): void {
  const bar = $("#flash");
  bar.textContent = message;
  bar.className = isError ? "flash error" : "flash";
  bar.hidden = false;
  setTimeout(() => (bar.hidden = true), 4000);
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    return await work();
  } catch (err) {
    if (err instanceof ApiError) {
      if (err.code === "unauthorized") {
        sessionStorage.removeItem("shareal.token");
        location.hash = "#/login";
      }
      flash(`${err.code}: ${err.message}`, true);
    } else {
      flash(String(err), true);
    }
    return undefined;
  }
}

// ---------------------------------------------------------------- views

function renderLogin(): void {
  stopChat();
  $("#app").innerHTML = `
  <section class="login card">
    <h2>Sign in</h2>
    <form id="login-form">
      <label>Name <input name="name" autocomplete="username" required></label>
      <label>Secret <input name="secret" type="password" autocomplete="current-password" required></label>
      <button type="submit">Log in</button>
    </form>
  </section>`;
  $("#login-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const ok = await guard(async () => {
      await api.login(String(data.get("name")), String(data.get("secret")));
      sessionStorage.setItem("shareal.token", api.token!);
      state.user = await api.me();
      return true;
    });
    if (ok) {
      location.hash = "#/facilities";
    }
  });
}

async function renderFacilities(): Promise<void> {
  const facilities = await guard(() => api.listFacilities());
  if (!facilities) return;
  const rows = facilities
    .map(
      (f) => `
    <tr>
      <td><a href="#/facility/${f.id}">${escapeHtml(f.name)}</a></td>
      <td>${escapeHtml(f.location_label)}</td>
      <td class="num">${f.metrics.length}</td>
    </tr>`,
    )
    .join("");
  $("#app").innerHTML = `
  <section>
    <h2>Facilities</h2>
    <table class="list">
      <thead><tr><th>name</th><th>location</th><th>metrics</th></tr></thead>
      <tbody>${rows || '<tr><td colspan="3" class="placeholder">none yet</td></tr>'}</tbody>
    </table>
    <form id="facility-create" class="inline-form">
      <input name="name" placeholder="facility name" required>
      <input name="location" placeholder="location">
      <button type="submit">Create facility</button>
    </form>
  </section>`;
  $("#facility-create").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const created = await guard(() =>
      api.createFacility(String(data.get("name")), String(data.get("location") ?? "")),
    );
    if (created) location.hash = `#/facility/${created.id}`;
  });
}

async function renderFacility(id: string): Promise<void> {
  const loaded = await guard(async () => {
    const facility = await api.getFacility(id);
    const score = await api.score(id);
    const history = await api.history(id, 0, Date.now() + 1);
    return { facility, score, history };
  });
  if (!loaded) return;
  const vm = buildDashboard(loaded.facility, loaded.score, loaded.history, threshold());
  const analytics = (await guard(() => api.listAnalytics())) ?? [];
  const options = analytics
    .map((a) => `<option value="${a.id}">${escapeHtml(a.name)}</option>`)
    .join("");
  $("#app").innerHTML = `
  ${renderDashboard(vm)}
  <section class="card">
    <h3>Attach metric</h3>
    <form id="metric-add" class="inline-form">
      <select name="analytic" required>${options}</select>
      <input name="label" placeholder="label" required>
      <input name="weight" type="number" step="any" min="0" value="1" required>
      <button type="submit">Attach</button>
    </form>
    <label class="inline-form">Alert threshold
      <input id="threshold" type="number" min="0" max="100" value="${vm.threshold}">
    </label>
  </section>`;
  $("#metric-add").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const ok = await guard(() =>
      api.attachMetric(
        id,
        String(data.get("analytic")),
        String(data.get("label")),
        Number(data.get("weight")),
      ),
    );
    if (ok) renderFacility(id);
  });
  $("#threshold").addEventListener("change", (ev) => {
    localStorage.setItem("shareal.threshold", (ev.target as HTMLInputElement).value);
    renderFacility(id);
  });
}

async function renderData(): Promise<void> {
  const [datasets, analytics] = await Promise.all([
    guard(() => api.listDatasets()),
    guard(() => api.listAnalytics()),
  ]);
  if (!datasets || !analytics) return;
  const dsRows = datasets
    .map(
      (d) => `
    <tr>
      <td>${escapeHtml(d.name)}</td>
      <td class="num">${d.size_bytes}</td>
      <td>${d.policy.visibility}</td>
      <td>${d.origin}${d.expired_flag ? " · expired" : ""}</td>
      <td><a href="/api/datasets/${d.id}/content" download>download</a></td>
    </tr>`,
    )
    .join("");
  const anRows = analytics
    .map(
      (a) => `
    <tr><td>${escapeHtml(a.name)}</td><td>${a.runtime_id}</td><td>${a.policy.visibility}</td></tr>`,
    )
    .join("");
  $("#app").innerHTML = `
  <section class="two-col">
    <div class="card">
      <h3>Datasets</h3>
      <table class="list"><thead><tr><th>name</th><th>bytes</th><th>visibility</th><th>origin</th><th></th></tr></thead>
      <tbody>${dsRows || '<tr><td colspan="5" class="placeholder">none</td></tr>'}</tbody></table>
      <form id="ds-upload" class="inline-form">
        <input name="name" placeholder="name" required>
        <input name="file" type="file" required>
        <button type="submit">Upload dataset</button>
      </form>
    </div>
    <div class="card">
      <h3>Analytics</h3>
      <table class="list"><thead><tr><th>name</th><th>runtime</th><th>visibility</th></tr></thead>
      <tbody>${anRows || '<tr><td colspan="3" class="placeholder">none</td></tr>'}</tbody></table>
      <form id="an-upload" class="inline-form">
        <input name="name" placeholder="name" required>
        <input name="runtime" placeholder="runtime (e.g. bash)" required>
        <input name="file" type="file" required>
        <button type="submit">Upload analytic</button>
      </form>
    </div>
  </section>`;
  $("#ds-upload").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const file = (form.elements.namedItem("file") as HTMLInputElement).files?.[0];
    if (!file) return;
    const name = String(new FormData(form).get("name"));
    if (await guard(() => api.uploadDataset({ name }, file, file.name))) renderData();
  });
  $("#an-upload").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const file = (form.elements.namedItem("file") as HTMLInputElement).files?.[0];
    if (!file) return;
    const data = new FormData(form);
    const meta = { name: String(data.get("name")), runtime_id: String(data.get("runtime")) };
    if (await guard(() => api.uploadAnalytic(meta, file, file.name))) renderData();
  });
}

async function renderJobs(): Promise<void> {
  const [jobs, datasets, analytics] = await Promise.all([
    guard(() => api.listJobs()),
    guard(() => api.listDatasets()),
    guard(() => api.listAnalytics()),
  ]);
  if (!jobs || !datasets || !analytics) return;
  const anOptions = analytics
    .map((a) => `<option value="${a.id}">${escapeHtml(a.name)}</option>`)
    .join("");
  const dsOptions = datasets
    .map((d) => `<option value="${d.id}">${escapeHtml(d.name)}</option>`)
    .join("");
  $("#app").innerHTML = `
  <section>
    <h2>Jobs</h2>
    <form id="job-submit" class="inline-form">
      <select name="analytic" required>${anOptions}</select>
      <select name="dataset" required>${dsOptions}</select>
      <input name="params" placeholder='params JSON, e.g. {"k":1}' value="{}">
      <button type="submit">Run analysis</button>
    </form>
    <table class="list"><thead><tr><th>id</th><th>state</th><th>submitted</th><th></th></tr></thead>
    <tbody id="job-rows">${jobs.map(renderJobRow).join("")}</tbody></table>
    <pre id="job-detail" class="card" hidden></pre>
  </section>`;
  $("#job-submit").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    let params: Record<string, unknown>;
    try {
      params = JSON.parse(String(data.get("params") || "{}"));
    } catch {
      flash("params must be JSON", true);
      return;
    }
    await guard(() =>
      runAnalysisFlow(api, String(data.get("analytic")), String(data.get("dataset")), params, {
        pollMs: 1000,
        onUpdate: () => renderJobsTable(),
      }),
    );
    renderJobsTable();
  });
  $("#job-rows").addEventListener("click", onJobAction);
}

async function renderJobsTable(): Promise<void> {
  const jobs = await guard(() => api.listJobs());
  const tbody = document.querySelector("#job-rows");
  if (jobs && tbody) tbody.innerHTML = jobs.map(renderJobRow).join("");
}

async function onJobAction(ev: Event): Promise<void> {
  const target = ev.target as HTMLElement;
  const action = target.dataset.action;
  if (!action) return;
  const jobId = Number(target.dataset.job);
  if (action === "job-cancel") {
    await guard(() => api.cancelJob(jobId));
    renderJobsTable();
  } else if (action === "job-detail") {
    const detail = await guard(async () => {
      const job = await api.getJob(jobId);
      const log = job.log_ref ? await api.jobLog(jobId) : "";
      let result = "";
      if (job.result_ref) result = JSON.stringify(await api.jobResult(jobId), null, 2);
      return { job, log, result };
    });
    if (!detail) return;
    const pre = $("#job-detail");
    pre.hidden = false;
    pre.textContent = `state: ${detail.job.state}${detail.job.reason ? ` (${detail.job.reason})` : ""}\n\nresult:\n${detail.result || "(none)"}\n\nlog:\n${detail.log || "(empty)"}`;
  }
}

async function renderTelemetry(): Promise<void> {
  $("#app").innerHTML = `
  <section class="card">
    <h2>Streaming telemetry</h2>
    <form id="series-form" class="inline-form">
      <input name="source" placeholder="source" required>
      <input name="channel" placeholder="channel" required>
      <input name="minutes" type="number" value="60" min="1"> minutes back
      <button type="submit">Plot</button>
    </form>
    <div id="series-chart"></div>
  </section>`;
  $("#series-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    const to = Date.now();
    const from = to - Number(data.get("minutes")) * 60_000;
    const bucket = Math.max(1000, Math.floor((to - from) / 200));
    const out = await guard(() =>
      api.series(String(data.get("source")), [String(data.get("channel"))], from, to, bucket, "mean"),
    );
    if (out) {
      const points = out.series[String(data.get("channel"))] ?? [];
      $("#series-chart").innerHTML = lineChartSvg(points);
    }
  });
}

async function renderChat(): Promise<void> {
  stopChat();
  const rooms = await guard(() => api.listRooms());
  if (!rooms) return;
  const options = rooms
    .map((r) => `<option value="${r.id}">${escapeHtml(r.name)}</option>`)
    .join("");
  $("#app").innerHTML = `
  <section class="chat card">
    <h2>Chat</h2>
    <form id="room-pick" class="inline-form">
      <select name="room">${options}</select>
      <button type="submit">Open</button>
      <input name="new-room" placeholder="new room name">
      <button type="button" id="room-create">Create</button>
    </form>
    <ul id="chat-log" class="chat-log"></ul>
    <form id="chat-compose" class="inline-form" hidden>
      <input name="body" placeholder="message" required autocomplete="off">
      <button type="submit">Send</button>
    </form>
  </section>`;
  $("#room-pick").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const roomId = String(new FormData(ev.target as HTMLFormElement).get("room"));
    if (roomId) openRoom(roomId);
  });
  $("#room-create").addEventListener("click", async () => {
    const input = document.querySelector('input[name="new-room"]') as HTMLInputElement;
    if (!input.value) return;
    const created = await guard(() => api.createRoom(input.value));
    if (created) renderChat();
  });
}

function stopChat(): void {
  state.chatAbort?.abort();
  state.chatAbort = null;
}

async function openRoom(roomId: string): Promise<void> {
  stopChat();
  const log = $("#chat-log");
  log.innerHTML = "";
  const compose = $("#chat-compose") as HTMLFormElement;
  compose.hidden = false;
  compose.onsubmit = async (ev) => {
    ev.preventDefault();
    const input = compose.elements.namedItem("body") as HTMLInputElement;
    const body = input.value;
    if (!body) return;
    // local echo only after the server acks with the assigned seq
    const ok = await guard(() => api.postMessage(roomId, body));
    if (ok) input.value = "";
  };

  state.chatAbort = new AbortController();
  const feed = new ChatFeed(liveConnect(api, roomId), (m) => {
    const li = document.createElement("li");
    li.dataset.seq = String(m.seq);
    li.innerHTML = `<span class="muted">#${m.seq}</span> ${escapeHtml(m.body)}`;
    log.appendChild(li);
    log.scrollTop = log.scrollHeight;
  });
  feed.run(1, state.chatAbort.signal).catch(() => undefined);
}

// ---------------------------------------------------------------- routing

async function route(): Promise<void> {
  const hash = location.hash || "#/facilities";
  state.route = hash;
  if (!api.token) {
    const saved = sessionStorage.getItem("shareal.token");
    if (saved) {
      api.token = saved;
      state.user = (await guard(() => api.me())) ?? null;
      if (!state.user) api.token = null;
    }
  }
  if (!api.token && hash !== "#/login") {
    location.hash = "#/login";
    return;
  }
  document.querySelectorAll("nav a").forEach((a) => {
    a.classList.toggle("active", (a as HTMLAnchorElement).hash === hash);
  });
  if (hash === "#/login") return renderLogin();
  if (hash.startsWith("#/facility/")) return renderFacility(hash.split("/")[2]);
  if (hash === "#/data") return renderData();
  if (hash === "#/jobs") return renderJobs();
  if (hash === "#/telemetry") return renderTelemetry();
  if (hash === "#/chat") return renderChat();
  return renderFacilities();
}

export function start(): void {
  window.addEventListener("hashchange", route);
  $("#logout").addEventListener("click", () => {
    sessionStorage.removeItem("shareal.token");
    api.token = null;
    state.user = null;
    location.hash = "#/login";
  });
  route();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
