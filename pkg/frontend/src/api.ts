// Typed client for the shareal HTTP API. Every call in the UI goes through
// this module; nothing talks to the server any other way.

export interface Policy {
  owner: string;
  visibility: "private" | "shared" | "public";
  shared_with: string[];
}

export interface User {
  id: string;
  name: string;
  role: "admin" | "analyst";
  created_at: number;
}

export interface Dataset {
  id: string;
  name: string;
  description: string;
  tags: string[];
  format_hint: string;
  size_bytes: number;
  checksum: string;
  collected_at: number | null;
  collection_method: string;
  expires_at: number | null;
  expired_flag: boolean;
  origin: string;
  policy: Policy;
  version: number;
  created_at: number;
  updated_at: number;
}

export interface Analytic {
  id: string;
  name: string;
  description: string;
  tags: string[];
  runtime_id: string;
  checksum: string;
  default_params: Record<string, unknown>;
  policy: Policy;
  version: number;
  created_at: number;
  updated_at: number;
}

export interface Metric {
  id: string;
  facility_id: string;
  analytic_id: string;
  label: string;
  weight: number;
  created_at: number;
}

export interface Facility {
  id: string;
  name: string;
  location_label: string;
  description: string;
  image_ref: string | null;
  policy: Policy;
  created_at: number;
  metrics: Metric[];
}

export interface Contribution {
  metric_id: string;
  score: number;
  weight: number;
}

export interface Composite {
  facility_id: string;
  ts: number;
  value: number | null;
  contributing: Contribution[];
}

export interface Job {
  id: number;
  analytic_id: string;
  dataset_id: string;
  params: Record<string, unknown>;
  submitted_by: string;
  timeout_ms: number | null;
  state: "QUEUED" | "RUNNING" | "SUCCEEDED" | "FAILED" | "CANCELLED" | "TIMEOUT";
  submit_ts: number;
  start_ts: number | null;
  end_ts: number | null;
  exit_code: number | null;
  reason: string | null;
  log_ref: string | null;
  result_ref: string | null;
}

export interface Room {
  id: string;
  name: string;
  created_by: string;
  created_at: number;
}

export interface ChatMessage {
  room: string;
  seq: number;
  author: string;
  ts: number;
  body: string;
}

export interface SeriesResponse {
  source: string;
  from: number;
  to: number;
  series: Record<string, [number, number][]>;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

export const TERMINAL_STATES = new Set(["SUCCEEDED", "FAILED", "CANCELLED", "TIMEOUT"]);

type FetchLike = typeof fetch;

export class ApiClient {
  token: string | null = null;

  constructor(
    public baseUrl = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const h: Record<string, string> = { ...extra };
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request(method: string, path: string, init: RequestInit = {}): Promise<any> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (!response.ok) {
      let code = "internal-error";
      let message = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(code, message, response.status);
    }
    const contentType = response.headers.get("content-type") ?? "";
    if (contentType.includes("application/json")) return response.json();
    return response.text();
  }

  private json(method: string, path: string, body: unknown): Promise<any> {
    return this.request(method, path, {
      body: JSON.stringify(body),
      headers: { "Content-Type": "application/json" },
    });
  }

  // auth -----------------------------------------------------------------
  async login(name: string, secret: string): Promise<string> {
    const out = await this.json("POST", "/api/auth/login", { name, secret });
    this.token = out.token;
    return out.token;
  }

  me(): Promise<User> {
    return this.request("GET", "/api/users/me");
  }

  createUser(name: string, role: string, secret: string): Promise<User> {
    return this.json("POST", "/api/users", { name, role, secret });
  }

  // catalog ----------------------------------------------------------------
  listDatasets(q = ""): Promise<Dataset[]> {
    return this.request("GET", `/api/datasets?q=${encodeURIComponent(q)}`);
  }

  getDataset(id: string): Promise<Dataset> {
    return this.request("GET", `/api/datasets/${id}`);
  }

  async uploadDataset(meta: Record<string, unknown>, content: Blob, filename: string): Promise<Dataset> {
    const form = new FormData();
    form.append("meta", JSON.stringify(meta));
    form.append("content", content, filename);
    return this.request("POST", "/api/datasets", { body: form });
  }

  datasetContent(id: string): Promise<string> {
    return this.request("GET", `/api/datasets/${id}/content`);
  }

  setDatasetPolicy(id: string, visibility: string, shared_with: string[] = []): Promise<Dataset> {
    return this.json("PUT", `/api/datasets/${id}/policy`, { visibility, shared_with });
  }

  listAnalytics(q = ""): Promise<Analytic[]> {
    return this.request("GET", `/api/analytics?q=${encodeURIComponent(q)}`);
  }

  async uploadAnalytic(meta: Record<string, unknown>, content: Blob, filename: string): Promise<Analytic> {
    const form = new FormData();
    form.append("meta", JSON.stringify(meta));
    form.append("content", content, filename);
    return this.request("POST", "/api/analytics", { body: form });
  }

  setAnalyticPolicy(id: string, visibility: string, shared_with: string[] = []): Promise<Analytic> {
    return this.json("PUT", `/api/analytics/${id}/policy`, { visibility, shared_with });
  }

  runtimes(): Promise<{ runtimes: string[] }> {
    return this.request("GET", "/api/runtimes");
  }

  // telemetry ----------------------------------------------------------------
  ingest(ndjson: string): Promise<{ accepted: number; rejected: number }> {
    return this.request("POST", "/api/ingest", {
      body: ndjson,
      headers: { "Content-Type": "application/x-ndjson" },
    });
  }

  series(
    source: string,
    channels: string[],
    from: number,
    to: number,
    bucketMs?: number,
    agg?: string,
  ): Promise<SeriesResponse> {
    const params = new URLSearchParams({ source, from: String(from), to: String(to) });
    for (const c of channels) params.append("channel", c);
    if (bucketMs !== undefined && agg) {
      params.set("bucket_ms", String(bucketMs));
      params.set("agg", agg);
    }
    return this.request("GET", `/api/series?${params}`);
  }

  extract(source: string, channels: string[], from: number, to: number, name: string): Promise<Dataset> {
    return this.json("POST", "/api/series/extract", { source, channels, from, to, name });
  }

  // jobs ----------------------------------------------------------------
  submitJob(
    analyticId: string,
    datasetId: string,
    params: Record<string, unknown> = {},
    timeoutMs?: number,
  ): Promise<Job> {
    return this.json("POST", "/api/jobs", {
      analytic_id: analyticId,
      dataset_id: datasetId,
      params,
      timeout_ms: timeoutMs ?? null,
    });
  }

  getJob(id: number): Promise<Job> {
    return this.request("GET", `/api/jobs/${id}`);
  }

  listJobs(state?: string, mine = false): Promise<Job[]> {
    const params = new URLSearchParams();
    if (state) params.set("state", state);
    if (mine) params.set("mine", "true");
    const qs = params.toString();
    return this.request("GET", `/api/jobs${qs ? "?" + qs : ""}`);
  }

  cancelJob(id: number): Promise<Job> {
    return this.request("DELETE", `/api/jobs/${id}`);
  }

  jobLog(id: number): Promise<string> {
    return this.request("GET", `/api/jobs/${id}/log`);
  }

  jobResult(id: number): Promise<Record<string, unknown>> {
    return this.request("GET", `/api/jobs/${id}/result`);
  }

  // facilities ----------------------------------------------------------------
  listFacilities(): Promise<Facility[]> {
    return this.request("GET", "/api/facilities");
  }

  getFacility(id: string): Promise<Facility> {
    return this.request("GET", `/api/facilities/${id}`);
  }

  createFacility(name: string, location = "", description = ""): Promise<Facility> {
    return this.json("POST", "/api/facilities", {
      name,
      location_label: location,
      description,
    });
  }

  attachMetric(facilityId: string, analyticId: string, label: string, weight: number): Promise<Metric> {
    return this.json("POST", `/api/facilities/${facilityId}/metrics`, {
      analytic_id: analyticId,
      label,
      weight,
    });
  }

  detachMetric(metricId: string): Promise<void> {
    return this.request("DELETE", `/api/metrics/${metricId}`);
  }

  score(facilityId: string, at?: number): Promise<Composite> {
    const qs = at !== undefined ? `?at=${at}` : "";
    return this.request("GET", `/api/facilities/${facilityId}/score${qs}`);
  }

  history(facilityId: string, from: number, to: number): Promise<Composite[]> {
    return this.request("GET", `/api/facilities/${facilityId}/history?from=${from}&to=${to}`);
  }

  // chat ----------------------------------------------------------------
  listRooms(): Promise<Room[]> {
    return this.request("GET", "/api/rooms");
  }

  createRoom(name: string): Promise<Room> {
    return this.json("POST", "/api/rooms", { name });
  }

  postMessage(roomId: string, body: string): Promise<ChatMessage> {
    return this.json("POST", `/api/rooms/${roomId}/messages`, { body });
  }

  fetchMessages(roomId: string, since = 0, limit = 1000): Promise<ChatMessage[]> {
    return this.request("GET", `/api/rooms/${roomId}/messages?since=${since}&limit=${limit}`);
  }

  // Live NDJSON stream of a room. Yields messages until the signal aborts
  // or the connection drops (caller handles resume).
  async *streamRoom(
    roomId: string,
    fromSeq: number,
    signal: AbortSignal,
  ): AsyncGenerator<ChatMessage> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/rooms/${roomId}/stream?from_seq=${fromSeq}`,
      { headers: this.headers(), signal },
    );
    if (!response.ok || !response.body) {
      throw new ApiError("internal-error", `stream failed: ${response.status}`, response.status);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      while (true) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let nl;
        while ((nl = buffer.indexOf("\n")) >= 0) {
          const line = buffer.slice(0, nl).trim();
          buffer = buffer.slice(nl + 1);
          if (!line) continue; // keepalive
          yield JSON.parse(line) as ChatMessage;
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}
