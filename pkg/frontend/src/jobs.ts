// Job console flow: submit, poll to a terminal state, surface log and result.

import { ApiClient, Job, TERMINAL_STATES } from "./api.js";

export interface RunOptions {
  pollMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: Job) => void;
}

export async function runAnalysisFlow(
  api: ApiClient,
  analyticId: string,
  datasetId: string,
  params: Record<string, unknown> = {},
  options: RunOptions = {},
): Promise<Job> {
  const pollMs = options.pollMs ?? 1000;
  const deadline = Date.now() + (options.timeoutMs ?? 10 * 60 * 1000);
  let job = await api.submitJob(analyticId, datasetId, params);
  options.onUpdate?.(job);
  while (!TERMINAL_STATES.has(job.state)) {
    if (Date.now() > deadline) throw new Error(`job ${job.id} still ${job.state}`);
    await delay(pollMs);
    job = await api.getJob(job.id);
    options.onUpdate?.(job);
  }
  return job;
}

export function stateBadge(state: Job["state"]): string {
  return `<span class="state state-${state.toLowerCase()}">${state}</span>`;
}

export function renderJobRow(job: Job): string {
  const when = new Date(job.submit_ts).toLocaleTimeString();
  const reason = job.reason ? ` <span class="muted">(${job.reason})</span>` : "";
  return `
<tr data-job="${job.id}">
  <td>#${job.id}</td>
  <td>${stateBadge(job.state)}${reason}</td>
  <td>${when}</td>
  <td><button data-action="job-detail" data-job="${job.id}">details</button>
      ${job.state === "QUEUED" || job.state === "RUNNING" ? `<button data-action="job-cancel" data-job="${job.id}">cancel</button>` : ""}
  </td>
</tr>`;
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
