// Facility dashboard view model and renderer. All numbers come straight from
// the gateway (/score, /history); the client only formats them.

import type { Composite, Facility } from "./api.js";
import { formatScore, gaugeSvg, stepChartSvg } from "./charts.js";

export const DEFAULT_ALERT_THRESHOLD = 75;

export interface MetricRow {
  metricId: string;
  label: string;
  weight: number;
  latestScore: number | null;
}

export interface DashboardViewModel {
  facility: Facility;
  composite: number | null;
  metricRows: MetricRow[];
  history: { ts: number; value: number }[];
  threshold: number;
  alert: boolean;
}

export function buildDashboard(
  facility: Facility,
  score: Composite,
  history: Composite[],
  threshold = DEFAULT_ALERT_THRESHOLD,
): DashboardViewModel {
  const latest = new Map(score.contributing.map((c) => [c.metric_id, c.score]));
  const metricRows = facility.metrics.map((m) => ({
    metricId: m.id,
    label: m.label,
    weight: m.weight,
    latestScore: latest.get(m.id) ?? null,
  }));
  return {
    facility,
    composite: score.value,
    metricRows,
    history: history
      .filter((h) => h.value !== null)
      .map((h) => ({ ts: h.ts, value: h.value as number })),
    threshold,
    alert: score.value !== null && score.value >= threshold,
  };
}

export function renderDashboard(vm: DashboardViewModel): string {
  const rows =
    vm.metricRows.length === 0
      ? `<tr><td colspan="3" class="placeholder">no metrics attached</td></tr>`
      : vm.metricRows
          .map(
            (r) => `
      <tr data-metric="${r.metricId}">
        <td>${escapeHtml(r.label)}</td>
        <td class="num">${r.weight}</td>
        <td class="num metric-score">${formatScore(r.latestScore)}</td>
      </tr>`,
          )
          .join("");
  const gauge =
    vm.metricRows.length === 0
      ? `<div class="placeholder">no metrics attached</div>`
      : gaugeSvg(vm.composite);
  const alertBadge = vm.alert
    ? `<span class="alert-badge" data-testid="alert">composite ≥ ${vm.threshold}</span>`
    : "";
  return `
<section class="dashboard" data-facility="${vm.facility.id}">
  <header>
    <h2>${escapeHtml(vm.facility.name)}</h2>
    <span class="muted">${escapeHtml(vm.facility.location_label)}</span>
    ${alertBadge}
  </header>
  <div class="dash-grid">
    <div class="card">
      <h3>Composite score</h3>
      ${gauge}
      <div class="composite-value" data-testid="composite">${formatScore(vm.composite)}</div>
    </div>
    <div class="card">
      <h3>Metrics</h3>
      <table class="metrics">
        <thead><tr><th>label</th><th>weight</th><th>latest</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
    </div>
    <div class="card wide">
      <h3>History</h3>
      ${stepChartSvg(vm.history)}
    </div>
  </div>
</section>`;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
