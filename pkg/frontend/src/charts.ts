// Tiny SVG helpers: the composite gauge and the step-function history chart.
// Scores come from the server as-is; this module only draws them.

export function gaugeSvg(value: number | null, size = 140): string {
  const radius = size / 2 - 10;
  const cx = size / 2;
  const cy = size / 2;
  const circumference = Math.PI * radius; // half circle
  const fraction = value === null ? 0 : Math.max(0, Math.min(100, value)) / 100;
  const arc = `M ${cx - radius} ${cy} A ${radius} ${radius} 0 0 1 ${cx + radius} ${cy}`;
  return `
<svg viewBox="0 0 ${size} ${size / 2 + 24}" class="gauge" role="img">
  <path d="${arc}" fill="none" stroke="#e3e6eb" stroke-width="12" stroke-linecap="round"/>
  <path d="${arc}" fill="none" stroke="#3566c4" stroke-width="12" stroke-linecap="round"
        stroke-dasharray="${(fraction * circumference).toFixed(2)} ${circumference.toFixed(2)}"/>
  <text x="${cx}" y="${cy}" text-anchor="middle" class="gauge-value">${formatScore(value)}</text>
</svg>`;
}

export interface HistoryPoint {
  ts: number;
  value: number;
}

// Step chart: the composite holds its value until the next sample, so every
// segment is drawn flat and then stepped vertically.
export function stepChartSvg(points: HistoryPoint[], width = 520, height = 160): string {
  if (points.length === 0) {
    return `<svg viewBox="0 0 ${width} ${height}" class="chart"><text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="placeholder">no history</text></svg>`;
  }
  const pad = 28;
  const t0 = points[0].ts;
  const t1 = points[points.length - 1].ts;
  const span = Math.max(1, t1 - t0);
  const x = (ts: number) => pad + ((ts - t0) / span) * (width - 2 * pad);
  const y = (v: number) => height - pad - (Math.max(0, Math.min(100, v)) / 100) * (height - 2 * pad);

  let d = `M ${x(points[0].ts).toFixed(1)} ${y(points[0].value).toFixed(1)}`;
  for (let i = 1; i < points.length; i++) {
    d += ` H ${x(points[i].ts).toFixed(1)} V ${y(points[i].value).toFixed(1)}`;
  }
  d += ` H ${(width - pad).toFixed(1)}`;
  const dots = points
    .map((p) => `<circle cx="${x(p.ts).toFixed(1)}" cy="${y(p.value).toFixed(1)}" r="2.5"/>`)
    .join("");
  return `
<svg viewBox="0 0 ${width} ${height}" class="chart" role="img">
  <line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" class="axis"/>
  <line x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}" class="axis"/>
  <path d="${d}" fill="none" stroke="#3566c4" stroke-width="2"/>
  <g fill="#3566c4">${dots}</g>
</svg>`;
}

export function lineChartSvg(points: [number, number][], width = 520, height = 160): string {
  if (points.length === 0) {
    return `<svg viewBox="0 0 ${width} ${height}" class="chart"><text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="placeholder">no data</text></svg>`;
  }
  const pad = 28;
  const t0 = points[0][0];
  const span = Math.max(1, points[points.length - 1][0] - t0);
  const values = points.map((p) => p[1]);
  const vMin = Math.min(...values);
  const vMax = Math.max(...values);
  const vSpan = Math.max(1e-9, vMax - vMin);
  const x = (ts: number) => pad + ((ts - t0) / span) * (width - 2 * pad);
  const y = (v: number) => height - pad - ((v - vMin) / vSpan) * (height - 2 * pad);
  const d = points
    .map((p, i) => `${i === 0 ? "M" : "L"} ${x(p[0]).toFixed(1)} ${y(p[1]).toFixed(1)}`)
    .join(" ");
  return `
<svg viewBox="0 0 ${width} ${height}" class="chart" role="img">
  <line x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}" class="axis"/>
  <path d="${d}" fill="none" stroke="#2b8a5b" stroke-width="1.5"/>
</svg>`;
}

// Display formatting only: at most one decimal, no trailing ".0".
export function formatScore(value: number | null): string {
  if (value === null || value === undefined || Number.isNaN(value)) return "—";
  return String(Math.round(value * 10) / 10);
}
