// HTML renderers. Pure string producers so the views are testable without
// a DOM; main.ts swaps them into page sections on each stream event.

import type { AssetView } from "./state.js";
import type { AnomalyRow, ChannelHealth, Digest } from "./types.js";

const STATUS_CLASS: Record<string, string> = {
  nominal: "ok",
  advisory: "advisory",
  warning: "warning",
  critical: "critical",
  "sensor-fault": "fault",
  paused: "paused",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmtTs(ms: number | null): string {
  if (ms === null) return "-";
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19);
}

export function renderBanner(connection: string, stale: boolean): string {
  if (connection === "live") return "";
  const note = stale ? " - showing cached data" : "";
  return `<div class="banner ${connection}">event stream ${connection}, retrying${note}</div>`;
}

export function renderFleet(views: AssetView[]): string {
  const rows = views
    .map((v) => {
      const cls = STATUS_CLASS[v.status] ?? "ok";
      const faults = v.faultySensors.length
        ? ` <span class="fault">(${v.faultySensors.map(escapeHtml).join(", ")})</span>`
        : "";
      return (
        `<tr data-asset="${escapeHtml(v.asset)}">` +
        `<td>${escapeHtml(v.asset)}</td>` +
        `<td class="${cls}">${v.status}${faults}</td>` +
        `<td>${v.openAnomalies.length}</td>` +
        `<td>${fmtTs(v.nextInspectionDue)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="fleet"><thead><tr>` +
    `<th>asset</th><th>status</th><th>open</th><th>next inspection</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderSparkline(
  channel: ChannelHealth,
  width = 120,
  height = 24,
): string {
  const points = channel.recent;
  if (points.length < 2) return `<span class="spark-empty">no data</span>`;
  const ts = points.map((p) => p[0]);
  const vs = points.map((p) => p[1]);
  const tMin = Math.min(...ts);
  const tMax = Math.max(...ts);
  const vMin = Math.min(...vs);
  const vMax = Math.max(...vs);
  const xs = (t: number) =>
    tMax === tMin ? 0 : ((t - tMin) / (tMax - tMin)) * (width - 2) + 1;
  const ys = (v: number) =>
    vMax === vMin ? height / 2 : height - 2 - ((v - vMin) / (vMax - vMin)) * (height - 4);
  const path = points.map(([t, v]) => `${xs(t).toFixed(1)},${ys(v).toFixed(1)}`).join(" ");
  return (
    `<svg class="spark" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1" points="${path}"/></svg>`
  );
}

export function renderAnomalyQueue(
  open: AnomalyRow[],
  acknowledged: AnomalyRow[],
): string {
  const row = (a: AnomalyRow, withAck: boolean) =>
    `<tr data-anomaly="${escapeHtml(a.anomaly_id)}">` +
    `<td class="${STATUS_CLASS[a.severity]}">${a.severity}</td>` +
    `<td>${escapeHtml(a.asset)}</td>` +
    `<td>${a.method}</td>` +
    `<td>${fmtTs(a.detected_at)}</td>` +
    `<td>${a.predicted_failure_at ? fmtTs(a.predicted_failure_at) : "-"}</td>` +
    `<td>${escapeHtml(a.evidence)}</td>` +
    `<td>${withAck ? `<button class="ack" data-anomaly="${escapeHtml(a.anomaly_id)}">ack</button>` : escapeHtml(a.ack_author ?? "")}</td>` +
    `</tr>`;
  return (
    `<h3>open</h3><table class="queue"><tbody>` +
    open.map((a) => row(a, true)).join("") +
    `</tbody></table>` +
    `<h3>acknowledged</h3><table class="queue acked"><tbody>` +
    acknowledged.map((a) => row(a, false)).join("") +
    `</tbody></table>`
  );
}

export function renderDigest(digest: Digest): string {
  const counts = digest.anomaly_counts;
  return (
    `<dl class="digest">` +
    `<dt>period</dt><dd>${digest.period} (${fmtTs(digest.range.start)} to ${fmtTs(digest.range.end)})</dd>` +
    `<dt>anomalies</dt><dd>critical ${counts.critical ?? 0}, warning ${counts.warning ?? 0}, advisory ${counts.advisory ?? 0}</dd>` +
    `<dt>open anomalies</dt><dd>${digest.open_anomalies.length}</dd>` +
    `<dt>open responses</dt><dd>${digest.open_responses.length}</dd>` +
    `<dt>sensor faults</dt><dd>${digest.sensor_faults.length}</dd>` +
    `</dl>`
  );
}
