/** Leaderboard view. Renders a scored report exactly as delivered: same
 *  row order, same ids, same AQI values; no client-side sorting or math. */

import type { AQIReport, ReportEntry } from "./api.js";

function badge(entry: ReportEntry): string {
  if (entry.passed_filter === null) return "";
  if (entry.passed_filter) {
    return '<span class="badge pass">eligible</span>';
  }
  const reasons = entry.reasons.join("; ");
  return `<span class="badge fail" title="${escapeHtml(reasons)}">${escapeHtml(
    reasons,
  )}</span>`;
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderLeaderboard(
  container: HTMLElement,
  report: AQIReport,
): void {
  container.innerHTML = "";
  if (report.entries.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "No candidates scored yet.";
    container.appendChild(empty);
    return;
  }
  const table = document.createElement("table");
  table.className = "leaderboard";
  table.innerHTML =
    "<thead><tr><th>#</th><th>candidate</th><th>AQI</th><th>screening</th></tr></thead>";
  const tbody = document.createElement("tbody");
  for (const entry of report.entries) {
    const row = document.createElement("tr");
    row.className = "entry";
    row.dataset.candidateId = entry.candidate_id;
    row.dataset.aqi = String(entry.aqi);
    row.innerHTML = `
      <td class="rank">${entry.rank}</td>
      <td class="candidate">${escapeHtml(entry.candidate_id)}</td>
      <td class="aqi">${String(entry.aqi)}</td>
      <td class="flags">${badge(entry)}</td>
    `;
    tbody.appendChild(row);
  }
  table.appendChild(tbody);
  container.appendChild(table);
}
