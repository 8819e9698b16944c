/** Read-only dashboard rendering. Every number shown comes verbatim from
 * the served payloads; rank highlighting reuses the server's rank1/rank2
 * annotations rather than recomputing anything client-side. */

import type { MetaPayload, ResultsPayload } from "./types.js";

export type Highlight = "rank1" | "rank2" | null;

export function cellHighlight(
  payload: ResultsPayload,
  experiment: string,
  column: string,
): Highlight {
  if ((payload.rank1[column] ?? []).includes(experiment)) return "rank1";
  if ((payload.rank2[column] ?? []).includes(experiment)) return "rank2";
  return null;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const LABEL_COLUMNS = ["model", "dataset", "level"] as const;

export function renderResultsTable(payload: ResultsPayload): string {
  const labels = LABEL_COLUMNS.filter((name) =>
    payload.rows.some((row) => row[name] !== undefined),
  );
  const head = [
    ...labels.map((l) => `<th>${escapeHtml(l)}</th>`),
    ...payload.columns.map((c) => `<th class="metric">${escapeHtml(c)}</th>`),
  ].join("");

  const body = payload.rows
    .map((row) => {
      const labelCells = labels
        .map((l) => `<td>${escapeHtml(String(row[l] ?? ""))}</td>`)
        .join("");
      const metricCells = payload.columns
        .map((column) => {
          const cell = row.metrics[column];
          if (!cell) return `<td class="missing">-</td>`;
          const highlight = cellHighlight(payload, row.experiment, column);
          const cls = highlight ? ` class="${highlight}"` : "";
          return `<td${cls} title="n=${cell.n}">${cell.mean.toFixed(3)}</td>`;
        })
        .join("");
      return `<tr data-experiment="${escapeHtml(row.experiment)}">${labelCells}${metricCells}</tr>`;
    })
    .join("");

  return `<table class="results"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>
<p class="legend"><span class="rank1">best</span> and <span class="rank2">second-best</span> per metric column (ties share the better rank).</p>`;
}

export function renderMetaList(payload: MetaPayload): string {
  const rows = payload.results
    .map((row) => {
      if (row.avg_correlation === null) {
        return `<li class="degenerate"><span class="name">${escapeHtml(row.metric)}</span>
<span class="note">degenerate (${row.n_degenerate} zero-variance samples)</span></li>`;
      }
      const percent = Math.round(((row.avg_correlation + 1) / 2) * 100);
      return `<li><span class="name">${escapeHtml(row.metric)}</span>
<span class="bar"><span class="fill" style="width:${percent}%"></span></span>
<span class="value">${row.avg_correlation.toFixed(3)}</span>
<span class="note">n=${row.n_samples}${row.n_degenerate ? `, degenerate=${row.n_degenerate}` : ""}</span></li>`;
    })
    .join("");
  return `<ol class="meta">${rows}</ol>`;
}
