import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { cellHighlight, renderMetaList, renderResultsTable } from "../src/dashboard.js";
import type { MetaPayload, ResultsPayload } from "../src/types.js";

// Fixtures produced by the CLI's analyse command from one mock project:
// results.json is the payload /api/results serves (the results.csv mirror),
// results_text.txt is the CLI's aligned-text rendering of the same table.
const RESULTS: ResultsPayload = JSON.parse(
  readFileSync(new URL("../fixtures/results.json", import.meta.url), "utf-8"),
);
const RESULTS_TEXT = readFileSync(
  new URL("../fixtures/results_text.txt", import.meta.url),
  "utf-8",
);
const META: MetaPayload = JSON.parse(
  readFileSync(new URL("../fixtures/meta_eval.json", import.meta.url), "utf-8"),
);

type Mark = "rank1" | "rank2" | null;

/** Parse the CLI text table into per-(experiment, metric) rank marks. */
function marksFromTextRendering(): Map<string, Mark> {
  const lines = RESULTS_TEXT.trimEnd().split("\n");
  const header = lines[0].split(/\s{2,}/);
  const marks = new Map<string, Mark>();
  for (const line of lines.slice(1)) {
    const cells = line.split(/\s{2,}/);
    const experiment = cells[0];
    header.forEach((column, i) => {
      if (!RESULTS.columns.includes(column)) return;
      const cell = cells[i];
      let mark: Mark = null;
      if (cell.startsWith("*") && cell.endsWith("*")) mark = "rank1";
      else if (cell.startsWith("_") && cell.endsWith("_")) mark = "rank2";
      marks.set(`${experiment}:${column}`, mark);
    });
  }
  return marks;
}

describe("dashboard parity with the CLI rendering", () => {
  it("highlights exactly the rank-1/rank-2 cells the CLI text table marks", () => {
    const expected = marksFromTextRendering();
    expect(expected.size).toBe(RESULTS.rows.length * RESULTS.columns.length);
    for (const row of RESULTS.rows) {
      for (const column of RESULTS.columns) {
        const got = cellHighlight(RESULTS, row.experiment, column);
        expect(got).toBe(expected.get(`${row.experiment}:${column}`));
      }
    }
  });

  it("renders the highlighted cells with matching CSS classes", () => {
    const html = renderResultsTable(RESULTS);
    const expected = marksFromTextRendering();
    let rank1Cells = 0;
    let rank2Cells = 0;
    for (const mark of expected.values()) {
      if (mark === "rank1") rank1Cells++;
      if (mark === "rank2") rank2Cells++;
    }
    expect((html.match(/<td class="rank1"/g) ?? []).length).toBe(rank1Cells);
    expect((html.match(/<td class="rank2"/g) ?? []).length).toBe(rank2Cells);
  });

  it("shows served values verbatim, no recomputation", () => {
    const html = renderResultsTable(RESULTS);
    for (const row of RESULTS.rows) {
      for (const column of RESULTS.columns) {
        const cell = row.metrics[column];
        if (cell) expect(html).toContain(cell.mean.toFixed(3));
      }
    }
  });

  it("renders every metric column header", () => {
    const html = renderResultsTable(RESULTS);
    for (const column of RESULTS.columns) {
      expect(html).toContain(`<th class="metric">${column}</th>`);
    }
  });
});

describe("meta-evaluation list", () => {
  it("renders metrics in served order with served values", () => {
    const html = renderMetaList(META);
    const positions = META.results.map((row) => html.indexOf(row.metric));
    expect(positions.every((p) => p >= 0)).toBe(true);
    expect(positions).toEqual([...positions].sort((a, b) => a - b));
    for (const row of META.results) {
      if (row.avg_correlation !== null) {
        expect(html).toContain(row.avg_correlation.toFixed(3));
      }
    }
  });

  it("marks degenerate metrics instead of inventing a number", () => {
    const html = renderMetaList({
      results: [
        { metric: "flat", avg_correlation: null, n_samples: 0, n_degenerate: 4 },
      ],
    });
    expect(html).toContain("degenerate");
    expect(html).not.toContain("NaN");
  });

  it("escapes markup in served names", () => {
    const html = renderMetaList({
      results: [
        { metric: "<script>x</script>", avg_correlation: 0.5, n_samples: 1, n_degenerate: 0 },
      ],
    });
    expect(html).not.toContain("<script>");
  });
});
