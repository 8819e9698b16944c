/** App shell: the five-step evaluation guide and the results dashboard.
 * Guide state lives in the URL so plans can be shared as links. */

import { fetchKnowledgeBase, fetchManifest, fetchMeta, fetchResults } from "./api.js";
import { escapeHtml, renderMetaList, renderResultsTable } from "./dashboard.js";
import { computeCoverage, suggestMethods } from "./guide.js";
import { encodeState, GuideState, parseState, STEP_COUNT } from "./state.js";
import type { KnowledgeBase } from "./types.js";

const STEP_TITLES = [
  "Task",
  "Risks & requirements",
  "Constraints",
  "Methods",
  "Coverage report",
];

let kb: KnowledgeBase | null = null;
let state: GuideState = parseState(location.search);

function syncUrl() {
  history.replaceState(null, "", `?${encodeState(state)}${location.hash}`);
}

function setState(patch: Partial<GuideState>) {
  state = { ...state, ...patch };
  syncUrl();
  render();
}

function stepNav(): string {
  return `<nav class="steps">${STEP_TITLES.map((title, i) => {
    const cls = i === state.step ? "active" : i < state.step ? "done" : "";
    const disabled = i > state.step ? "disabled" : "";
    return `<button data-action="goto" data-step="${i}" class="${cls}" ${disabled}>
${i + 1}. ${title}</button>`;
  }).join("")}</nav>`;
}

function stepButtons(nextLabel = "Next"): string {
  const back =
    state.step > 0
      ? `<button data-action="back" class="secondary">Back</button>`
      : "";
  const next =
    state.step < STEP_COUNT - 1
      ? `<button data-action="next" class="primary">${nextLabel}</button>`
      : `<button data-action="restart" class="secondary">Start over</button>`;
  return `<div class="buttons">${back}${next}</div>`;
}

function renderTaskStep(): string {
  return `<section>
<p>Describe the generation task you want to evaluate. This is for the plan
summary only; it does not change the suggestions.</p>
<input id="task" type="text" value="${escapeHtml(state.task)}"
  placeholder="e.g. structured note generation from dialogue transcripts">
${stepButtons()}
</section>`;
}

function renderCriteriaStep(knowledge: KnowledgeBase): string {
  const groups: Record<string, string[]> = { risk: [], requirement: [] };
  for (const criterion of knowledge.criteria) {
    groups[criterion.kind].push(`<label class="check">
<input type="checkbox" data-action="criterion" value="${criterion.id}"
  ${state.criteria.includes(criterion.id) ? "checked" : ""}>
<strong>${escapeHtml(criterion.label)}</strong>
<span>${escapeHtml(criterion.description)}</span></label>`);
  }
  return `<section>
<h3>Risks to watch for</h3>${groups.risk.join("")}
<h3>Requirements</h3>${groups.requirement.join("")}
${stepButtons()}
</section>`;
}

function renderConstraintsStep(): string {
  return `<section>
<label class="check"><input type="checkbox" data-action="toggle-ref"
  ${state.hasReference ? "checked" : ""}>
<strong>Reference outputs available</strong>
<span>Gold outputs exist for comparison (enables BLEU/ROUGE/embedding metrics).</span></label>
<label class="check"><input type="checkbox" data-action="toggle-judge"
  ${state.hasJudge ? "checked" : ""}>
<strong>Judge model available</strong>
<span>A capable LLM can be called during evaluation (enables judge and QA metrics).</span></label>
${stepButtons()}
</section>`;
}

function renderMethodsStep(knowledge: KnowledgeBase): string {
  const suggestions = suggestMethods(knowledge, state.criteria, {
    has_reference: state.hasReference,
    has_judge: state.hasJudge,
  });
  const selected = new Set(state.criteria);
  const rows = suggestions.map((method) => {
    const hits = method.covers.filter((c) => selected.has(c));
    return `<label class="check method">
<input type="checkbox" data-action="method" value="${method.id}"
  ${state.methods.includes(method.id) ? "checked" : ""}>
<strong>${escapeHtml(method.label)}</strong>
<span class="tags">cost: ${method.cost_class}${method.requires_reference ? " · needs reference" : ""}${method.requires_judge_model ? " · needs judge" : ""}</span>
<span>covers ${hits.length}/${state.criteria.length} selected: ${hits.join(", ") || "none"}</span>
</label>`;
  });
  const excluded = knowledge.methods.length - suggestions.length;
  return `<section>
<p>Feasible methods, best match first.${excluded ? ` ${excluded} method(s) hidden by your constraints.` : ""}</p>
${rows.join("") || "<p class='warn'>No feasible methods under these constraints.</p>"}
${stepButtons("Review coverage")}
</section>`;
}

function renderCoverageStep(knowledge: KnowledgeBase): string {
  const report = computeCoverage(state.criteria, state.methods, knowledge);
  const labelFor = (id: string) =>
    knowledge.criteria.find((c) => c.id === id)?.label ?? id;
  const methodLabel = (id: string) =>
    knowledge.methods.find((m) => m.id === id)?.label ?? id;
  const uncovered = report.uncovered.length
    ? `<div class="uncovered"><h3>Not covered</h3><ul>${report.uncovered
        .map((id) => `<li>${escapeHtml(labelFor(id))}</li>`)
        .join("")}</ul>
<p>Pick additional methods or revisit the constraints to close these gaps.</p></div>`
    : `<p class="allcovered">Every selected risk and requirement is covered.</p>`;
  return `<section>
<h3>Evaluation plan${state.task ? ` for: ${escapeHtml(state.task)}` : ""}</h3>
<p>Methods: ${report.selected.map(methodLabel).map(escapeHtml).join(", ") || "none selected"}</p>
<p>Covered: ${report.covered.map(labelFor).map(escapeHtml).join(", ") || "none"}</p>
${uncovered}
<p class="share">Shareable link: <code>${escapeHtml(location.href)}</code></p>
${stepButtons()}
</section>`;
}

function renderGuide(): string {
  if (!kb) return "<p>Loading knowledge base…</p>";
  const steps = [
    () => renderTaskStep(),
    () => renderCriteriaStep(kb!),
    () => renderConstraintsStep(),
    () => renderMethodsStep(kb!),
    () => renderCoverageStep(kb!),
  ];
  return stepNav() + steps[state.step]();
}

async function renderDashboard(container: HTMLElement) {
  container.innerHTML = "<p>Loading results…</p>";
  const sections: string[] = [];
  try {
    const manifest = await fetchManifest();
    const entries = Object.entries(manifest.experiments);
    const done = entries.filter(([, e]) => e.status === "succeeded").length;
    sections.push(
      `<h2>Experiments</h2><p>${entries.length} tracked, ${done} succeeded.</p>`,
    );
  } catch (err) {
    sections.push(`<p class="warn">${escapeHtml(String(err))}</p>`);
  }
  try {
    sections.push("<h2>Scores</h2>", renderResultsTable(await fetchResults()));
  } catch (err) {
    sections.push(`<p class="warn">${escapeHtml(String(err))}</p>`);
  }
  try {
    sections.push(
      "<h2>Metric reliability under perturbation</h2>",
      renderMetaList(await fetchMeta()),
    );
  } catch (err) {
    sections.push(`<p class="warn">${escapeHtml(String(err))}</p>`);
  }
  container.innerHTML = sections.join("\n");
}

function render() {
  const guide = document.getElementById("guide")!;
  guide.innerHTML = renderGuide();
}

function toggleListValue(list: string[], value: string): string[] {
  return list.includes(value)
    ? list.filter((v) => v !== value)
    : [...list, value];
}

function bindEvents() {
  const guide = document.getElementById("guide")!;
  guide.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action]");
    if (!(target instanceof HTMLElement)) return;
    switch (target.dataset.action) {
      case "goto":
        setState({ step: Number(target.dataset.step) });
        break;
      case "back":
        setState({ step: Math.max(0, state.step - 1) });
        break;
      case "next":
        setState({ step: Math.min(STEP_COUNT - 1, state.step + 1) });
        break;
      case "restart":
        setState({ step: 0, criteria: [], methods: [] });
        break;
    }
  });
  guide.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    switch (target.dataset.action) {
      case "criterion":
        setState({ criteria: toggleListValue(state.criteria, target.value) });
        break;
      case "method":
        setState({ methods: toggleListValue(state.methods, target.value) });
        break;
      case "toggle-ref":
        setState({ hasReference: target.checked, methods: [] });
        break;
      case "toggle-judge":
        setState({ hasJudge: target.checked, methods: [] });
        break;
    }
  });
  guide.addEventListener("input", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.id === "task") {
      state = { ...state, task: target.value };
      syncUrl();
    }
  });

  for (const tab of document.querySelectorAll<HTMLElement>("[data-tab]")) {
    tab.addEventListener("click", () => {
      document
        .querySelectorAll(".tab")
        .forEach((t) => t.classList.remove("active"));
      tab.classList.add("active");
      const showDashboard = tab.dataset.tab === "dashboard";
      document.getElementById("guide")!.hidden = showDashboard;
      const dashboard = document.getElementById("dashboard")!;
      dashboard.hidden = !showDashboard;
      if (showDashboard) void renderDashboard(dashboard);
    });
  }
  window.addEventListener("popstate", () => {
    state = parseState(location.search);
    render();
  });
}

export async function start() {
  bindEvents();
  render();
  try {
    kb = await fetchKnowledgeBase();
  } catch (err) {
    document.getElementById("guide")!.innerHTML =
      `<p class="warn">Cannot load the method knowledge base: ${escapeHtml(String(err))}</p>`;
    return;
  }
  render();
}

if (typeof document !== "undefined" && document.getElementById("guide")) {
  void start();
}
