/** Pure decision logic for the evaluation guide. */

import type {
  Constraints,
  CoverageReport,
  EvalMethod,
  KnowledgeBase,
} from "./types.js";

const COST_ORDER: Record<string, number> = { low: 0, medium: 1, high: 2 };

export function feasibleMethods(
  methods: EvalMethod[],
  constraints: Constraints,
): EvalMethod[] {
  return methods.filter(
    (m) =>
      (!m.requires_reference || constraints.has_reference) &&
      (!m.requires_judge_model || constraints.has_judge),
  );
}

/**
 * Rank feasible methods by how many selected criteria they cover
 * (descending), breaking ties by cheaper cost class, then id.
 */
export function suggestMethods(
  kb: KnowledgeBase,
  selectedCriteria: string[],
  constraints: Constraints,
): EvalMethod[] {
  if (kb.methods.length === 0) {
    throw new Error("knowledge base is empty");
  }
  const selected = new Set(selectedCriteria);
  const coverageCount = (m: EvalMethod) =>
    m.covers.filter((c) => selected.has(c)).length;
  return feasibleMethods(kb.methods, constraints)
    .slice()
    .sort((a, b) => {
      const byCoverage = coverageCount(b) - coverageCount(a);
      if (byCoverage !== 0) return byCoverage;
      const byCost = COST_ORDER[a.cost_class] - COST_ORDER[b.cost_class];
      if (byCost !== 0) return byCost;
      return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
    });
}

/**
 * Which selected criteria the selected methods cover, and which remain
 * uncovered. covered and uncovered partition the selected criteria.
 */
export function computeCoverage(
  selectedCriteria: string[],
  selectedMethodIds: string[],
  kb: KnowledgeBase,
): CoverageReport {
  const knownCriteria = new Set(kb.criteria.map((c) => c.id));
  const methodsById = new Map(kb.methods.map((m) => [m.id, m]));
  for (const id of selectedCriteria) {
    if (!knownCriteria.has(id)) throw new Error(`unknown criterion: ${id}`);
  }
  for (const id of selectedMethodIds) {
    if (!methodsById.has(id)) throw new Error(`unknown method: ${id}`);
  }
  const coveredUnion = new Set<string>();
  for (const id of selectedMethodIds) {
    for (const criterion of methodsById.get(id)!.covers) {
      coveredUnion.add(criterion);
    }
  }
  const covered = selectedCriteria.filter((c) => coveredUnion.has(c));
  const uncovered = selectedCriteria.filter((c) => !coveredUnion.has(c));
  return { selected: [...selectedMethodIds], covered, uncovered };
}
