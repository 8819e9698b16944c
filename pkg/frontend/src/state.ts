/** Guide stepper state, round-tripped through the URL query string so an
 * evaluation plan is shareable as a link. */

export interface GuideState {
  step: number;
  task: string;
  criteria: string[];
  hasReference: boolean;
  hasJudge: boolean;
  methods: string[];
}

export const STEP_COUNT = 5;

export const initialState: GuideState = {
  step: 0,
  task: "",
  criteria: [],
  hasReference: true,
  hasJudge: true,
  methods: [],
};

export function encodeState(state: GuideState): string {
  const params = new URLSearchParams();
  if (state.step) params.set("step", String(state.step));
  if (state.task) params.set("task", state.task);
  if (state.criteria.length) params.set("criteria", state.criteria.join(","));
  params.set("ref", state.hasReference ? "1" : "0");
  params.set("judge", state.hasJudge ? "1" : "0");
  if (state.methods.length) params.set("methods", state.methods.join(","));
  return params.toString();
}

export function parseState(query: string): GuideState {
  const params = new URLSearchParams(query);
  const list = (key: string) =>
    (params.get(key) ?? "")
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s.length > 0);
  const step = Number(params.get("step") ?? "0");
  return {
    step: Number.isInteger(step) && step >= 0 && step < STEP_COUNT ? step : 0,
    task: params.get("task") ?? "",
    criteria: list("criteria"),
    hasReference: params.get("ref") !== "0",
    hasJudge: params.get("judge") !== "0",
    methods: list("methods"),
  };
}
