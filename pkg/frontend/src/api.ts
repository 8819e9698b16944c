import type {
  KnowledgeBase,
  ManifestPayload,
  MetaPayload,
  ResultsPayload,
} from "./types.js";

async function getJson<T>(path: string): Promise<T> {
  const response = await fetch(path);
  if (!response.ok) {
    const body = await response.json().catch(() => ({}));
    throw new Error(body.error ?? `${path} returned ${response.status}`);
  }
  return (await response.json()) as T;
}

export const fetchKnowledgeBase = () => getJson<KnowledgeBase>("/api/guide/kb");
export const fetchManifest = () => getJson<ManifestPayload>("/api/manifest");
export const fetchResults = () => getJson<ResultsPayload>("/api/results");
export const fetchMeta = () => getJson<MetaPayload>("/api/meta");
