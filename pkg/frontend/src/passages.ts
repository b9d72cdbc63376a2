import type { InvocationRecord } from "./types.js";

/** Recover passage texts from the debug trace so answer spans can be
 * highlighted in their source paragraph: any node output snapshot carrying a
 * `docs` list of `{doc_id, text}` objects contributes to the map. */
export function passagesFromTrace(
  trace: InvocationRecord[],
): Map<string, string> {
  const passages = new Map<string, string>();
  for (const record of trace) {
    if (!record.output_snapshot || record.truncated) continue;
    let payload: unknown;
    try {
      payload = JSON.parse(record.output_snapshot);
    } catch {
      continue; // snapshots are best-effort debug data
    }
    const docs = (payload as { docs?: unknown }).docs;
    if (!Array.isArray(docs)) continue;
    for (const doc of docs) {
      const d = doc as { doc_id?: unknown; text?: unknown };
      if (typeof d.doc_id === "string" && typeof d.text === "string") {
        passages.set(d.doc_id, d.text);
      }
    }
  }
  return passages;
}
