// Pure HTML builders: every view is a string so the rendering logic is
// directly unit-testable; main.ts only assigns innerHTML.

import type { Answer, ErrorEnvelope } from "./types.js";
import { splitSpan } from "./highlight.js";
import type { BarGroup } from "./waterfall.js";
import type { MetricsRow } from "./metricsTable.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderAnswers(
  answers: Answer[],
  passages: Map<string, string>,
): string {
  if (answers.length === 0) {
    return '<p class="empty">no answers</p>';
  }
  const cards = answers.map((a, rank) => {
    const passage = passages.get(a.doc_id);
    let body: string;
    if (passage !== undefined) {
      const { before, span, after } = splitSpan(
        passage,
        a.begin_char,
        a.end_char,
      );
      body =
        `<p class="passage">${escapeHtml(before)}<mark>${escapeHtml(span)}</mark>` +
        `${escapeHtml(after)}</p>`;
    } else {
      body = `<p class="passage"><mark>${escapeHtml(a.text)}</mark></p>`;
    }
    return (
      `<article class="answer">` +
      `<header>#${rank + 1} <strong>${escapeHtml(a.text)}</strong>` +
      ` <span class="score">score ${a.score.toFixed(3)}</span>` +
      ` <span class="doc">${escapeHtml(a.doc_id)}</span></header>` +
      body +
      `</article>`
    );
  });
  return cards.join("\n");
}

export function renderError(envelope: ErrorEnvelope): string {
  const parts = [`<strong>${escapeHtml(envelope.code)}</strong>`];
  if (envelope.node) parts.push(`at ${escapeHtml(envelope.node)}`);
  parts.push(escapeHtml(envelope.message));
  if (envelope.chain && envelope.chain.length > 0) {
    parts.push(`(chain: ${envelope.chain.map(escapeHtml).join(" → ")})`);
  }
  return `<div class="banner error">${parts.join(" ")}</div>`;
}

export function renderConnectionError(): string {
  return (
    '<div class="banner error"><strong>gateway unreachable</strong>' +
    " — is the pipeline running?</div>"
  );
}

export function renderWaterfall(groups: BarGroup[]): string {
  if (groups.length === 0) {
    return '<p class="empty">no trace</p>';
  }
  const rows = groups.map((g) => {
    const bars = g.bars
      .map((b) => {
        const failed = b.status !== "ok" ? " failed" : "";
        const snapshots = [
          b.inputSnapshot === null
            ? "input: not captured"
            : `input: ${b.inputSnapshot}`,
          b.outputSnapshot === null
            ? "output: not captured"
            : `output: ${b.outputSnapshot}`,
        ].join("\n");
        return (
          `<div class="bar${failed}" style="margin-left:${b.startPct.toFixed(2)}%;` +
          `width:${b.widthPct.toFixed(2)}%" title="${escapeHtml(snapshots)}">` +
          `${escapeHtml(b.label)} ${b.durationMs.toFixed(1)}ms` +
          `${b.status !== "ok" ? ` [${escapeHtml(b.status)}]` : ""}</div>`
        );
      })
      .join("");
    const cls = g.fanout ? "group fanout" : "group";
    return (
      `<div class="${cls}"><span class="group-label">${escapeHtml(g.node)}` +
      `${g.fanout ? ` ×${g.bars.length}` : ""}</span>${bars}</div>`
    );
  });
  return rows.join("\n");
}

export function renderMetrics(rows: MetricsRow[], stale: boolean): string {
  const header =
    "<tr><th>node</th><th>count</th><th>p50 (ms)</th><th>p95 (ms)</th></tr>";
  const body = rows
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.node)}</td><td>${r.count}</td>` +
        `<td>${escapeHtml(r.p50)}</td><td>${escapeHtml(r.p95)}</td></tr>`,
    )
    .join("");
  const staleNote = stale
    ? '<p class="stale">metrics stale — last poll failed</p>'
    : "";
  return `${staleNote}<table>${header}${body}</table>`;
}
