/** Split a passage around an answer span given by character offsets.
 *
 * Offsets come verbatim from the gateway; they are clamped defensively so a
 * malformed record can never throw while rendering.
 */
export interface SpanSplit {
  before: string;
  span: string;
  after: string;
}

export function splitSpan(
  text: string,
  beginChar: number,
  endChar: number,
): SpanSplit {
  const begin = Math.max(0, Math.min(beginChar, text.length));
  const end = Math.max(begin, Math.min(endChar, text.length));
  return {
    before: text.slice(0, begin),
    span: text.slice(begin, end),
    after: text.slice(end),
  };
}
