/** Parsing of rendered agent text: citation marks and the display markup
 * subset (bold spans, angle-bracket links). Citation marks become anchors
 * that point at the result card with the same rank. */

export type MarkupToken =
  | { kind: "text"; value: string }
  | { kind: "mark"; rank: number }
  | { kind: "bold"; value: string }
  | { kind: "link"; href: string };

const TOKEN = /\[(\d+)\]|\*\*(.+?)\*\*|<(https?:\/\/[^>\s]+)>/g;

export function parseMarkup(text: string): MarkupToken[] {
  const tokens: MarkupToken[] = [];
  let last = 0;
  for (const match of text.matchAll(TOKEN)) {
    const index = match.index ?? 0;
    if (index > last) tokens.push({ kind: "text", value: text.slice(last, index) });
    if (match[1] !== undefined) tokens.push({ kind: "mark", rank: Number(match[1]) });
    else if (match[2] !== undefined) tokens.push({ kind: "bold", value: match[2] });
    else tokens.push({ kind: "link", href: match[3]! });
    last = index + match[0].length;
  }
  if (last < text.length) tokens.push({ kind: "text", value: text.slice(last) });
  return tokens;
}

/** Distinct card ranks cited in the text, in first-seen order. */
export function citedRanks(text: string): number[] {
  const ranks: number[] = [];
  for (const token of parseMarkup(text)) {
    if (token.kind === "mark" && !ranks.includes(token.rank)) ranks.push(token.rank);
  }
  return ranks;
}
