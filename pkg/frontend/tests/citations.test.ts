import { describe, expect, it } from "vitest";

import { citedRanks, parseMarkup } from "../src/citations.js";

describe("parseMarkup", () => {
  it("splits text, marks, bold spans, and links", () => {
    const tokens = parseMarkup("See [1] and **Guide** at <https://x.example/p> now [2].");
    expect(tokens).toEqual([
      { kind: "text", value: "See " },
      { kind: "mark", rank: 1 },
      { kind: "text", value: " and " },
      { kind: "bold", value: "Guide" },
      { kind: "text", value: " at " },
      { kind: "link", href: "https://x.example/p" },
      { kind: "text", value: " now " },
      { kind: "mark", rank: 2 },
      { kind: "text", value: "." },
    ]);
  });

  it("treats non-mark brackets as plain text", () => {
    const tokens = parseMarkup("see [appendix] or [1.5]");
    expect(tokens).toEqual([{ kind: "text", value: "see [appendix] or [1.5]" }]);
  });

  it("handles a reference-list line", () => {
    const tokens = parseMarkup("[3] **Widget Guide Three** - <https://widget03.example/guide>");
    expect(tokens[0]).toEqual({ kind: "mark", rank: 3 });
    expect(tokens).toContainEqual({ kind: "bold", value: "Widget Guide Three" });
    expect(tokens).toContainEqual({ kind: "link", href: "https://widget03.example/guide" });
  });
});

describe("citedRanks", () => {
  it("collects distinct ranks in first-seen order", () => {
    expect(citedRanks("A [2][1]. B [2].")).toEqual([2, 1]);
  });

  it("is empty for text without marks", () => {
    expect(citedRanks("no marks here")).toEqual([]);
  });
});
