import { describe, expect, it, vi } from "vitest";

import {
  codePointIndex,
  escapeHtml,
  renderHighlights,
  sliceCodePoints,
} from "../src/highlight.js";
import type { Annotation, Mention } from "../src/types.js";

function ann(
  mentions: Mention[],
  relations: Annotation["relations"] = [],
): Annotation {
  return { doc_id: "t", schema_version: 1, mentions, relations };
}

/** Strip badges and tags; what is left must be the escaped note text. */
function visibleText(html: string): string {
  return html
    .replace(/<span class="badge">[^<]*<\/span>/g, "")
    .replace(/<[^>]+>/g, "");
}

describe("codePointIndex", () => {
  it("maps code points to UTF-16 offsets", () => {
    expect(codePointIndex("abc")).toEqual([0, 1, 2, 3]);
    // the thermometer is one code point but two UTF-16 units
    expect(codePointIndex("🌡a")).toEqual([0, 2, 3]);
    expect(codePointIndex("")).toEqual([0]);
  });

  it("slices by code point, not UTF-16 unit", () => {
    const text = "🌡 fièvre et frissons .";
    const map = codePointIndex(text);
    expect(sliceCodePoints(text, map, 2, 8)).toBe("fièvre");
    expect(sliceCodePoints(text, map, 0, 1)).toBe("🌡");
    // a naive slice lands one unit short
    expect(text.slice(2, 8)).not.toBe("fièvre");
  });
});

describe("escapeHtml", () => {
  it("escapes the four HTML-significant characters", () => {
    expect(escapeHtml('a < b & c > "d"')).toBe(
      "a &lt; b &amp; c &gt; &quot;d&quot;",
    );
  });
});

describe("renderHighlights", () => {
  const NOTE = "Hgb 10.6 gm / dL was stable .";
  const HGB = ann(
    [
      { id: "T1", kind: "main", type: "test", start: 0, end: 3, surface: "Hgb" },
      {
        id: "T2",
        kind: "modifier",
        type: "labvalue",
        start: 4,
        end: 16,
        surface: "10.6 gm / dL",
      },
    ],
    [{ main: "T1", modifier: "T2", label: "labvalue" }],
  );

  it("marks a test mention and its linked value badge", () => {
    const html = renderHighlights(NOTE, HGB);
    expect(html).toBe(
      '<mark class="ent main t-test" data-id="T1" data-kind="main" ' +
        'data-type="test" data-modifiers="T2">Hgb</mark> ' +
        '<mark class="ent mod t-labvalue" data-id="T2" data-kind="modifier" ' +
        'data-type="labvalue" data-mains="T1">' +
        '<span class="badge">labvalue</span>10.6 gm / dL</mark>' +
        " was stable .",
    );
  });

  it("preserves the note text around and inside the marks", () => {
    expect(visibleText(renderHighlights(NOTE, HGB))).toBe(NOTE);
  });

  it("flags the selected mention", () => {
    const html = renderHighlights(NOTE, HGB, "T1");
    expect(html).toContain('class="ent main t-test selected"');
    expect(html).not.toContain("t-labvalue selected");
  });

  it("keeps offsets honest past astral characters", () => {
    const text = "🌡 fièvre et frissons .";
    const html = renderHighlights(
      text,
      ann([
        {
          id: "P1",
          kind: "main",
          type: "problem",
          start: 2,
          end: 8,
          surface: "fièvre",
        },
      ]),
    );
    expect(html).toContain(">fièvre</mark>");
    expect(html.startsWith("🌡 <mark")).toBe(true);
    expect(visibleText(html)).toBe(text);
  });

  it("nests a modifier lying inside its main entity", () => {
    const text = "pain in left arm today";
    const html = renderHighlights(
      text,
      ann(
        [
          {
            id: "M1",
            kind: "main",
            type: "problem",
            start: 0,
            end: 16,
            surface: "pain in left arm",
          },
          {
            id: "M2",
            kind: "modifier",
            type: "bodyloc",
            start: 8,
            end: 16,
            surface: "left arm",
          },
        ],
        [{ main: "M1", modifier: "M2", label: "bodyloc" }],
      ),
    );
    // the modifier mark sits inside the main mark
    expect(html).toMatch(
      /<mark class="ent main t-problem"[^>]*>pain in <mark class="ent mod t-bodyloc"[^>]*><span class="badge">bodyloc<\/span>left arm<\/mark><\/mark> today/,
    );
    expect(visibleText(html)).toBe(text);
  });

  it("escapes markup hiding in the note or the surface", () => {
    const text = 'BP <120> & "ok"';
    const html = renderHighlights(
      text,
      ann([
        { id: "X1", kind: "main", type: "test", start: 3, end: 8, surface: "<120>" },
      ]),
    );
    expect(html).toContain(">&lt;120&gt;</mark>");
    expect(html).toContain("&amp; &quot;ok&quot;");
    expect(visibleText(html)).toBe(escapeHtml(text));
  });

  it("drops overlapping mentions instead of emitting broken markup", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    try {
      const text = "abcdefghij";
      const html = renderHighlights(
        text,
        ann([
          { id: "A", kind: "main", type: "problem", start: 0, end: 5, surface: "abcde" },
          { id: "B", kind: "main", type: "drug", start: 3, end: 8, surface: "defgh" },
        ]),
      );
      expect(html).toContain('data-id="A"');
      expect(html).not.toContain('data-id="B"');
      expect(visibleText(html)).toBe(text);
      expect(warn).toHaveBeenCalledOnce();
    } finally {
      warn.mockRestore();
    }
  });

  it("drops a modifier that crosses a main boundary", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    try {
      const text = "abcdefghij";
      const html = renderHighlights(
        text,
        ann([
          { id: "A", kind: "main", type: "problem", start: 0, end: 5, surface: "abcde" },
          { id: "B", kind: "modifier", type: "severity", start: 3, end: 8, surface: "defgh" },
        ]),
      );
      expect(html).not.toContain('data-id="B"');
      expect(visibleText(html)).toBe(text);
      expect(warn).toHaveBeenCalledOnce();
    } finally {
      warn.mockRestore();
    }
  });

  it("renders adjacent free modifiers without relations", () => {
    const text = "no fever";
    const html = renderHighlights(
      text,
      ann(
        [
          { id: "N", kind: "modifier", type: "negation", start: 0, end: 2, surface: "no" },
          { id: "F", kind: "main", type: "problem", start: 3, end: 8, surface: "fever" },
        ],
        [{ main: "F", modifier: "N", label: "negation" }],
      ),
    );
    expect(html).toContain('data-mains="F"');
    expect(html).toContain('data-modifiers="N"');
    expect(visibleText(html)).toBe(text);
  });

  it("handles an empty annotation", () => {
    expect(renderHighlights("just text", ann([]))).toBe("just text");
    expect(renderHighlights("", ann([]))).toBe("");
  });
});
