/** Pure HTML renderer for an annotated note.
 *
 * The service reports span offsets as Unicode code-point indices into
 * the note. JavaScript strings index UTF-16 units, so every slice goes
 * through an explicit code-point -> UTF-16 map; astral characters in
 * the note must never shift a highlight.
 */

import type { Annotation, Mention } from "./types.js";

/** utf16[i] = UTF-16 index of code point i; one extra entry for the end. */
export function codePointIndex(text: string): number[] {
  const utf16: number[] = [];
  let unit = 0;
  for (const ch of text) {
    utf16.push(unit);
    unit += ch.length;
  }
  utf16.push(text.length);
  return utf16;
}

export function sliceCodePoints(
  text: string,
  map: number[],
  start: number,
  end: number,
): string {
  const lo = map[Math.min(start, map.length - 1)] ?? text.length;
  const hi = map[Math.min(end, map.length - 1)] ?? text.length;
  return text.slice(lo, hi);
}

export function escapeHtml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

interface PlacedMain {
  mention: Mention;
  children: Mention[];
}

/** Sort by start, earliest first; ties widest first so a would-be
 * container precedes its contents. */
function byPosition(a: Mention, b: Mention): number {
  return a.start - b.start || b.end - a.end;
}

/** Keep a non-overlapping prefix-greedy subset; anything else cannot be
 * drawn as flat marks. */
function dropOverlaps(sorted: Mention[], context: string): Mention[] {
  const kept: Mention[] = [];
  let cursor = -1;
  for (const m of sorted) {
    if (m.start < cursor) {
      console.warn(`highlight: dropping ${m.id} (overlap in ${context})`);
      continue;
    }
    kept.push(m);
    cursor = m.end;
  }
  return kept;
}

/**
 * Render the note with `<mark>` highlights for every mention.
 *
 * Main entities get one of four type-keyed styles; modifiers render
 * with a badge naming their class. A modifier lying fully inside a main
 * entity's span nests inside that main's mark. Relation endpoints are
 * wired up through data-mains / data-modifiers attributes so the page
 * can link them on hover without re-walking the annotation.
 */
export function renderHighlights(
  text: string,
  annotation: Annotation,
  selectedId: string | null = null,
): string {
  const map = codePointIndex(text);

  const mainsOf = new Map<string, string[]>();
  const modifiersOf = new Map<string, string[]>();
  for (const r of annotation.relations) {
    mainsOf.set(r.modifier, [...(mainsOf.get(r.modifier) ?? []), r.main]);
    modifiersOf.set(r.main, [...(modifiersOf.get(r.main) ?? []), r.modifier]);
  }

  const mains = dropOverlaps(
    annotation.mentions.filter((m) => m.kind === "main").sort(byPosition),
    "main layer",
  );
  const placed: PlacedMain[] = mains.map((m) => ({ mention: m, children: [] }));

  const free: Mention[] = [];
  for (const mod of annotation.mentions.filter((m) => m.kind === "modifier")) {
    const host = placed.find(
      (p) => p.mention.start <= mod.start && mod.end <= p.mention.end,
    );
    if (host) {
      host.children.push(mod);
    } else if (
      mains.some((m) => mod.start < m.end && m.start < mod.end)
    ) {
      // partially crosses a main boundary; flat markup cannot show it
      console.warn(`highlight: dropping ${mod.id} (crosses a main boundary)`);
    } else {
      free.push(mod);
    }
  }

  const attrs = (m: Mention): string => {
    const linked =
      m.kind === "main" ? modifiersOf.get(m.id) : mainsOf.get(m.id);
    const linkAttr = m.kind === "main" ? "data-modifiers" : "data-mains";
    const selected = m.id === selectedId ? " selected" : "";
    return (
      `class="ent ${m.kind === "main" ? "main" : "mod"} ` +
      `t-${escapeHtml(m.type)}${selected}" ` +
      `data-id="${escapeHtml(m.id)}" data-kind="${m.kind}" ` +
      `data-type="${escapeHtml(m.type)}" ` +
      `${linkAttr}="${escapeHtml((linked ?? []).join(" "))}"`
    );
  };

  const renderModifier = (m: Mention): string =>
    `<mark ${attrs(m)}><span class="badge">${escapeHtml(m.type)}</span>` +
    `${escapeHtml(sliceCodePoints(text, map, m.start, m.end))}</mark>`;

  const renderMain = (p: PlacedMain): string => {
    const children = dropOverlaps(
      p.children.sort(byPosition),
      `modifiers of ${p.mention.id}`,
    );
    let inner = "";
    let cursor = p.mention.start;
    for (const child of children) {
      inner += escapeHtml(sliceCodePoints(text, map, cursor, child.start));
      inner += renderModifier(child);
      cursor = child.end;
    }
    inner += escapeHtml(sliceCodePoints(text, map, cursor, p.mention.end));
    return `<mark ${attrs(p.mention)}>${inner}</mark>`;
  };

  const top: Array<PlacedMain | Mention> = [
    ...placed,
    ...dropOverlaps(free.sort(byPosition), "free modifiers"),
  ].sort((a, b) => {
    const am = "mention" in a ? a.mention : a;
    const bm = "mention" in b ? b.mention : b;
    return byPosition(am, bm);
  });

  let html = "";
  let cursor = 0;
  for (const item of top) {
    const m = "mention" in item ? item.mention : item;
    if (m.start < cursor) {
      console.warn(`highlight: dropping ${m.id} (overlap across layers)`);
      continue;
    }
    html += escapeHtml(sliceCodePoints(text, map, cursor, m.start));
    html += "mention" in item ? renderMain(item) : renderModifier(item);
    cursor = m.end;
  }
  html += escapeHtml(sliceCodePoints(text, map, cursor, map.length - 1));
  return html;
}
