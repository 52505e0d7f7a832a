/** Canonical annotation serialization for export.
 *
 * The batch tools write annotation files as UTF-8 JSON with sorted
 * keys, no spaces, and a trailing newline, so equal annotations are
 * equal bytes. The export path reproduces those bytes exactly from the
 * annotation object in the service response.
 */

import type { Annotation } from "./types.js";

function stringifySorted(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stringifySorted).join(",")}]`;
  }
  const record = value as Record<string, unknown>;
  const body = Object.keys(record)
    .sort()
    .map((k) => `${JSON.stringify(k)}:${stringifySorted(record[k])}`)
    .join(",");
  return `{${body}}`;
}

export function canonicalAnnotationJson(annotation: Annotation): string {
  return stringifySorted(annotation) + "\n";
}

export function exportFilename(annotation: Annotation): string {
  const stem = annotation.doc_id.replace(/[^\w.-]+/g, "_") || "annotation";
  return `${stem}.kiwi.json`;
}

/** Hand the canonical bytes to the browser as a file download. */
export function downloadAnnotation(annotation: Annotation): void {
  const blob = new Blob([canonicalAnnotationJson(annotation)], {
    type: "application/json",
  });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = exportFilename(annotation);
  anchor.click();
  URL.revokeObjectURL(url);
}
