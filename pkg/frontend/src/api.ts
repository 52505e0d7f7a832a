/** Thin client for the three service endpoints. */

import type {
  AnnotateResponse,
  HealthResponse,
  SchemaResponse,
  Task,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return response.statusText || "request failed";
}

/**
 * POST /api/v1/annotate.
 *
 * Returns the parsed payload together with the raw body text so callers
 * that care about exact bytes (the export path) never depend on a
 * re-serialization.
 */
export async function annotate(
  base: string,
  text: string,
  tasks: Task[],
  signal?: AbortSignal,
): Promise<{ data: AnnotateResponse; raw: string }> {
  const response = await fetch(`${base}/api/v1/annotate`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ text, tasks }),
    signal,
  });
  if (!response.ok) {
    throw new ApiError(response.status, await errorDetail(response));
  }
  const raw = await response.text();
  return { data: JSON.parse(raw) as AnnotateResponse, raw };
}

export async function fetchSchema(base: string): Promise<SchemaResponse> {
  const response = await fetch(`${base}/api/v1/schema`);
  if (!response.ok) {
    throw new ApiError(response.status, await errorDetail(response));
  }
  return (await response.json()) as SchemaResponse;
}

export async function fetchHealth(base: string): Promise<HealthResponse> {
  const response = await fetch(`${base}/healthz`);
  if (!response.ok) {
    throw new ApiError(response.status, await errorDetail(response));
  }
  return (await response.json()) as HealthResponse;
}
