/** End-to-end checks against a live annotation service.
 *
 * Spawns the Python service with the offline mock backend, drives it
 * over HTTP exactly as the page does, and verifies the rendered
 * highlights and the exported bytes against it.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { annotate, fetchHealth, fetchSchema } from "../src/api.js";
import { canonicalAnnotationJson } from "../src/export.js";
import { renderHighlights } from "../src/highlight.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const LEXICON = join(HERE, "fixtures", "lexicon.json");
const STARTUP_MS = 60_000;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

/** Python's canonical serialization of the same object, for byte
 * comparison with the page's export path. */
function pythonCanonical(value: unknown): string {
  return execFileSync(
    "python3",
    [
      "-c",
      "import sys, json\n" +
        "obj = json.load(sys.stdin)\n" +
        "sys.stdout.write(json.dumps(obj, sort_keys=True, " +
        "ensure_ascii=False, separators=(',', ':')) + '\\n')\n",
    ],
    { input: JSON.stringify(value), encoding: "utf8" },
  );
}

let service: ChildProcess | null = null;
let base = "";
let stderr = "";

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  service = spawn("python3", ["-m", "kiwi.service"], {
    env: {
      ...process.env,
      KIWI_BACKEND_URL: `mock:${LEXICON}`,
      KIWI_HOST: "127.0.0.1",
      KIWI_PORT: String(port),
    },
    stdio: ["ignore", "ignore", "pipe"],
  });
  service.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });

  const deadline = Date.now() + STARTUP_MS;
  for (;;) {
    if (service.exitCode !== null) {
      throw new Error(`service exited early (${service.exitCode}): ${stderr}`);
    }
    try {
      const health = await fetchHealth(base);
      if (health.status === "ok" && health.backend_reachable) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up in time: ${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
}, STARTUP_MS + 5_000);

afterAll(() => {
  service?.kill("SIGTERM");
});

describe("live service", () => {
  const NOTE = "Hgb 10.6 gm / dL was stable .";

  it("annotates the lab-value note with linked mentions", async () => {
    const { data } = await annotate(base, NOTE, ["ner", "re"]);
    expect(data.annotation).toEqual({
      doc_id: "request",
      schema_version: 1,
      mentions: [
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
      relations: [{ main: "T1", modifier: "T2", label: "labvalue" }],
    });
    expect(data.diagnostics).toEqual([]);
  });

  it("renders the response as a test highlight with a linked value badge", async () => {
    const { data } = await annotate(base, NOTE, ["ner", "re"]);
    const html = renderHighlights(NOTE, data.annotation);
    expect(html).toContain(
      '<mark class="ent main t-test" data-id="T1" data-kind="main" ' +
        'data-type="test" data-modifiers="T2">Hgb</mark>',
    );
    expect(html).toContain(
      '<mark class="ent mod t-labvalue" data-id="T2" data-kind="modifier" ' +
        'data-type="labvalue" data-mains="T1">' +
        '<span class="badge">labvalue</span>10.6 gm / dL</mark>',
    );
  });

  it("exports the annotation byte-identically to the service", async () => {
    const { data, raw } = await annotate(base, NOTE, ["ner", "re"]);
    const exported = canonicalAnnotationJson(data.annotation);
    // same bytes the reference serializer produces for this object
    expect(exported).toBe(pythonCanonical(data.annotation));
    // and verbatim what the service put on the wire
    expect(raw).toContain(exported.trimEnd());
  });

  it("keeps highlight offsets honest on a non-ASCII note", async () => {
    const note = "🌡 fièvre et frissons .";
    const { data } = await annotate(base, note, ["ner", "re"]);
    expect(data.annotation.mentions).toEqual([
      {
        id: "T1",
        kind: "main",
        type: "problem",
        start: 2,
        end: 8,
        surface: "fièvre",
      },
    ]);
    const html = renderHighlights(note, data.annotation);
    expect(html).toContain(">fièvre</mark>");
    expect(html.startsWith("🌡 <mark")).toBe(true);
    expect(canonicalAnnotationJson(data.annotation)).toBe(
      pythonCanonical(data.annotation),
    );
  });

  it("honors an ner-only request", async () => {
    const { data } = await annotate(base, NOTE, ["ner"]);
    expect(data.annotation.mentions.map((m) => m.kind)).toEqual(["main"]);
    expect(data.annotation.relations).toEqual([]);
  });

  it("describes the schema the page builds its legend from", async () => {
    const schema = await fetchSchema(base);
    expect(schema.main_types).toEqual(["problem", "test", "drug", "treatment"]);
    expect(schema.modifier_types).toContain("labvalue");
    expect(schema.relations["test"] ?? []).toContain("labvalue");
  });

  it("reports a healthy backend with the template fingerprint", async () => {
    const health = await fetchHealth(base);
    expect(health.status).toBe("ok");
    expect(health.backend_reachable).toBe(true);
    expect(health.template_version).toMatch(/^[0-9a-f]{12}$/);
  });

  it("surfaces a typed error for empty text", async () => {
    await expect(annotate(base, "   ", ["ner"])).rejects.toMatchObject({
      status: 422,
    });
  });
});
