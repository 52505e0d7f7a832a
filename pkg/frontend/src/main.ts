/** Page wiring: glue between the DOM, the service client, and the pure
 * state/render modules. */

import { ApiError, annotate, fetchHealth, fetchSchema } from "./api.js";
import { downloadAnnotation } from "./export.js";
import { renderHighlights } from "./highlight.js";
import {
  ViewState,
  beginSubmit,
  canExport,
  canSubmit,
  initialState,
  mentionDetail,
  selectMention,
  setBackend,
  setNote,
  setRelations,
  submitFailed,
  submitSucceeded,
  tasks,
} from "./state.js";

const BASE = "";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const noteInput = el<HTMLTextAreaElement>("note");
const relationsToggle = el<HTMLInputElement>("with-relations");
const submitButton = el<HTMLButtonElement>("submit");
const exportButton = el<HTMLButtonElement>("export");
const bannerBox = el<HTMLDivElement>("banner");
const statusDot = el<HTMLSpanElement>("backend-status");
const legendBox = el<HTMLDivElement>("legend");
const viewBox = el<HTMLDivElement>("view");
const detailBox = el<HTMLDivElement>("detail");

let state: ViewState = initialState();
let inflight: AbortController | null = null;

function apply(next: ViewState): void {
  state = next;
  render();
}

function render(): void {
  submitButton.disabled = !canSubmit(state);
  submitButton.textContent = state.busy ? "Annotating…" : "Annotate";
  exportButton.disabled = !canExport(state);

  bannerBox.textContent = state.banner ?? "";
  bannerBox.hidden = state.banner === null;

  statusDot.dataset.state = state.backend;
  statusDot.title = `backend: ${state.backend}`;

  if (state.response) {
    viewBox.innerHTML = renderHighlights(
      state.note,
      state.response.annotation,
      state.selected,
    );
  }
  renderDetail();
}

function renderDetail(): void {
  detailBox.innerHTML = "";
  if (!state.selected) return;
  const detail = mentionDetail(state, state.selected);
  if (!detail) return;

  const { mention, related } = detail;
  const head = document.createElement("div");
  head.className = "detail-head";
  head.textContent =
    `${mention.type} (${mention.kind}) [${mention.start}, ${mention.end}) ` +
    `"${mention.surface}"`;
  detailBox.appendChild(head);

  for (const row of related) {
    const line = document.createElement("div");
    line.className = "relation-row";
    line.dataset.other = row.other.id;
    line.textContent =
      mention.kind === "main"
        ? `${row.label} → ${row.other.surface}`
        : `modifies → ${row.other.surface}`;
    line.addEventListener("mouseenter", () =>
      setLinked([mention.id, row.other.id], true),
    );
    line.addEventListener("mouseleave", () =>
      setLinked([mention.id, row.other.id], false),
    );
    line.addEventListener("click", () =>
      apply(selectMention(state, row.other.id)),
    );
    detailBox.appendChild(line);
  }
}

function setLinked(ids: string[], on: boolean): void {
  for (const id of ids) {
    viewBox
      .querySelectorAll(`mark[data-id="${CSS.escape(id)}"]`)
      .forEach((node) => node.classList.toggle("linked", on));
  }
}

async function runAnnotate(): Promise<void> {
  if (!canSubmit(state)) return;
  inflight?.abort();
  inflight = new AbortController();
  apply(beginSubmit(state));
  try {
    const { data, raw } = await annotate(
      BASE,
      state.note,
      tasks(state),
      inflight.signal,
    );
    apply(submitSucceeded(state, data, raw));
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") return;
    const message =
      err instanceof ApiError
        ? err.message
        : `service unreachable: ${String(err)}`;
    apply(submitFailed(state, message));
    void refreshHealth();
  }
}

async function refreshHealth(): Promise<void> {
  try {
    const health = await fetchHealth(BASE);
    apply(setBackend(state, health.backend_reachable));
  } catch {
    apply(setBackend(state, false));
  }
}

async function buildLegend(): Promise<void> {
  try {
    const schema = await fetchSchema(BASE);
    legendBox.innerHTML = "";
    for (const t of schema.main_types) {
      const item = document.createElement("span");
      item.className = `legend-item t-${t}`;
      item.textContent = t;
      legendBox.appendChild(item);
    }
    const mod = document.createElement("span");
    mod.className = "legend-item mod";
    mod.textContent = "modifier";
    legendBox.appendChild(mod);
  } catch {
    // legend is cosmetic; the page works without it
  }
}

noteInput.addEventListener("input", () =>
  apply(setNote(state, noteInput.value)),
);
relationsToggle.addEventListener("change", () =>
  apply(setRelations(state, relationsToggle.checked)),
);
submitButton.addEventListener("click", () => void runAnnotate());
exportButton.addEventListener("click", () => {
  if (state.response) downloadAnnotation(state.response.annotation);
});

viewBox.addEventListener("click", (event) => {
  const mark = (event.target as HTMLElement).closest("mark[data-id]");
  apply(selectMention(state, mark?.getAttribute("data-id") ?? null));
});
viewBox.addEventListener("mouseover", (event) => {
  const mark = (event.target as HTMLElement).closest("mark[data-id]");
  if (!mark) return;
  const linked = (
    mark.getAttribute("data-mains") ??
    mark.getAttribute("data-modifiers") ??
    ""
  )
    .split(" ")
    .filter(Boolean);
  setLinked([mark.getAttribute("data-id") ?? "", ...linked], true);
});
viewBox.addEventListener("mouseout", () => {
  viewBox
    .querySelectorAll("mark.linked")
    .forEach((node) => node.classList.remove("linked"));
});

void buildLegend();
void refreshHealth();
window.setInterval(() => void refreshHealth(), 30_000);
render();
