/** View state and its transitions, kept pure so they are testable
 * without a DOM. The page applies the returned state, it never mutates. */

import type { AnnotateResponse, Mention, Task } from "./types.js";

export interface ViewState {
  note: string;
  withRelations: boolean;
  response: AnnotateResponse | null;
  /** Raw body text of `response`, byte-faithful for export. */
  responseRaw: string | null;
  selected: string | null;
  busy: boolean;
  banner: string | null;
  backend: "unknown" | "ok" | "down";
}

export function initialState(): ViewState {
  return {
    note: "",
    withRelations: true,
    response: null,
    responseRaw: null,
    selected: null,
    busy: false,
    banner: null,
    backend: "unknown",
  };
}

export function tasks(state: ViewState): Task[] {
  return state.withRelations ? ["ner", "re"] : ["ner"];
}

export function canSubmit(state: ViewState): boolean {
  return state.note.trim().length > 0 && !state.busy;
}

export function canExport(state: ViewState): boolean {
  return state.response !== null;
}

export function setNote(state: ViewState, note: string): ViewState {
  // typing does not clear the previous result; it stays until the next run
  return { ...state, note };
}

export function setRelations(state: ViewState, on: boolean): ViewState {
  return { ...state, withRelations: on };
}

export function setBackend(
  state: ViewState,
  up: boolean | null,
): ViewState {
  return { ...state, backend: up === null ? "unknown" : up ? "ok" : "down" };
}

export function beginSubmit(state: ViewState): ViewState {
  return { ...state, busy: true, banner: null };
}

export function submitSucceeded(
  state: ViewState,
  response: AnnotateResponse,
  raw: string,
): ViewState {
  return {
    ...state,
    busy: false,
    banner: null,
    response,
    responseRaw: raw,
    selected: null,
  };
}

/** Failures keep whatever was on screen and explain themselves in a
 * banner instead. */
export function submitFailed(state: ViewState, message: string): ViewState {
  return { ...state, busy: false, banner: message };
}

export function mentionById(
  state: ViewState,
  id: string | null,
): Mention | null {
  if (id === null || state.response === null) return null;
  return (
    state.response.annotation.mentions.find((m) => m.id === id) ?? null
  );
}

/** Selection only ever points into the current response. */
export function selectMention(
  state: ViewState,
  id: string | null,
): ViewState {
  return { ...state, selected: mentionById(state, id)?.id ?? null };
}

export interface RelationDetail {
  label: string;
  other: Mention;
}

export interface MentionDetail {
  mention: Mention;
  /** Modifiers of a main; owning mains of a modifier. */
  related: RelationDetail[];
}

export function mentionDetail(
  state: ViewState,
  id: string,
): MentionDetail | null {
  const mention = mentionById(state, id);
  if (mention === null || state.response === null) return null;
  const related: RelationDetail[] = [];
  for (const r of state.response.annotation.relations) {
    const otherId =
      mention.kind === "main"
        ? r.main === mention.id
          ? r.modifier
          : null
        : r.modifier === mention.id
          ? r.main
          : null;
    if (otherId === null) continue;
    const other = mentionById(state, otherId);
    if (other) related.push({ label: r.label, other });
  }
  return { mention, related };
}
