/** Wire types for the annotation service (all offsets are Unicode
 * code-point indices into the submitted note, not UTF-16 units). */

export interface Mention {
  id: string;
  kind: "main" | "modifier";
  type: string;
  start: number;
  end: number;
  surface: string;
}

export interface RelationRow {
  main: string;
  modifier: string;
  label: string;
}

export interface Annotation {
  doc_id: string;
  schema_version: number;
  mentions: Mention[];
  relations: RelationRow[];
}

export interface Diagnostic {
  stage: string;
  sentence_start: number;
  kind: string;
  detail: string;
}

export interface AnnotateResponse {
  annotation: Annotation;
  diagnostics: Diagnostic[];
  timings: Record<string, number>;
}

export interface SchemaResponse {
  main_types: string[];
  modifier_types: string[];
  relations: Record<string, string[]>;
}

export interface HealthResponse {
  status: string;
  backend_reachable: boolean;
  template_version: string;
}

export type Task = "ner" | "re";
