// Wire-format types for the session service (see docs/formats.md).

export interface DataRefDoc {
  value: string;
  basis: string | null;
  quality: Record<string, number>;
}

export interface DatasetStateDoc {
  ref: DataRefDoc;
  state: "OK" | "NEEDED" | "UNAVAILABLE";
  reason: string;
}

export interface BasisDoc {
  id: string;
  kind: "space" | "time" | "group";
  reference: "absolute" | "relative";
  params: Record<string, unknown>;
}

export interface ValueDoc {
  id: string;
  variability: "const" | "var";
  unit: string;
  ontology_tags: string[];
}

export interface ScenarioDoc {
  id: string;
  package_seq: string[];
  extra_params: { name: string; source: string; binding: unknown }[];
  options: Record<string, unknown>;
}

export interface ModelDoc {
  id: string;
  enabled: boolean;
  selected_scenario: string;
  options: Record<string, unknown>;
  packages: string[];
  inputs: DataRefDoc[];
  outputs: DataRefDoc[];
  scenarios: ScenarioDoc[];
}

export interface EdgeDoc {
  from_model: string;
  to_model: string;
  data: DataRefDoc;
}

export interface CompositeDoc {
  vso_class: string;
  version: number;
  mode: string;
  bases: BasisDoc[];
  values: ValueDoc[];
  quality: { axes: { id: string; domain: string }[] };
  models: ModelDoc[];
  edges: EdgeDoc[];
  provenance: {
    bases: Record<string, string>;
    values: Record<string, string>;
    quality_axes: Record<string, string>;
    models: Record<string, string>;
    edges: [string, string, string, string, string][];
  };
  composition: { left: string; right: string };
  transitions: {
    id: string;
    shared_value: string;
    from_basis: string | null;
    to_basis: string | null;
    script: Record<string, unknown>;
  }[];
}

export interface StateDoc {
  format_version: number;
  session_id: string;
  mode: string;
  classes: string[];
  instances: Record<string, { params: Record<string, unknown>; missing: string[] }>;
  composite: CompositeDoc | null;
  enabled_models: string[];
  provided: { ref: DataRefDoc; source: string }[];
  dataset_states: DatasetStateDoc[];
  plan_count: number | null;
  runs: string[];
}

export interface PlanDoc {
  models: [string, string][];
  edges: EdgeDoc[];
  provided: DataRefDoc[];
  produced: DataRefDoc[];
  score: number;
}

export interface PlansDoc {
  format_version: number;
  plans: PlanDoc[];
  truncated: boolean;
}

export interface RunValueDoc {
  ref: DataRefDoc;
  payload: unknown;
  quality: Record<string, number>;
}

export interface RunResultDoc {
  format_version: number;
  run_id: string;
  status: "succeeded" | "failed";
  values: RunValueDoc[];
  trace: { block: string; start: string; end: string; status: string }[];
  failure: { block: string; error: string } | null;
  kind?: string;
}

export interface TaskRequestDoc {
  format_version: number;
  mode: string;
  provided: { ref: DataRefDoc; payload: unknown; quality?: Record<string, number>; source?: string }[];
  requested: DataRefDoc[];
  params: Record<string, unknown>;
}

export interface ErrorDoc {
  code: string;
  path: string;
  message: string;
}

export function refLabel(ref: DataRefDoc): string {
  return ref.basis ? `${ref.value}@${ref.basis}` : ref.value;
}
