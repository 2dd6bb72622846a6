// Pure view-model construction: a service state document becomes object
// panels (header, bases pane, parameters pane, models graph) with dataset
// markers and cross-panel transition links. No DOM access here, so every
// piece is unit-testable and the rendered canvas is a pure function of the
// server state.

import {
  refLabel,
  type CompositeDoc,
  type DataRefDoc,
  type DatasetStateDoc,
  type ModelDoc,
  type RunResultDoc,
  type StateDoc,
} from "./types.js";

export type Marker = "OK" | "?" | "X";

export interface DatasetBlockView {
  label: string;
  value: string;
  basis: string | null;
  marker: Marker;
  reason: string;
  source: string | null; // simulation | storage | user, when declared
  role: "input" | "output";
}

export interface ModelView {
  id: string;
  enabled: boolean;
  transition: boolean;
  scenario: string;
  scenarios: string[];
  depth: number;
  inputs: DatasetBlockView[];
  outputs: DatasetBlockView[];
  runValue?: { label: string; payload: unknown }[];
  failed?: boolean;
}

export interface BasisView {
  id: string;
  kind: string;
  reference: string;
  params: Record<string, unknown>;
}

export interface ParameterView {
  value: string;
  unit: string;
  marker: Marker;
  reason: string;
  source: string | null;
  set: boolean;
}

export interface ObjectPanelView {
  name: string;
  mode: string;
  bases: BasisView[];
  parameters: ParameterView[];
  models: ModelView[];
  layers: string[][]; // model ids by topological depth, left to right
}

export interface TransitionLinkView {
  id: string;
  sharedValue: string;
  fromBasis: string | null;
  toBasis: string | null;
  enabled: boolean;
  needsPackage: boolean;
  marker: Marker;
}

export interface CanvasView {
  sessionId: string;
  mode: string;
  panels: ObjectPanelView[];
  transitions: TransitionLinkView[];
  markers: Record<string, Marker>;
  blockers: string[];
}

export function markerFor(state: DatasetStateDoc["state"]): Marker {
  if (state === "OK") return "OK";
  if (state === "UNAVAILABLE") return "X";
  return "?";
}

export function markerIndex(states: DatasetStateDoc[]): Record<string, Marker> {
  const index: Record<string, Marker> = {};
  for (const s of states) {
    index[refLabel(s.ref)] = markerFor(s.state);
  }
  return index;
}

function reasonIndex(states: DatasetStateDoc[]): Record<string, string> {
  const index: Record<string, string> = {};
  for (const s of states) {
    index[refLabel(s.ref)] = s.reason;
  }
  return index;
}

export function modelDepths(modelIds: string[], edges: CompositeDoc["edges"]): Record<string, number> {
  // Longest-path layering over the subgraph induced by modelIds; cycles in
  // the stored graph are tolerated by capping iterations.
  const ids = new Set(modelIds);
  const depth: Record<string, number> = {};
  for (const id of modelIds) depth[id] = 0;
  const relevant = edges.filter((e) => ids.has(e.from_model) && ids.has(e.to_model));
  for (let pass = 0; pass < modelIds.length + 1; pass += 1) {
    let changed = false;
    for (const e of relevant) {
      const candidate = (depth[e.from_model] ?? 0) + 1;
      if (candidate > (depth[e.to_model] ?? 0) && candidate <= modelIds.length) {
        depth[e.to_model] = candidate;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return depth;
}

function datasetBlock(
  ref: DataRefDoc,
  role: "input" | "output",
  markers: Record<string, Marker>,
  reasons: Record<string, string>,
  sources: Record<string, string>,
): DatasetBlockView {
  const label = refLabel(ref);
  return {
    label,
    value: ref.value,
    basis: ref.basis,
    marker: markers[label] ?? "?",
    reason: reasons[label] ?? "",
    source: sources[label] ?? null,
    role,
  };
}

function isTransition(composite: CompositeDoc, model: ModelDoc): boolean {
  return composite.provenance.models[model.id] === "transition";
}

export function buildCanvas(state: StateDoc, run?: RunResultDoc | null): CanvasView {
  const composite = state.composite;
  const blockers: string[] = [];
  if (!composite) {
    return {
      sessionId: state.session_id,
      mode: state.mode,
      panels: [],
      transitions: [],
      markers: {},
      blockers,
    };
  }
  const markers = markerIndex(state.dataset_states);
  const reasons = reasonIndex(state.dataset_states);
  const sources: Record<string, string> = {};
  for (const entry of state.provided) {
    sources[refLabel(entry.ref)] = entry.source;
  }
  const enabled = new Set(state.enabled_models);
  const runValues = new Map<string, { label: string; payload: unknown }[]>();
  const failedBlocks = new Set<string>();
  if (run && run.values) {
    for (const v of run.values) {
      for (const model of composite.models) {
        if (model.outputs.some((o) => refLabel(o) === refLabel(v.ref))) {
          const bucket = runValues.get(model.id) ?? [];
          bucket.push({ label: refLabel(v.ref), payload: v.payload });
          runValues.set(model.id, bucket);
        }
      }
    }
  }
  if (run && run.failure) {
    failedBlocks.add(run.failure.block);
  }

  const sides: Record<string, string[]> = { left: [], right: [] };
  const transitionModels: ModelDoc[] = [];
  for (const model of composite.models) {
    const side = composite.provenance.models[model.id] ?? "left";
    if (side === "transition") {
      transitionModels.push(model);
    } else {
      (sides[side] = sides[side] ?? []).push(model.id);
    }
  }

  const panelSpecs: { name: string; side: string; modelIds: string[] }[] = [];
  const leftIds = sides["left"] ?? [];
  const rightIds = sides["right"] ?? [];
  if (leftIds.length || !rightIds.length) {
    panelSpecs.push({
      name: composite.composition.left || composite.vso_class,
      side: "left",
      modelIds: leftIds,
    });
  }
  if (rightIds.length) {
    panelSpecs.push({
      name: composite.composition.right || composite.vso_class,
      side: "right",
      modelIds: rightIds,
    });
  }

  const modelById = new Map(composite.models.map((m) => [m.id, m]));

  const panels: ObjectPanelView[] = panelSpecs.map(({ name, side, modelIds }) => {
    const depths = modelDepths(modelIds, composite.edges);
    const models: ModelView[] = modelIds.map((id) => {
      const m = modelById.get(id)!;
      return {
        id,
        enabled: enabled.has(id),
        transition: false,
        scenario: m.selected_scenario,
        scenarios: m.scenarios.map((s) => s.id),
        depth: depths[id] ?? 0,
        inputs: m.inputs.map((r) => datasetBlock(r, "input", markers, reasons, sources)),
        outputs: m.outputs.map((r) => datasetBlock(r, "output", markers, reasons, sources)),
        runValue: runValues.get(id),
        failed: failedBlocks.has(id),
      };
    });
    const maxDepth = Math.max(0, ...models.map((m) => m.depth));
    const layers: string[][] = Array.from({ length: maxDepth + 1 }, () => []);
    for (const m of models.slice().sort((a, b) => a.id.localeCompare(b.id))) {
      layers[m.depth]!.push(m.id);
    }
    const bases: BasisView[] = composite.bases
      .filter((b) => (composite.provenance.bases[b.id] ?? "left") === side)
      .map((b) => ({ id: b.id, kind: b.kind, reference: b.reference, params: b.params }));
    const parameters: ParameterView[] = composite.values
      .filter(
        (v) => v.variability === "const" && (composite.provenance.values[v.id] ?? "left") === side,
      )
      .map((v) => {
        const entry = state.dataset_states.find((s) => s.ref.value === v.id);
        const label = entry ? refLabel(entry.ref) : v.id;
        return {
          value: v.id,
          unit: v.unit,
          marker: entry ? markerFor(entry.state) : "?",
          reason: entry ? entry.reason : "not referenced",
          source: sources[label] ?? null,
          set: Object.values(state.instances).some((inst) => v.id in inst.params),
        };
      });
    return { name, mode: state.mode, bases, parameters, models, layers };
  });

  const transitions: TransitionLinkView[] = transitionModels.map((m) => {
    const meta = composite.transitions.find((t) => t.id === m.id);
    const outLabel = m.outputs[0] ? refLabel(m.outputs[0]) : "";
    return {
      id: m.id,
      sharedValue: meta?.shared_value ?? m.id,
      fromBasis: meta?.from_basis ?? null,
      toBasis: meta?.to_basis ?? null,
      enabled: enabled.has(m.id),
      needsPackage: m.selected_scenario === "needs_package",
      marker: markers[outLabel] ?? "?",
    };
  });

  return {
    sessionId: state.session_id,
    mode: state.mode,
    panels,
    transitions,
    markers,
    blockers,
  };
}

export function renderedMarkers(view: CanvasView): Record<string, Marker> {
  // The markers a user actually sees: every dataset block on every panel.
  // The fidelity test compares this against GET /state.
  const seen: Record<string, Marker> = {};
  for (const panel of view.panels) {
    for (const model of panel.models) {
      for (const block of [...model.inputs, ...model.outputs]) {
        seen[block.label] = block.marker;
      }
    }
  }
  return seen;
}
