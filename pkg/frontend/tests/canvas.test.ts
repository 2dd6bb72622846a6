import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { buildCanvas, markerFor, markerIndex, modelDepths, renderedMarkers } from "../src/canvas.js";
import { renderCanvas, renderObjectPanel, renderDatasetBlock, escapeHtml } from "../src/render.js";
import { refLabel, type RunResultDoc, type StateDoc } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const goldenState = JSON.parse(
  readFileSync(join(here, "fixtures", "golden_state.json"), "utf-8"),
) as StateDoc;
const goldenRun = JSON.parse(
  readFileSync(join(here, "fixtures", "golden_run.json"), "utf-8"),
) as RunResultDoc;

describe("marker mapping", () => {
  it("maps dataset states to canvas markers", () => {
    expect(markerFor("OK")).toBe("OK");
    expect(markerFor("NEEDED")).toBe("?");
    expect(markerFor("UNAVAILABLE")).toBe("X");
  });

  it("indexes markers by ref label", () => {
    const index = markerIndex(goldenState.dataset_states);
    expect(index["wave_parameters@grid2d"]).toBe("X");
    expect(index["near_water_wind@grid2d"]).toBe("OK");
    expect(index["ship_params"]).toBe("OK"); // instance payload covers it
  });
});

describe("buildCanvas", () => {
  const view = buildCanvas(goldenState);

  it("builds one panel per source object", () => {
    expect(view.panels.map((p) => p.name)).toEqual(["sea", "ship"]);
  });

  it("panels carry all four panes worth of data", () => {
    const sea = view.panels[0]!;
    expect(sea.mode).toBe("analysis");
    expect(sea.bases.map((b) => b.id).sort()).toEqual(["forecast_time", "grid2d"]);
    expect(sea.parameters.map((p) => p.value)).toEqual(["bathymetry"]);
    expect(sea.models.map((m) => m.id).sort()).toEqual([
      "level_and_currents",
      "sea_waves",
      "spectrum_parameterization",
    ]);
    const ship = view.panels[1]!;
    expect(ship.parameters.map((p) => p.value)).toEqual(["ship_params"]);
    expect(ship.parameters[0]!.set).toBe(true);
  });

  it("marks the disabled model and its downstream dataset", () => {
    const sea = view.panels[0]!;
    const spectrum = sea.models.find((m) => m.id === "spectrum_parameterization")!;
    expect(spectrum.enabled).toBe(false);
    expect(spectrum.outputs[0]!.marker).toBe("X");
  });

  it("lays models out by topological depth", () => {
    const sea = view.panels[0]!;
    const waves = sea.models.find((m) => m.id === "sea_waves")!;
    const spectrum = sea.models.find((m) => m.id === "spectrum_parameterization")!;
    expect(spectrum.depth).toBeGreaterThan(waves.depth);
  });

  it("exposes the cross-object transition link", () => {
    expect(view.transitions).toHaveLength(1);
    const t = view.transitions[0]!;
    expect(t.sharedValue).toBe("wave_spectrum");
    expect(t.fromBasis).toBe("grid2d");
    expect(t.toBasis).toBe("location");
    expect(t.needsPackage).toBe(false);
  });

  it("rendered markers equal the service dataset states", () => {
    const rendered = renderedMarkers(view);
    for (const s of goldenState.dataset_states) {
      const label = refLabel(s.ref);
      if (label in rendered) {
        expect(rendered[label]).toBe(markerFor(s.state));
      }
    }
  });

  it("attaches run values to the producing models", () => {
    const withRun = buildCanvas(goldenState, goldenRun);
    const ship = withRun.panels[1]!;
    const advisor = ship.models.find((m) => m.id === "recommendation")!;
    const labels = (advisor.runValue ?? []).map((v) => v.label);
    expect(labels).toContain("recommendation");
    const value = (advisor.runValue ?? []).find((v) => v.label === "recommendation");
    expect(value?.payload).toBe("hold_course");
  });

  it("handles the empty session", () => {
    const empty = buildCanvas({ ...goldenState, composite: null, dataset_states: [] });
    expect(empty.panels).toEqual([]);
  });
});

describe("modelDepths", () => {
  it("computes longest-path layers and tolerates cycles", () => {
    const edges = [
      { from_model: "a", to_model: "b", data: { value: "x", basis: null, quality: {} } },
      { from_model: "b", to_model: "c", data: { value: "y", basis: null, quality: {} } },
      { from_model: "c", to_model: "a", data: { value: "z", basis: null, quality: {} } },
    ];
    const depths = modelDepths(["a", "b", "c"], edges);
    expect(Object.keys(depths).sort()).toEqual(["a", "b", "c"]);
    for (const d of Object.values(depths)) {
      expect(d).toBeLessThanOrEqual(3);
    }
  });
});

describe("render", () => {
  const view = buildCanvas(goldenState);

  it("renders all four panes in an object panel", () => {
    const html = renderObjectPanel(view.panels[0]!);
    expect(html).toContain("panel-header");
    expect(html).toContain("mode: analysis");
    expect(html).toContain("bases-pane");
    expect(html).toContain("parameters-pane");
    expect(html).toContain("models-graph");
  });

  it("dataset blocks show marker, source selector and options affordance", () => {
    const block = view.panels[0]!.models.find((m) => m.id === "sea_waves")!.inputs[0]!;
    const html = renderDatasetBlock(block);
    expect(html).toContain("marker-ok");
    expect(html).toContain("source-select");
    expect(html).toContain('data-action="dataset-options"');
    expect(html).toContain("&hellip;");
  });

  it("grays out disabled models and X-marks downstream datasets", () => {
    const html = renderCanvas(view);
    expect(html).toMatch(/class="model disabled" data-model="spectrum_parameterization"/);
    expect(html).toContain('marker-unavailable">X</span><span class="dataset-name">wave_parameters@grid2d');
  });

  it("highlights blocked datasets inline", () => {
    const blocked = { ...view, blockers: ["near_water_wind@grid2d"] };
    const html = renderCanvas(blocked);
    expect(html).toContain("dataset blocked");
  });

  it("escapes payload text", () => {
    expect(escapeHtml("<script>&\"")).toBe("&lt;script&gt;&amp;&quot;");
  });

  it("renders the empty-session placeholder", () => {
    const empty = buildCanvas({ ...goldenState, composite: null, dataset_states: [] });
    expect(renderCanvas(empty)).toContain("No composite yet");
  });

  it("has no hidden state: same document renders the same canvas", () => {
    const again = buildCanvas(JSON.parse(JSON.stringify(goldenState)) as StateDoc);
    expect(renderCanvas(again)).toBe(renderCanvas(view));
  });
});
