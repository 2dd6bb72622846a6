// View-model to HTML. Pure string construction with data- attributes for
// event delegation; main.ts swaps the container's innerHTML after every
// authoritative state refresh.

import type { CanvasView, DatasetBlockView, ModelView, ObjectPanelView } from "./canvas.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const MARKER_CLASS: Record<string, string> = { OK: "marker-ok", "?": "marker-needed", X: "marker-unavailable" };

const SOURCES = ["simulation", "storage", "user"];

export function renderDatasetBlock(block: DatasetBlockView, blockers: string[] = []): string {
  const blocked = blockers.includes(block.label) ? " blocked" : "";
  const options = SOURCES.map(
    (s) =>
      `<option value="${s}"${block.source === s ? " selected" : ""}>${s}</option>`,
  ).join("");
  return (
    `<div class="dataset${blocked}" data-ref="${escapeHtml(block.label)}" title="${escapeHtml(block.reason)}">` +
    `<span class="marker ${MARKER_CLASS[block.marker]}">${block.marker}</span>` +
    `<span class="dataset-name">${escapeHtml(block.label)}</span>` +
    `<select class="source-select" data-action="set-source" data-ref="${escapeHtml(block.label)}">${options}</select>` +
    `<button class="options-button" data-action="dataset-options" data-ref="${escapeHtml(block.label)}">&hellip;</button>` +
    `</div>`
  );
}

export function renderModel(model: ModelView, blockers: string[] = []): string {
  const classes = ["model"];
  if (!model.enabled) classes.push("disabled");
  if (model.failed) classes.push("failed");
  const inputs = model.inputs.map((b) => renderDatasetBlock(b, blockers)).join("");
  const outputs = model.outputs.map((b) => renderDatasetBlock(b, blockers)).join("");
  const scenario =
    `<select class="scenario-select" data-action="select-scenario" data-model="${escapeHtml(model.id)}">` +
    model.scenarios
      .map((s) => `<option value="${escapeHtml(s)}"${s === model.scenario ? " selected" : ""}>${escapeHtml(s)}</option>`)
      .join("") +
    `</select>`;
  const values = (model.runValue ?? [])
    .map(
      (v) =>
        `<div class="run-value" data-ref="${escapeHtml(v.label)}">${escapeHtml(v.label)} = ` +
        `<code>${escapeHtml(JSON.stringify(v.payload))}</code></div>`,
    )
    .join("");
  return (
    `<div class="${classes.join(" ")}" data-model="${escapeHtml(model.id)}" style="grid-column:${model.depth + 1}">` +
    `<header><label><input type="checkbox" data-action="toggle-model" data-model="${escapeHtml(model.id)}"` +
    `${model.enabled ? " checked" : ""}/> ${escapeHtml(model.id)}</label>${scenario}` +
    `<button class="options-button" data-action="model-options" data-model="${escapeHtml(model.id)}">&hellip;</button></header>` +
    `<div class="io"><div class="inputs">${inputs}</div><div class="outputs">${outputs}</div></div>` +
    values +
    `</div>`
  );
}

export function renderObjectPanel(panel: ObjectPanelView, blockers: string[] = []): string {
  const bases = panel.bases
    .map(
      (b) =>
        `<li class="basis" data-basis="${escapeHtml(b.id)}">` +
        `<strong>${escapeHtml(b.id)}</strong> <em>${escapeHtml(b.kind)}/${escapeHtml(b.reference)}</em> ` +
        `<code>${escapeHtml(JSON.stringify(b.params))}</code>` +
        `<button class="options-button" data-action="basis-options" data-basis="${escapeHtml(b.id)}">&hellip;</button></li>`,
    )
    .join("");
  const params = panel.parameters
    .map(
      (p) =>
        `<li class="parameter" title="${escapeHtml(p.reason)}">` +
        `<span class="marker ${MARKER_CLASS[p.marker]}">${p.marker}</span> ` +
        `${escapeHtml(p.value)}${p.unit ? ` [${escapeHtml(p.unit)}]` : ""}` +
        `${p.set ? ' <span class="param-set">set</span>' : ""}</li>`,
    )
    .join("");
  const columns = panel.layers.length || 1;
  const models = panel.models
    .slice()
    .sort((a, b) => a.depth - b.depth || a.id.localeCompare(b.id))
    .map((m) => renderModel(m, blockers))
    .join("");
  return (
    `<section class="object-panel" data-object="${escapeHtml(panel.name)}">` +
    `<header class="panel-header"><h2>${escapeHtml(panel.name)}</h2>` +
    `<span class="mode">mode: ${escapeHtml(panel.mode)}</span></header>` +
    `<div class="bases-pane"><h3>Bases</h3><ul>${bases}</ul></div>` +
    `<div class="parameters-pane"><h3>Object parameters</h3><ul>${params}</ul></div>` +
    `<div class="models-graph" style="grid-template-columns:repeat(${columns},1fr)">${models}</div>` +
    `</section>`
  );
}

export function renderCanvas(view: CanvasView): string {
  if (!view.panels.length) {
    return `<div class="empty-canvas">No composite yet: load classes and compose them.</div>`;
  }
  const panels = view.panels.map((p) => renderObjectPanel(p, view.blockers)).join("");
  const transitions = view.transitions
    .map(
      (t) =>
        `<div class="transition${t.enabled ? "" : " disabled"}${t.needsPackage ? " needs-package" : ""}" ` +
        `data-model="${escapeHtml(t.id)}">` +
        `<span class="marker ${MARKER_CLASS[t.marker]}">${t.marker}</span>` +
        `${escapeHtml(t.sharedValue)}: ${escapeHtml(t.fromBasis ?? "-")} &rarr; ${escapeHtml(t.toBasis ?? "-")}` +
        `${t.needsPackage ? ' <span class="needs-package-tag">needs package</span>' : ""}` +
        `<label><input type="checkbox" data-action="toggle-model" data-model="${escapeHtml(t.id)}"` +
        `${t.enabled ? " checked" : ""}/> on</label></div>`,
    )
    .join("");
  return (
    `<div class="canvas" data-session="${escapeHtml(view.sessionId)}">` +
    panels +
    `<div class="transition-links">${transitions}</div>` +
    `</div>`
  );
}

export function renderPlanPicker(
  plans: { models: [string, string][]; score: number }[],
  truncated: boolean,
): string {
  const rows = plans
    .map(
      (p, i) =>
        `<li><button data-action="pick-plan" data-plan="${i}">run #${i}</button> ` +
        `score ${p.score.toFixed(3)}: ${p.models.map(([m]) => escapeHtml(m)).join(" &rarr; ") || "(no models)"}</li>`,
    )
    .join("");
  return `<ol class="plan-picker">${rows}</ol>${truncated ? '<p class="truncated">list truncated</p>' : ""}`;
}

export function renderRunMonitor(entry: {
  runId: string;
  status: string;
  polls: number;
  failureBlock?: string | null;
}): string {
  return (
    `<div class="run-monitor" data-run="${escapeHtml(entry.runId)}">` +
    `<span class="run-status run-${escapeHtml(entry.status)}">${escapeHtml(entry.status)}</span>` +
    ` after ${entry.polls} poll(s)` +
    (entry.failureBlock ? ` <span class="failed-block">failed at ${escapeHtml(entry.failureBlock)}</span>` : "") +
    `</div>`
  );
}
