// Browser bootstrap: one session, authoritative re-render after every
// mutation, 1 s state polling. All rendering goes through the pure
// functions in canvas.ts / render.ts; this file only wires DOM events.

import { ApiError, ServiceClient } from "./api.js";
import { buildCanvas } from "./canvas.js";
import { renderCanvas, renderPlanPicker, renderRunMonitor, escapeHtml } from "./render.js";
import { launchRun } from "./runloop.js";
import type { RunResultDoc, StateDoc, TaskRequestDoc } from "./types.js";

const POLL_MS = 1000;

interface AppState {
  client: ServiceClient;
  sessionId: string;
  state: StateDoc | null;
  lastRun: RunResultDoc | null;
  blockers: string[];
}

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function toast(message: string): void {
  const box = $("toasts");
  const node = document.createElement("div");
  node.className = "toast";
  node.textContent = message;
  box.appendChild(node);
  setTimeout(() => node.remove(), 5000);
}

function redraw(app: AppState): void {
  if (!app.state) return;
  const view = buildCanvas(app.state, app.lastRun);
  view.blockers.push(...app.blockers);
  $("canvas-root").innerHTML = renderCanvas(view);
}

async function refresh(app: AppState): Promise<void> {
  app.state = await app.client.state(app.sessionId);
  redraw(app);
}

function requestFromForm(app: AppState): TaskRequestDoc {
  const requestedRaw = ($("requested-input") as HTMLInputElement).value.trim();
  const state = app.state;
  if (!state || !state.composite) throw new Error("compose first");
  const refs = state.composite.models.flatMap((m) => [...m.inputs, ...m.outputs]);
  const findRef = (label: string) => {
    const [value, basis] = label.includes("@") ? label.split("@") : [label, null];
    const ref = refs.find((r) => r.value === value && (r.basis ?? null) === (basis ?? null));
    if (!ref) throw new Error(`unknown dataset ${label}`);
    return ref;
  };
  const provided = state.provided.map((entry) => ({
    ref: entry.ref,
    payload: JSON.parse(
      (document.querySelector(`[data-payload="${entry.ref.value}"]`) as HTMLInputElement | null)?.value || "null",
    ),
    source: entry.source,
  }));
  const params: Record<string, unknown> = {};
  for (const inst of Object.values(state.instances)) {
    Object.assign(params, inst.params);
  }
  return {
    format_version: 1,
    mode: "analysis",
    provided,
    requested: requestedRaw.split(",").map((label) => findRef(label.trim())),
    params,
  };
}

async function handleAction(app: AppState, target: HTMLElement): Promise<void> {
  const action = target.dataset["action"];
  if (!action) return;
  try {
    if (action === "toggle-model") {
      const model = target.dataset["model"]!;
      const enabled = (target as HTMLInputElement).checked;
      app.state = await app.client.command(
        app.sessionId,
        enabled ? "enable_model" : "disable_model",
        { model },
      );
      redraw(app);
    } else if (action === "select-scenario") {
      const model = target.dataset["model"]!;
      const scenario = (target as HTMLSelectElement).value;
      app.state = await app.client.command(app.sessionId, "select_scenario", { model, scenario });
      redraw(app);
    } else if (action === "set-source") {
      const label = target.dataset["ref"]!;
      const ref = app.state?.dataset_states.find(
        (s) => (s.ref.basis ? `${s.ref.value}@${s.ref.basis}` : s.ref.value) === label,
      )?.ref;
      if (!ref) return;
      app.state = await app.client.command(app.sessionId, "declare_provided", {
        ref,
        source: (target as HTMLSelectElement).value,
      });
      redraw(app);
    } else if (action === "dataset-options" || action === "model-options" || action === "basis-options") {
      toast(`options for ${target.dataset["ref"] ?? target.dataset["model"] ?? target.dataset["basis"]}`);
    } else if (action === "pick-plan") {
      await startRun(app, Number(target.dataset["plan"]));
    }
  } catch (error) {
    toast(error instanceof ApiError ? error.message : String(error));
  }
}

async function startRun(app: AppState, plan: "auto" | number = "auto"): Promise<void> {
  const monitorBox = $("run-monitor");
  app.blockers = [];
  try {
    const request = requestFromForm(app);
    const outcome = await launchRun(app.client, app.sessionId, request, {
      plan,
      pollDelayMs: POLL_MS,
      onUpdate: (entry) => {
        monitorBox.innerHTML = renderRunMonitor(entry);
      },
    });
    if (outcome.kind === "no-plan") {
      app.blockers = outcome.blockers ?? [];
      monitorBox.innerHTML = `<div class="no-plan">no plan: blocked on ${escapeHtml(
        (outcome.blockers ?? []).join(", "),
      )}</div>`;
      redraw(app);
      return;
    }
    if (outcome.plans) {
      $("plan-picker").innerHTML = renderPlanPicker(outcome.plans.plans, outcome.plans.truncated);
    }
    if (outcome.monitor?.result) {
      app.lastRun = outcome.monitor.result;
    }
    await refresh(app);
  } catch (error) {
    toast(error instanceof ApiError ? error.message : String(error));
  }
}

async function boot(): Promise<void> {
  const base = (document.body.dataset["service"] as string | undefined) ?? "http://127.0.0.1:8000";
  const client = new ServiceClient(base);
  const sessionId = await client.createSession();
  const app: AppState = { client, sessionId, state: null, lastRun: null, blockers: [] };

  const classes = await client.listClasses();
  const picker = $("class-picker");
  picker.innerHTML = classes
    .map(
      (c) =>
        `<label><input type="checkbox" name="class" value="${escapeHtml(c.name)}" checked/> ` +
        `${escapeHtml(c.name)} v${c.version}</label>`,
    )
    .join("");

  $("compose-button").addEventListener("click", async () => {
    const names = Array.from(
      document.querySelectorAll<HTMLInputElement>('input[name="class"]:checked'),
    ).map((el) => el.value);
    try {
      for (const name of names) {
        await client.command(sessionId, "load_class", { name });
      }
      app.state = await client.command(sessionId, "compose", { classes: names });
      redraw(app);
    } catch (error) {
      toast(error instanceof ApiError ? error.message : String(error));
    }
  });

  $("run-button").addEventListener("click", () => void startRun(app));

  $("canvas-root").addEventListener("change", (event) => {
    void handleAction(app, event.target as HTMLElement);
  });
  $("canvas-root").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset["action"] && target.tagName === "BUTTON") {
      void handleAction(app, target);
    }
  });
  $("plan-picker").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset["action"] === "pick-plan") void handleAction(app, target);
  });

  setInterval(() => void refresh(app).catch(() => undefined), POLL_MS);
}

void boot().catch((error) => toast(String(error)));
