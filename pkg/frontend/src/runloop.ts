// Run orchestration: enumerate plans, start the chosen run, poll to a
// terminal state. The client is injected so tests can drive it against the
// real service or a scripted fake.

import { ApiError, type ServiceClient } from "./api.js";
import type { PlansDoc, RunResultDoc, TaskRequestDoc } from "./types.js";
import { refLabel } from "./types.js";

export interface RunMonitorEntry {
  runId: string;
  status: "running" | "succeeded" | "failed";
  polls: number;
  result: RunResultDoc | null;
  failureBlock: string | null;
}

export interface LaunchOutcome {
  kind: "run" | "no-plan" | "error";
  plans?: PlansDoc;
  monitor?: RunMonitorEntry;
  blockers?: string[];
  message?: string;
}

export interface LaunchOptions {
  plan?: "auto" | number;
  maxPolls?: number;
  pollDelayMs?: number;
  onUpdate?: (entry: RunMonitorEntry) => void;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

function blockersFrom(error: ApiError): string[] {
  // The service reports blockers inside the message ("blocked on: a, b").
  const match = /blocked on: (.*)$/.exec(error.message);
  if (!match || !match[1]) return [];
  return match[1]
    .replace(/ \(http \d+\)$/, "")
    .split(",")
    .map((s) => s.trim())
    .filter(Boolean);
}

export async function launchRun(
  client: ServiceClient,
  sessionId: string,
  request: TaskRequestDoc,
  options: LaunchOptions = {},
): Promise<LaunchOutcome> {
  const { plan = "auto", maxPolls = 3, pollDelayMs = 1000, onUpdate } = options;
  let plans: PlansDoc;
  try {
    plans = await client.plans(sessionId, request);
  } catch (error) {
    if (error instanceof ApiError && error.code === "NO_PLAN") {
      return { kind: "no-plan", blockers: blockersFrom(error), message: error.message };
    }
    throw error;
  }

  let started: { run_id: string; status: string };
  try {
    started = await client.startRun(sessionId, request, plan);
  } catch (error) {
    if (error instanceof ApiError) {
      return { kind: "error", plans, message: error.message };
    }
    throw error;
  }

  const entry: RunMonitorEntry = {
    runId: started.run_id,
    status: "running",
    polls: 0,
    result: null,
    failureBlock: null,
  };
  onUpdate?.(entry);

  while (entry.polls < maxPolls) {
    entry.polls += 1;
    const result = await client.run(sessionId, started.run_id);
    if (result.status === "succeeded" || result.status === "failed") {
      entry.status = result.status;
      entry.result = result;
      entry.failureBlock = result.failure ? result.failure.block : null;
      onUpdate?.(entry);
      return { kind: "run", plans, monitor: entry };
    }
    onUpdate?.(entry);
    await sleep(pollDelayMs);
  }
  onUpdate?.(entry);
  return { kind: "run", plans, monitor: entry };
}

export function producedValueOn(
  result: RunResultDoc,
  valueId: string,
): unknown {
  for (const v of result.values) {
    if (v.ref.value === valueId) return v.payload;
  }
  return undefined;
}

export function valueLabels(result: RunResultDoc): string[] {
  return result.values.map((v) => refLabel(v.ref));
}
