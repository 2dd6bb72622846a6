// Thin typed client for the session service. Every mutation returns the
// authoritative state document; the canvas never renders optimistically.

import type { ErrorDoc, PlansDoc, RunResultDoc, StateDoc, TaskRequestDoc } from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly path: string;

  constructor(doc: ErrorDoc, status: number) {
    super(`${doc.code}: ${doc.message} (http ${status})`);
    this.code = doc.code;
    this.path = doc.path;
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(body as ErrorDoc, response.status);
  }
  return body as T;
}

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(): Promise<string> {
    const body = await asJson<{ session_id: string }>(
      await fetch(this.url("/sessions"), { method: "POST" }),
    );
    return body.session_id;
  }

  async listClasses(): Promise<{ name: string; version: number; mode: string }[]> {
    const body = await asJson<{ classes: { name: string; version: number; mode: string }[] }>(
      await fetch(this.url("/classes")),
    );
    return body.classes;
  }

  async command(sessionId: string, command: string, args: Record<string, unknown> = {}): Promise<StateDoc> {
    return asJson<StateDoc>(
      await fetch(this.url(`/sessions/${sessionId}/commands`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ command, ...args }),
      }),
    );
  }

  async state(sessionId: string): Promise<StateDoc> {
    return asJson<StateDoc>(await fetch(this.url(`/sessions/${sessionId}/state`)));
  }

  async plans(sessionId: string, request: TaskRequestDoc): Promise<PlansDoc> {
    return asJson<PlansDoc>(
      await fetch(this.url(`/sessions/${sessionId}/plans`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      }),
    );
  }

  async startRun(
    sessionId: string,
    request: TaskRequestDoc,
    plan: "auto" | number = "auto",
  ): Promise<{ run_id: string; status: string }> {
    return asJson<{ run_id: string; status: string }>(
      await fetch(this.url(`/sessions/${sessionId}/runs`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ request, plan }),
      }),
    );
  }

  async run(sessionId: string, runId: string): Promise<RunResultDoc> {
    return asJson<RunResultDoc>(await fetch(this.url(`/sessions/${sessionId}/runs/${runId}`)));
  }
}
