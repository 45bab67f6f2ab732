/**
 * Typed client for the session service.
 *
 * Safety properties the explorer relies on:
 *
 * - GET requests are idempotent by construction.
 * - `step` is guarded against double submission: while one step for a
 *   session is in flight, further `step` calls for the same session
 *   reject immediately with StepInFlightError instead of reaching the
 *   network, so a twitchy double click can never advance two years.
 * - `whatif` always carries a nonce derived from the request content,
 *   which the server folds into the preview seed. Repeating an
 *   identical what-if therefore returns the identical projection, and
 *   a retry after a network hiccup cannot produce a different answer.
 */

import type {
  ComparePayload,
  CatalogEntry,
  CreateSessionRequest,
  SessionPayload,
  StepPayload,
  WhatifPayload,
  WorldsPayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: Record<string, unknown>;

  constructor(status: number, code: string, message: string,
              detail: Record<string, unknown> = {}) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

export class StepInFlightError extends Error {
  constructor(sessionId: string) {
    super(`a step for session ${sessionId} is already in flight`);
    this.name = "StepInFlightError";
  }
}

/** FNV-1a over the request content; stable across identical requests. */
export function whatifNonce(actions: number[], horizon: number,
                            usePolicy: boolean): number {
  const text = JSON.stringify([actions, horizon, usePolicy]);
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i += 1) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `${resp.status} ${resp.statusText}`;
  let detail: Record<string, unknown> = {};
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "object" && body.detail !== null) {
      detail = body.detail as Record<string, unknown>;
      if (typeof detail.code === "string") code = detail.code;
      if (typeof detail.message === "string") message = detail.message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, code, message, detail);
}

export class Client {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;
  private readonly stepsInFlight = new Set<string>();

  constructor(base: string, fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    const impl = fetchImpl ?? (globalThis.fetch as FetchLike);
    this.fetchImpl = (input, init) => impl(input, init);
  }

  private async request<T>(method: string, path: string,
                           body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  worlds(): Promise<WorldsPayload> {
    return this.request("GET", "/worlds");
  }

  catalog(world?: string): Promise<{ version: number; world: string | null;
                                     catalog: CatalogEntry[] }> {
    const query = world ? `?world=${encodeURIComponent(world)}` : "";
    return this.request("GET", `/catalog${query}`);
  }

  createSession(req: CreateSessionRequest): Promise<SessionPayload> {
    return this.request("POST", "/sessions", req);
  }

  session(id: string): Promise<SessionPayload> {
    return this.request("GET", `/sessions/${id}`);
  }

  /** True while a step for the session is unresolved. */
  stepInFlight(id: string): boolean {
    return this.stepsInFlight.has(id);
  }

  async step(id: string, actions: number[]): Promise<StepPayload> {
    if (this.stepsInFlight.has(id)) throw new StepInFlightError(id);
    this.stepsInFlight.add(id);
    try {
      return await this.request<StepPayload>(
        "POST", `/sessions/${id}/step`, { actions });
    } finally {
      this.stepsInFlight.delete(id);
    }
  }

  /**
   * Project a plan without advancing the session. The nonce defaults
   * to a content hash so retries of the same request replay the same
   * preview; pass an explicit nonce to pin several projections (say a
   * candidate and its do-nothing contrast) to the same preview weather.
   */
  whatif(id: string, actions: number[], horizon = 0,
         usePolicy = false, nonce?: number): Promise<WhatifPayload> {
    return this.request("POST", `/sessions/${id}/whatif`, {
      actions,
      horizon,
      usePolicy,
      nonce: nonce ?? whatifNonce(actions, horizon, usePolicy),
    });
  }

  compare(id: string): Promise<ComparePayload> {
    return this.request("GET", `/sessions/${id}/compare`);
  }
}
