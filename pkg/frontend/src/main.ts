/**
 * Entry point: wires the API client, the reducer, and the renderer
 * together. Handlers are the only async code; each one funnels its
 * result back through `dispatch`, so the render path stays pure.
 */

import { ApiError, Client, StepInFlightError, whatifNonce } from "./api.js";
import type { ExplorerEvent, ExplorerState } from "./state.js";
import { initialState, reduce } from "./state.js";
import type { Handlers } from "./render.js";
import { render } from "./render.js";
import type { WorldSummary } from "./types.js";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8000";
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

export function boot(root: HTMLElement,
                     client: Client): { dispatch(e: ExplorerEvent): void } {
  let state: ExplorerState = initialState();
  let worlds: WorldSummary[] = [];

  const paint = () => render(root, { state, worlds, handlers });
  const dispatch = (event: ExplorerEvent) => {
    state = reduce(state, event);
    paint();
  };
  const fail = (err: unknown) =>
    dispatch({ kind: "fail", message: describe(err) });

  const handlers: Handlers = {
    onNewSession: async (world, scenario, seed) => {
      try {
        const payload = await client.createSession({ world, scenario, seed });
        dispatch({ kind: "session", payload });
      } catch (err) {
        fail(err);
      }
    },

    onSelectZone: (zone) => dispatch({ kind: "select-zone", zone }),
    onPick: (zone, action) => dispatch({ kind: "pick", zone, action }),
    onMetric: (metric) => dispatch({ kind: "metric", metric }),

    onStep: async () => {
      const session = state.session;
      if (!session || state.stepping || session.done) return;
      const actions = state.pending.slice();
      dispatch({ kind: "step-start" });
      try {
        await client.step(session.sessionId, actions);
        const payload = await client.session(session.sessionId);
        dispatch({ kind: "step-done", payload });
      } catch (err) {
        if (err instanceof StepInFlightError) return;
        dispatch({ kind: "step-fail", message: describe(err) });
      }
    },

    onWhatif: async (years) => {
      const session = state.session;
      if (!session) return;
      try {
        // the service counts its horizon in follow-on years after the
        // plan year, so a request for N projected years sends N - 1;
        // the candidate and its do-nothing contrast share a nonce, so
        // the server replays both under identical preview weather and
        // the net delta isolates the plan's effect
        const horizon = Math.max(years - 1, 0);
        const plan = state.pending.slice();
        const nonce = whatifNonce(plan, horizon, false);
        const [candidate, baseline] = await Promise.all([
          client.whatif(session.sessionId, plan, horizon, false, nonce),
          client.whatif(session.sessionId,
                        new Array(session.zones).fill(0), horizon,
                        false, nonce),
        ]);
        dispatch({ kind: "whatif", candidate, baseline });
      } catch (err) {
        fail(err);
      }
    },

    onCompare: async () => {
      const session = state.session;
      if (!session) return;
      try {
        const payload = await client.compare(session.sessionId);
        dispatch({ kind: "compare", payload });
      } catch (err) {
        fail(err);
      }
    },

    onToggle: (metric) => dispatch({ kind: "toggle", metric }),
    onCursor: (index) => dispatch({ kind: "cursor", index }),
    onClearError: () => dispatch({ kind: "clear-error" }),
  };

  paint();
  client.worlds()
    .then((payload) => {
      worlds = payload.worlds;
      paint();
    })
    .catch(fail);
  return { dispatch };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app")!, new Client(apiBase()));
}
