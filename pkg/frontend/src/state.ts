/**
 * Pure state container for the explorer.
 *
 * All mutation happens through `reduce`, so the interesting invariants
 * are unit-testable without a DOM: a masked action can never enter the
 * pending plan, stale projections are dropped the moment the session
 * advances, and a comparison whose two sides disagree in length is
 * surfaced as an error instead of being silently truncated.
 */

import type {
  ComparePayload,
  ComponentKey,
  Components,
  SessionPayload,
  StepRow,
  WhatifPayload,
} from "./types.js";
import { COMPONENT_KEYS } from "./types.js";

export type Toggles = Record<ComponentKey, boolean>;

export interface WhatifView {
  /** projection of the plan currently pending in the palette */
  candidate: WhatifPayload;
  /** all-do-nothing projection over the same horizon, for contrast */
  baseline: WhatifPayload;
}

export interface ExplorerState {
  session: SessionPayload | null;
  /** one chosen action per zone for the next simulated year */
  pending: number[];
  selectedZone: number | null;
  /** which component colours the zone map */
  metric: ComponentKey;
  stepping: boolean;
  whatif: WhatifView | null;
  compare: ComparePayload | null;
  toggles: Toggles;
  /** history row under inspection; null means the latest year */
  cursor: number | null;
  error: string | null;
}

export type ExplorerEvent =
  | { kind: "session"; payload: SessionPayload }
  | { kind: "select-zone"; zone: number }
  | { kind: "pick"; zone: number; action: number }
  | { kind: "metric"; metric: ComponentKey }
  | { kind: "step-start" }
  | { kind: "step-done"; payload: SessionPayload }
  | { kind: "step-fail"; message: string }
  | { kind: "whatif"; candidate: WhatifPayload; baseline: WhatifPayload }
  | { kind: "compare"; payload: ComparePayload }
  | { kind: "toggle"; metric: ComponentKey }
  | { kind: "cursor"; index: number | null }
  | { kind: "fail"; message: string }
  | { kind: "clear-error" };

export function initialState(): ExplorerState {
  return {
    session: null,
    pending: [],
    selectedZone: null,
    metric: "I",
    stepping: false,
    whatif: null,
    compare: null,
    toggles: { I: true, D: true, C: true, A: true, M: true },
    cursor: null,
    error: null,
  };
}

function freshPlan(session: SessionPayload): number[] {
  return new Array(session.zones).fill(0);
}

function loadSession(state: ExplorerState,
                     payload: SessionPayload): ExplorerState {
  const kept = state.selectedZone !== null
    && state.session?.sessionId === payload.sessionId
    && state.selectedZone < payload.zones
    ? state.selectedZone
    : payload.zones > 0 ? 0 : null;
  return {
    ...state,
    session: payload,
    pending: freshPlan(payload),
    selectedZone: kept,
    stepping: false,
    whatif: null,
    compare: null,
    cursor: null,
    error: null,
  };
}

export function reduce(state: ExplorerState,
                       event: ExplorerEvent): ExplorerState {
  switch (event.kind) {
    case "session":
      return loadSession(state, event.payload);

    case "select-zone": {
      if (!state.session || event.zone < 0
          || event.zone >= state.session.zones) {
        return state;
      }
      return { ...state, selectedZone: event.zone };
    }

    case "pick": {
      const session = state.session;
      if (!session || state.stepping) return state;
      const row = session.masks[event.zone];
      if (!row || event.action < 0 || event.action >= row.length) return state;
      if (!row[event.action]) return state; // masked: refuse silently
      const pending = state.pending.slice();
      pending[event.zone] = event.action;
      return { ...state, pending };
    }

    case "metric":
      return { ...state, metric: event.metric };

    case "step-start":
      return { ...state, stepping: true, error: null };

    case "step-done":
      // a new year invalidates projections made from the old one
      return loadSession(state, event.payload);

    case "step-fail":
      return { ...state, stepping: false, error: event.message };

    case "whatif":
      return {
        ...state,
        whatif: { candidate: event.candidate, baseline: event.baseline },
        error: null,
      };

    case "compare": {
      const mismatch = compareMismatch(event.payload);
      if (mismatch) {
        return { ...state, compare: null, error: mismatch };
      }
      return { ...state, compare: event.payload, error: null };
    }

    case "toggle": {
      const toggles = { ...state.toggles };
      toggles[event.metric] = !toggles[event.metric];
      return { ...state, toggles };
    }

    case "cursor": {
      const history = state.session?.history ?? [];
      if (event.index === null || history.length === 0) {
        return { ...state, cursor: null };
      }
      const index = Math.min(Math.max(event.index, 0), history.length - 1);
      return { ...state, cursor: index };
    }

    case "fail":
      return { ...state, error: event.message };

    case "clear-error":
      return { ...state, error: null };
  }
}

// ---------------------------------------------------------------------------
// selectors

/**
 * The reward figure shown next to a table of components: the negated
 * sum of exactly the numbers on screen. For an untampered server row
 * this equals reward_dkk bit for bit.
 */
export function displayedReward(components: Components): number {
  return -(components.I + components.D + components.C
           + components.A + components.M);
}

/** Whether a row's own reward matches the displayed identity exactly. */
export function rewardConsistent(row: StepRow): boolean {
  return displayedReward(row.components) === row.reward_dkk;
}

export interface ComponentSeries {
  years: number[];
  values: Record<ComponentKey, number[]>;
}

export function componentSeries(rows: StepRow[]): ComponentSeries {
  const values = { I: [], D: [], C: [], A: [], M: [] } as
    Record<ComponentKey, number[]>;
  const years: number[] = [];
  for (const row of rows) {
    years.push(row.year);
    for (const key of COMPONENT_KEYS) values[key].push(row.components[key]);
  }
  return { years, values };
}

/** Net effect of the candidate against doing nothing, in DKK of reward
 *  (difference of two server-reported totals; positive means the
 *  candidate is better). */
export function netDelta(view: WhatifView): number {
  return view.candidate.totalReward_dkk - view.baseline.totalReward_dkk;
}

function seriesLengthProblem(label: string, length: number,
                             years: number): string | null {
  if (length === years) return null;
  return `${label} series has ${length} rows for ${years} years`;
}

/** Human-readable description of a misaligned comparison, or null. */
export function compareMismatch(payload: ComparePayload): string | null {
  const human = seriesLengthProblem("human", payload.human.series.length,
                                    payload.years);
  const policy = seriesLengthProblem("policy", payload.policy.series.length,
                                     payload.years);
  if (!human && !policy) return null;
  const parts = [human, policy].filter((p): p is string => p !== null);
  return `comparison misaligned: ${parts.join("; ")}`;
}

/**
 * Why an action button is disabled, straight from server payloads:
 * an active deployment (with its expiry year) or missing road
 * inventory. Null for a clickable action.
 */
export function maskedExplanation(session: SessionPayload, zone: number,
                                  action: number): string | null {
  const row = session.masks[zone];
  if (!row || row[action]) return null;
  const active = session.deployments.find(
    (d) => d.zone === zone && d.measure === action);
  if (active) {
    return `${active.name} already active in zone ${zone} through `
      + `${active.activeThrough} (deployed ${active.deployYear}, `
      + `${active.lifetimeYears}-year lifetime)`;
  }
  const inventory = session.inventoryMask[zone];
  if (inventory && !inventory[action]) {
    return `zone ${zone} has no road inventory eligible for this measure`;
  }
  return "not available this year";
}

/** Per-zone values of the chosen metric at the inspected year
 *  (zeros before any year has been simulated). */
export function zoneMetricValues(state: ExplorerState): number[] {
  const session = state.session;
  if (!session) return [];
  const history = session.history;
  if (history.length === 0) return new Array(session.zones).fill(0);
  const index = state.cursor ?? history.length - 1;
  const row = history[Math.min(index, history.length - 1)];
  return row.perZone[state.metric];
}

/** The history row under the cursor, or the latest one. */
export function inspectedRow(state: ExplorerState): StepRow | null {
  const history = state.session?.history ?? [];
  if (history.length === 0) return null;
  const index = state.cursor ?? history.length - 1;
  return history[Math.min(index, history.length - 1)];
}
