/**
 * Mirrors of the session service payloads.
 *
 * The explorer renders these verbatim. It never derives economic
 * quantities of its own: every DKK figure on screen is a field from one
 * of these objects, and the only arithmetic applied to them is the
 * display identity `reward = -(I + D + C + A + M)` and differences of
 * two server-reported totals.
 */

export type ComponentKey = "I" | "D" | "C" | "A" | "M";

export const COMPONENT_KEYS: readonly ComponentKey[] = ["I", "D", "C", "A", "M"];

export const COMPONENT_LABELS: Record<ComponentKey, string> = {
  I: "infrastructure damage",
  D: "trip delays",
  C: "cancelled trips",
  A: "construction",
  M: "maintenance",
};

export interface Components {
  I: number;
  D: number;
  C: number;
  A: number;
  M: number;
}

export interface Cumulative extends Components {
  cost_dkk: number;
}

export interface PerZone {
  I: number[];
  D: number[];
  C: number[];
  A: number[];
  M: number[];
  z: number[][];
}

export interface StepRow {
  year: number;
  actions: number[];
  rain_mm: number;
  components: Components;
  perZone: PerZone;
  outflow_m3: number;
  stored_m3: number;
  cancelledTrips: number;
  delayedTrips: number;
  reward_dkk: number;
  reward: number;
  done: boolean;
}

export interface CatalogEntry {
  id: number;
  name: string;
  effectKind: string;
  effectMagnitude: number;
  applicationRule: string;
  implCost_dkk: number;
  maintCost_dkk_per_year: number;
  lifetime_years: number;
}

export interface DeploymentRow {
  zone: number;
  measure: number;
  name: string;
  deployYear: number;
  lifetimeYears: number;
  activeThrough: number;
}

export interface ZoneGraphPayload {
  zones: number;
  edges: [number, number][];
}

export interface SessionPayload {
  version: number;
  sessionId: string;
  world: string;
  scenario: string;
  seed: number;
  gamma: number;
  year: number;
  startYear: number;
  endYear: number;
  elapsedYears: number;
  done: boolean;
  zones: number;
  zoneGraph: ZoneGraphPayload;
  masks: boolean[][];
  inventoryMask: boolean[][];
  catalog: CatalogEntry[];
  deployments: DeploymentRow[];
  policyAttached: boolean;
  state: number[][];
  stateHash: string;
  cumulative: Cumulative;
  history: StepRow[];
}

export interface StepPayload extends StepRow {
  version: number;
  sessionId: string;
  state: number[][];
  masks: boolean[][];
  stateHash: string;
  cumulative: Cumulative;
}

export interface WhatifPayload {
  version: number;
  sessionId: string;
  candidate: number[];
  requestedHorizon: number;
  horizon: number;
  clamped: boolean;
  usePolicy: boolean;
  previewSeed: number;
  years: StepRow[];
  totals: Cumulative;
  totalReward_dkk: number;
  parentStateHash: string;
}

export interface CompareSide {
  series: StepRow[];
  cumulative: Cumulative;
}

export interface ComparePayload {
  version: number;
  sessionId: string;
  years: number;
  human: CompareSide;
  policy: CompareSide;
}

export interface WorldSummary {
  name: string;
  zones: number;
  startYear: number;
  endYear: number;
  defaultScenario: string;
  scenarios: string[];
  policyAttached: boolean;
}

export interface WorldsPayload {
  version: number;
  worlds: WorldSummary[];
}

export interface CreateSessionRequest {
  world: string;
  scenario?: string | null;
  seed?: number;
  gamma?: number;
}
