/** Hand-built payloads shaped exactly like the session service's JSON. */

import type {
  CatalogEntry,
  ComparePayload,
  Components,
  SessionPayload,
  StepRow,
  WhatifPayload,
} from "../src/types.js";

export const MEASURE_NAMES = [
  "DoNothing", "BioretentionPlanters", "Soakaway", "StorageTank",
  "PorousAsphalt", "PerviousConcrete", "PICP", "GridPavers",
];

export function fakeCatalog(): CatalogEntry[] {
  return MEASURE_NAMES.map((name, id) => ({
    id,
    name,
    effectKind: id === 0 ? "none" : id <= 3 ? "volume_m3" : "runoff_coeff",
    effectMagnitude: id === 0 ? 0 : id * 1.5,
    applicationRule: id === 0 ? "none"
      : id === 1 ? "perPlanterEvery30m"
      : id <= 3 ? "oncePerRoad" : "perSurfaceArea",
    implCost_dkk: id === 0 ? 0 : 10_000 * id,
    maintCost_dkk_per_year: id === 0 ? 0 : 500 * id,
    lifetime_years: id === 0 ? 0 : 30,
  }));
}

export function fakeComponents(over: Partial<Components> = {}): Components {
  return { I: 1000, D: 500, C: 250, A: 125, M: 62.5, ...over };
}

export function fakeRow(year: number,
                        over: Partial<StepRow> = {}): StepRow {
  const components = over.components ?? fakeComponents();
  const reward_dkk = over.reward_dkk
    ?? -(components.I + components.D + components.C
         + components.A + components.M);
  return {
    year,
    actions: [0, 0],
    rain_mm: 42.5,
    components,
    perZone: {
      I: [components.I * 0.6, components.I * 0.4],
      D: [components.D * 0.6, components.D * 0.4],
      C: [components.C * 0.6, components.C * 0.4],
      A: [components.A, 0],
      M: [components.M, 0],
      z: [[0.1, 0.0, 0.2], [0.0, 0.0, 0.1]],
    },
    outflow_m3: 120.0,
    stored_m3: 30.0,
    cancelledTrips: 2,
    delayedTrips: 11,
    reward: reward_dkk / 1e6,
    done: false,
    ...over,
    reward_dkk,
  };
}

export function fakeSession(
  over: Partial<SessionPayload> = {},
): SessionPayload {
  const allOn = MEASURE_NAMES.map(() => true);
  const zoneOneMask = MEASURE_NAMES.map((_, id) => id !== 2 && id !== 7);
  return {
    version: 1,
    sessionId: "s-fixture",
    world: "toyworld",
    scenario: "rcp45",
    seed: 0,
    gamma: 0.99,
    year: 2024,
    startYear: 2024,
    endYear: 2043,
    elapsedYears: 0,
    done: false,
    zones: 2,
    zoneGraph: { zones: 2, edges: [[0, 1]] },
    masks: [allOn.slice(), zoneOneMask],
    // GridPavers lacks inventory in zone 1; Soakaway is masked there
    // by an active deployment instead
    inventoryMask: [allOn.slice(),
                    MEASURE_NAMES.map((_, id) => id !== 7)],
    catalog: fakeCatalog(),
    deployments: [{
      zone: 1, measure: 2, name: "Soakaway",
      deployYear: 2024, lifetimeYears: 30, activeThrough: 2054,
    }],
    policyAttached: true,
    state: [[0, 0, 0], [0, 0, 0]],
    stateHash: "a".repeat(16),
    cumulative: { I: 0, D: 0, C: 0, A: 0, M: 0, cost_dkk: 0 },
    history: [],
    ...over,
  };
}

export function fakeWhatif(total: number, years: StepRow[],
                           over: Partial<WhatifPayload> = {}): WhatifPayload {
  return {
    version: 1,
    sessionId: "s-fixture",
    candidate: [0, 0],
    requestedHorizon: years.length,
    horizon: years.length,
    clamped: false,
    usePolicy: false,
    previewSeed: 1234,
    years,
    totals: { I: 0, D: 0, C: 0, A: 0, M: 0, cost_dkk: 0 },
    totalReward_dkk: total,
    parentStateHash: "a".repeat(16),
    ...over,
  };
}

export function fakeCompare(humanRows: StepRow[], policyRows: StepRow[],
                            years?: number): ComparePayload {
  return {
    version: 1,
    sessionId: "s-fixture",
    years: years ?? humanRows.length,
    human: {
      series: humanRows,
      cumulative: { I: 1, D: 1, C: 1, A: 1, M: 1, cost_dkk: 5 },
    },
    policy: {
      series: policyRows,
      cumulative: { I: 2, D: 2, C: 2, A: 2, M: 2, cost_dkk: 10 },
    },
  };
}
