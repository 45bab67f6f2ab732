// @vitest-environment jsdom

import { beforeEach, describe, expect, it } from "vitest";

import { formatDkk, render } from "../src/render.js";
import type { Handlers, RenderContext } from "../src/render.js";
import { initialState, reduce } from "../src/state.js";
import type { ExplorerEvent, ExplorerState } from "../src/state.js";
import type { WorldSummary } from "../src/types.js";
import {
  fakeCompare,
  fakeComponents,
  fakeRow,
  fakeSession,
  fakeWhatif,
} from "./fixtures.js";

const WORLDS: WorldSummary[] = [{
  name: "toyworld",
  zones: 2,
  startYear: 2024,
  endYear: 2043,
  defaultScenario: "rcp45",
  scenarios: ["rcp26", "rcp45", "rcp85"],
  policyAttached: true,
}];

interface Harness {
  root: HTMLElement;
  state(): ExplorerState;
  dispatch(event: ExplorerEvent): void;
  calls: string[];
  find<T extends Element>(selector: string): T;
  all(selector: string): Element[];
}

/** Renders against the real reducer, like main.ts but without the
 *  network: async handlers only record that they fired. */
function mount(initial?: ExplorerState): Harness {
  document.body.textContent = "";
  const root = document.createElement("div");
  document.body.append(root);
  let state = initial ?? reduce(initialState(), {
    kind: "session",
    payload: fakeSession(),
  });
  const calls: string[] = [];
  const paint = () => render(root, { state, worlds: WORLDS, handlers });
  const dispatch = (event: ExplorerEvent) => {
    state = reduce(state, event);
    paint();
  };
  const handlers: Handlers = {
    onNewSession: (world) => calls.push(`new:${world}`),
    onSelectZone: (zone) => dispatch({ kind: "select-zone", zone }),
    onPick: (zone, action) => dispatch({ kind: "pick", zone, action }),
    onMetric: (metric) => dispatch({ kind: "metric", metric }),
    onStep: () => calls.push("step"),
    onWhatif: (horizon) => calls.push(`whatif:${horizon}`),
    onCompare: () => calls.push("compare"),
    onToggle: (metric) => dispatch({ kind: "toggle", metric }),
    onCursor: (index) => dispatch({ kind: "cursor", index }),
    onClearError: () => dispatch({ kind: "clear-error" }),
  };
  paint();
  return {
    root,
    state: () => state,
    dispatch,
    calls,
    find: <T extends Element>(selector: string) => {
      const node = root.querySelector(selector);
      if (!node) throw new Error(`missing ${selector}`);
      return node as T;
    },
    all: (selector: string) => Array.from(root.querySelectorAll(selector)),
  };
}

describe("action palette", () => {
  it("renders one button per catalog measure", () => {
    const h = mount();
    expect(h.all("[data-testid=palette-button]")).toHaveLength(8);
  });

  it("disables masked measures and explains why in the tooltip", () => {
    const h = mount();
    h.dispatch({ kind: "select-zone", zone: 1 });
    const buttons = h.all("[data-testid=palette-button]") as
      HTMLButtonElement[];
    const soakaway = buttons[2];
    expect(soakaway.disabled).toBe(true);
    expect(soakaway.title.length).toBeGreaterThan(0);
    expect(soakaway.title).toContain("Soakaway");
    expect(soakaway.title).toContain("2054");
    const pavers = buttons[7];
    expect(pavers.disabled).toBe(true);
    expect(pavers.title).toContain("road inventory");
    const tank = buttons[3];
    expect(tank.disabled).toBe(false);
    expect(tank.title).toBe("");
  });

  it("ignores clicks on a masked measure", () => {
    const h = mount();
    h.dispatch({ kind: "select-zone", zone: 1 });
    const before = h.state().pending.slice();
    const buttons = h.all("[data-testid=palette-button]") as
      HTMLButtonElement[];
    buttons[2].click();
    buttons[2].dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(h.state().pending).toEqual(before);
  });

  it("records an allowed pick and highlights it", () => {
    const h = mount();
    const buttons = h.all("[data-testid=palette-button]") as
      HTMLButtonElement[];
    buttons[3].click();
    expect(h.state().pending[0]).toBe(3);
    const again = h.all("[data-testid=palette-button]") as
      HTMLButtonElement[];
    expect(again[3].classList.contains("picked")).toBe(true);
    expect(h.find("[data-testid=plan-zone-0]").textContent)
      .toBe("StorageTank");
  });
});

describe("advancing the year", () => {
  it("fires the step handler once per click", () => {
    const h = mount();
    h.find<HTMLButtonElement>("[data-testid=advance]").click();
    expect(h.calls).toEqual(["step"]);
  });

  it("disables the advance button while a step is in flight", () => {
    const h = mount();
    expect(h.find<HTMLButtonElement>("[data-testid=advance]").disabled)
      .toBe(false);
    h.dispatch({ kind: "step-start" });
    const button = h.find<HTMLButtonElement>("[data-testid=advance]");
    expect(button.disabled).toBe(true);
    expect(button.textContent).toContain("advancing");
    button.click();
    expect(h.calls).toEqual([]);
  });

  it("disables the advance button once the horizon is reached", () => {
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ done: true, year: 2043 }),
    }));
    expect(h.find<HTMLButtonElement>("[data-testid=advance]").disabled)
      .toBe(true);
  });
});

describe("history display", () => {
  it("shows the reward as the negated component sum", () => {
    const row = fakeRow(2024, {
      components: fakeComponents({ I: 700, D: 60, C: 5, A: 0, M: 0 }),
    });
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: [row], year: 2025, elapsedYears: 1 }),
    }));
    const text = h.find("[data-testid=reward-value]").textContent;
    expect(text).toBe(formatDkk(-765));
    expect(text).toBe(formatDkk(row.reward_dkk));
    expect(h.root.querySelector("[data-testid=reward-warn]")).toBeNull();
  });

  it("flags a row whose reward breaks the identity", () => {
    const row = fakeRow(2024, { reward_dkk: -1 });
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: [row], year: 2025, elapsedYears: 1 }),
    }));
    expect(h.find("[data-testid=reward-warn]").textContent)
      .toContain("does not match");
  });

  it("draws one polyline per visible component and honours toggles", () => {
    const rows = [fakeRow(2024), fakeRow(2025)];
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: rows, year: 2026, elapsedYears: 2 }),
    }));
    expect(h.all("[data-testid=history-chart] polyline")).toHaveLength(5);
    h.find<HTMLButtonElement>("[data-testid=toggle-A]").click();
    expect(h.all("[data-testid=history-chart] polyline")).toHaveLength(4);
  });
});

describe("what-if panels", () => {
  it("shows both server totals and their difference", () => {
    const h = mount();
    h.dispatch({
      kind: "whatif",
      candidate: fakeWhatif(-250_000, [fakeRow(2024), fakeRow(2025)]),
      baseline: fakeWhatif(-100_000, [fakeRow(2024), fakeRow(2025)]),
    });
    expect(h.find("[data-testid=whatif-candidate-total]").textContent)
      .toBe(formatDkk(-250_000));
    expect(h.find("[data-testid=whatif-baseline-total]").textContent)
      .toBe(formatDkk(-100_000));
    expect(h.find("[data-testid=whatif-net]").textContent)
      .toBe(formatDkk(-150_000));
    expect(h.root.textContent).toContain("worse than doing nothing");
  });

  it("passes the horizon through to the handler", () => {
    const h = mount();
    h.find<HTMLInputElement>("[data-testid=whatif-horizon]").value = "7";
    h.find<HTMLButtonElement>("[data-testid=whatif-run]").click();
    expect(h.calls).toEqual(["whatif:7"]);
  });
});

describe("policy comparison", () => {
  it("renders aligned series with dashed policy lines", () => {
    const rows = [fakeRow(2024), fakeRow(2025)];
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: rows, year: 2026, elapsedYears: 2 }),
    }));
    h.dispatch({ kind: "compare",
                 payload: fakeCompare(rows, rows.slice()) });
    const lines = h.all("[data-testid=compare-chart] polyline");
    expect(lines).toHaveLength(10);
    const dashed = lines.filter(
      (l) => l.getAttribute("stroke-dasharray") !== null);
    expect(dashed).toHaveLength(5);
    expect(h.find("[data-testid=compare-human-cost]").textContent)
      .toBe(formatDkk(5));
    expect(h.find("[data-testid=compare-policy-cost]").textContent)
      .toBe(formatDkk(10));
  });

  it("surfaces a misaligned comparison as an error banner", () => {
    const rows = [fakeRow(2024), fakeRow(2025)];
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: rows, year: 2026, elapsedYears: 2 }),
    }));
    h.dispatch({ kind: "compare",
                 payload: fakeCompare(rows, [rows[0]], 2) });
    expect(h.find("[data-testid=error-banner]").textContent)
      .toContain("misaligned");
    expect(h.root.querySelector("[data-testid=compare-chart]")).toBeNull();
  });
});

describe("zone map", () => {
  it("draws a hexagon per zone and selects on click", () => {
    const h = mount();
    const hexes = h.all(".zone-hex");
    expect(hexes).toHaveLength(2);
    hexes[1].dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(h.state().selectedZone).toBe(1);
    expect(h.root.textContent).toContain("Measures for zone 1");
  });

  it("keeps the metric tooltip in sync with the picker", () => {
    const row = fakeRow(2024);
    const h = mount(reduce(initialState(), {
      kind: "session",
      payload: fakeSession({ history: [row], year: 2025, elapsedYears: 1 }),
    }));
    h.find<HTMLButtonElement>("[data-testid=metric-D]").click();
    expect(h.state().metric).toBe("D");
    const title = h.find(".zone-hex title").textContent ?? "";
    expect(title).toContain("zone 0");
    expect(title).toContain(formatDkk(row.perZone.D[0]));
  });
});

describe("before any session", () => {
  it("offers the world picker and nothing else", () => {
    const h = mount(initialState());
    expect(h.root.querySelector("[data-testid=world-select]")).not.toBeNull();
    expect(h.root.querySelector("[data-testid=advance]")).toBeNull();
    h.find<HTMLButtonElement>("[data-testid=new-session]").click();
    expect(h.calls).toEqual(["new:toyworld"]);
  });
});
