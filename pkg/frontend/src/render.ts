/**
 * DOM construction for the explorer. The whole app re-renders from
 * state on every event; no incremental patching, no framework.
 *
 * Everything that looks like a number on screen came out of a server
 * payload. The single piece of client arithmetic is the displayed
 * reward, which is the negated sum of the component figures already
 * on screen, kept so a reader can check the reward identity by eye.
 */

import type { ComponentKey, WorldSummary, StepRow } from "./types.js";
import { COMPONENT_KEYS, COMPONENT_LABELS } from "./types.js";
import type { ExplorerState } from "./state.js";
import {
  componentSeries,
  displayedReward,
  inspectedRow,
  maskedExplanation,
  netDelta,
  rewardConsistent,
  zoneMetricValues,
} from "./state.js";
import { hexPoints, zoneLayout } from "./layout.js";

export interface Handlers {
  onNewSession(world: string, scenario: string, seed: number): void;
  onSelectZone(zone: number): void;
  onPick(zone: number, action: number): void;
  onMetric(metric: ComponentKey): void;
  onStep(): void;
  onWhatif(horizon: number): void;
  onCompare(): void;
  onToggle(metric: ComponentKey): void;
  onCursor(index: number | null): void;
  onClearError(): void;
}

export interface RenderContext {
  state: ExplorerState;
  worlds: WorldSummary[];
  handlers: Handlers;
}

const COMPONENT_COLORS: Record<ComponentKey, string> = {
  I: "#2563eb",
  D: "#d97706",
  C: "#059669",
  A: "#7c3aed",
  M: "#db2777",
};

const dkkFormat = new Intl.NumberFormat("en-US", {
  maximumFractionDigits: 0,
});

export function formatDkk(value: number): string {
  return `${dkkFormat.format(value)} DKK`;
}

type Attrs = Record<string, string | boolean | ((ev: Event) => void)>;
type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Attrs = {}, children: Child[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key.replace(/^on/, ""), value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
      if (key === "disabled") (node as HTMLButtonElement).disabled = value;
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export function render(root: HTMLElement, ctx: RenderContext): void {
  const { state } = ctx;
  root.textContent = "";
  root.append(sessionBar(ctx));
  if (state.error) root.append(errorBanner(ctx));
  if (!state.session) {
    root.append(el("p", { class: "hint" },
      ["Pick a world and start a session."]));
    return;
  }
  const main = el("div", { class: "columns" });
  const left = el("div", { class: "col" });
  left.append(zoneMap(ctx), metricPicker(ctx), historyPanel(ctx));
  const right = el("div", { class: "col" });
  right.append(palette(ctx), planPanel(ctx), whatifPanel(ctx),
               comparePanel(ctx));
  main.append(left, right);
  root.append(main);
}

// ---------------------------------------------------------------------------
// header and session picker

function sessionBar(ctx: RenderContext): HTMLElement {
  const { state, worlds, handlers } = ctx;
  const bar = el("div", { class: "session-bar" });

  const worldSel = el("select", { "data-testid": "world-select" });
  for (const w of worlds) {
    worldSel.append(el("option", { value: w.name },
      [`${w.name} (${w.zones} zones, ${w.startYear}..${w.endYear})`]));
  }
  const scenarioSel = el("select", { "data-testid": "scenario-select" });
  const scenarios = worlds[0]?.scenarios ?? ["rcp26", "rcp45", "rcp85"];
  for (const s of scenarios) {
    scenarioSel.append(el("option", { value: s }, [s.toUpperCase()]));
  }
  const seedInput = el("input", {
    type: "number", value: "0", "data-testid": "seed-input",
  });
  const start = el("button", {
    "data-testid": "new-session",
    onclick: () => handlers.onNewSession(
      worldSel.value, scenarioSel.value,
      Number.parseInt(seedInput.value, 10) || 0),
  }, ["Start session"]);
  bar.append(worldSel, scenarioSel, seedInput, start);

  const s = state.session;
  if (s) {
    const status = s.done
      ? "finished"
      : `year ${s.year} of ${s.startYear}..${s.endYear}`;
    bar.append(el("span", { class: "session-info" }, [
      `${s.world} | ${s.scenario.toUpperCase()} | seed ${s.seed} | ${status}`,
    ]));
    if (s.policyAttached) {
      bar.append(el("span", { class: "badge" }, ["policy attached"]));
    }
  }
  return bar;
}

function errorBanner(ctx: RenderContext): HTMLElement {
  return el("div", { class: "error-banner", "data-testid": "error-banner" }, [
    el("span", {}, [ctx.state.error ?? ""]),
    el("button", { onclick: () => ctx.handlers.onClearError() }, ["dismiss"]),
  ]);
}

// ---------------------------------------------------------------------------
// map

function heatColor(value: number, maxValue: number): string {
  if (maxValue <= 0) return "#e2e8f0";
  const t = Math.min(value / maxValue, 1);
  const shade = Math.round(232 - t * 160);
  return `rgb(244, ${shade}, ${Math.round(shade * 0.85)})`;
}

function zoneMap(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const width = 420;
  const height = 320;
  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`,
    class: "zone-map",
    "data-testid": "zone-map",
  });
  const positions = zoneLayout(session.zoneGraph.zones,
                               session.zoneGraph.edges);
  const px = (p: { x: number; y: number }) =>
    ({ x: p.x * width, y: p.y * height });

  for (const [a, b] of session.zoneGraph.edges) {
    const pa = px(positions[a]);
    const pb = px(positions[b]);
    svg.append(svgEl("line", {
      x1: pa.x.toFixed(1), y1: pa.y.toFixed(1),
      x2: pb.x.toFixed(1), y2: pb.y.toFixed(1),
      stroke: "#94a3b8", "stroke-width": "2",
    }));
  }

  const values = zoneMetricValues(state);
  const maxValue = values.reduce((m, v) => Math.max(m, v), 0);
  for (let z = 0; z < session.zones; z++) {
    const p = px(positions[z]);
    const radius = Math.min(26, 130 / Math.sqrt(session.zones) + 8);
    const hex = svgEl("polygon", {
      points: hexPoints(p.x, p.y, radius),
      fill: heatColor(values[z] ?? 0, maxValue),
      stroke: state.selectedZone === z ? "#0f172a" : "#64748b",
      "stroke-width": state.selectedZone === z ? "3" : "1",
      class: "zone-hex",
      "data-zone": String(z),
    });
    hex.append(svgEl("title"));
    hex.querySelector("title")!.textContent =
      `zone ${z}: ${COMPONENT_LABELS[state.metric]} ${
        formatDkk(values[z] ?? 0)}`;
    hex.addEventListener("click", () => handlers.onSelectZone(z));
    svg.append(hex);
    const label = svgEl("text", {
      x: p.x.toFixed(1), y: (p.y + 4).toFixed(1),
      "text-anchor": "middle", "font-size": "12",
      fill: "#0f172a", "pointer-events": "none",
    });
    label.textContent = String(z);
    svg.append(label);
  }

  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, ["Zones"]), svg);
  return wrap;
}

function metricPicker(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const wrap = el("div", { class: "metric-picker" });
  for (const key of COMPONENT_KEYS) {
    wrap.append(el("button", {
      class: state.metric === key ? "metric picked" : "metric",
      "data-testid": `metric-${key}`,
      onclick: () => handlers.onMetric(key),
    }, [COMPONENT_LABELS[key]]));
  }
  return wrap;
}

// ---------------------------------------------------------------------------
// action palette and plan

function palette(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const zone = state.selectedZone ?? 0;
  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, [`Measures for zone ${zone}`]));
  const grid = el("div", { class: "palette", "data-testid": "palette" });
  for (const entry of session.catalog) {
    const allowed = session.masks[zone]?.[entry.id] ?? false;
    const picked = state.pending[zone] === entry.id;
    const reason = allowed
      ? ""
      : maskedExplanation(session, zone, entry.id) ?? "not available";
    const button = el("button", {
      class: picked ? "measure picked" : "measure",
      "data-testid": "palette-button",
      "data-action": String(entry.id),
      disabled: !allowed,
      title: reason,
      onclick: () => handlers.onPick(zone, entry.id),
    }, [
      el("span", { class: "measure-name" }, [entry.name]),
      el("span", { class: "measure-cost" },
        [entry.implCost_dkk > 0
          ? formatDkk(entry.implCost_dkk)
          : "no cost"]),
    ]);
    grid.append(button);
  }
  wrap.append(grid);
  return wrap;
}

function planPanel(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, [`Plan for ${session.year}`]));
  const table = el("table", { class: "plan", "data-testid": "pending-plan" });
  const head = el("tr", {});
  head.append(el("th", {}, ["zone"]), el("th", {}, ["measure"]));
  table.append(head);
  state.pending.forEach((action, zone) => {
    const name = session.catalog[action]?.name ?? `measure ${action}`;
    const row = el("tr", {
      class: zone === state.selectedZone ? "selected" : "",
      onclick: () => handlers.onSelectZone(zone),
    });
    row.append(el("td", {}, [String(zone)]),
               el("td", { "data-testid": `plan-zone-${zone}` }, [name]));
    table.append(row);
  });
  wrap.append(table);
  const advance = el("button", {
    class: "advance",
    "data-testid": "advance",
    disabled: state.stepping || session.done,
    onclick: () => handlers.onStep(),
  }, [state.stepping ? "advancing..." : `Advance to ${session.year + 1}`]);
  wrap.append(advance);
  if (session.done) {
    wrap.append(el("p", { class: "hint" },
      ["Horizon reached; start a new session to keep exploring."]));
  }
  return wrap;
}

// ---------------------------------------------------------------------------
// history

function componentTable(row: StepRow): HTMLElement {
  const table = el("table", { class: "components" });
  const head = el("tr", {});
  const body = el("tr", {});
  for (const key of COMPONENT_KEYS) {
    head.append(el("th", {}, [COMPONENT_LABELS[key]]));
    body.append(el("td", { "data-testid": `component-${key}` },
      [formatDkk(row.components[key])]));
  }
  table.append(head, body);
  return table;
}

function historyPanel(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, ["History"]));
  const history = session.history;
  if (history.length === 0) {
    wrap.append(el("p", { class: "hint" },
      ["No years simulated yet. Build a plan and advance."]));
    return wrap;
  }

  const index = state.cursor ?? history.length - 1;
  const scrubber = el("input", {
    type: "range", min: "0", max: String(history.length - 1),
    value: String(index), "data-testid": "scrubber",
    oninput: (ev: Event) => {
      const raw = Number.parseInt((ev.target as HTMLInputElement).value, 10);
      handlers.onCursor(raw === history.length - 1 ? null : raw);
    },
  });
  wrap.append(scrubber);

  const row = inspectedRow(state)!;
  wrap.append(el("p", { class: "row-line" }, [
    `${row.year}: rain ${row.rain_mm.toFixed(1)} mm, `
    + `${row.cancelledTrips} cancelled and ${row.delayedTrips} `
    + `delayed trips`,
  ]));
  wrap.append(componentTable(row));
  const reward = el("p", { class: "reward" }, [
    "reward ",
    el("strong", { "data-testid": "reward-value" },
      [formatDkk(displayedReward(row.components))]),
  ]);
  if (!rewardConsistent(row)) {
    reward.append(el("span", { class: "warn", "data-testid": "reward-warn" },
      [" (does not match server reward)"]));
  }
  wrap.append(reward);

  wrap.append(el("p", { class: "cumulative" }, [
    `cumulative: ${COMPONENT_KEYS.map(
      (k) => `${k} ${formatDkk(session.cumulative[k])}`).join(", ")}`,
  ]));

  wrap.append(historyChart(ctx));
  return wrap;
}

interface Series {
  label: string;
  color: string;
  dash?: string;
  values: number[];
}

function lineChart(years: number[], seriesList: Series[],
                   testid: string): SVGElement {
  const width = 420;
  const height = 180;
  const pad = 28;
  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`,
    class: "chart",
    "data-testid": testid,
  });
  const visible = seriesList.filter((s) => s.values.length > 0);
  if (years.length === 0 || visible.length === 0) return svg;

  let lo = 0;
  let hi = 0;
  for (const s of visible) {
    for (const v of s.values) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (hi - lo < 1e-9) hi = lo + 1;
  const sx = (i: number) => years.length === 1
    ? width / 2
    : pad + (i / (years.length - 1)) * (width - 2 * pad);
  const sy = (v: number) =>
    height - pad - ((v - lo) / (hi - lo)) * (height - 2 * pad);

  const zero = sy(0);
  svg.append(svgEl("line", {
    x1: String(pad), y1: zero.toFixed(1),
    x2: String(width - pad), y2: zero.toFixed(1),
    stroke: "#cbd5e1", "stroke-width": "1",
  }));

  for (const s of visible) {
    const points = s.values
      .map((v, i) => `${sx(i).toFixed(1)},${sy(v).toFixed(1)}`)
      .join(" ");
    const attrs: Record<string, string> = {
      points, fill: "none", stroke: s.color, "stroke-width": "2",
      "data-series": s.label,
    };
    if (s.dash) attrs["stroke-dasharray"] = s.dash;
    svg.append(svgEl("polyline", attrs));
  }

  const loLabel = svgEl("text", {
    x: "2", y: String(height - pad), "font-size": "10", fill: "#64748b",
  });
  loLabel.textContent = dkkFormat.format(lo);
  const hiLabel = svgEl("text", {
    x: "2", y: String(pad), "font-size": "10", fill: "#64748b",
  });
  hiLabel.textContent = dkkFormat.format(hi);
  svg.append(loLabel, hiLabel);
  return svg;
}

function togglesBar(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const bar = el("div", { class: "toggles" });
  for (const key of COMPONENT_KEYS) {
    bar.append(el("button", {
      class: state.toggles[key] ? "toggle on" : "toggle",
      "data-testid": `toggle-${key}`,
      onclick: () => handlers.onToggle(key),
    }, [key]));
  }
  return bar;
}

function historyChart(ctx: RenderContext): HTMLElement {
  const { state } = ctx;
  const session = state.session!;
  const series = componentSeries(session.history);
  const list: Series[] = COMPONENT_KEYS
    .filter((key) => state.toggles[key])
    .map((key) => ({
      label: key,
      color: COMPONENT_COLORS[key],
      values: series.values[key],
    }));
  const wrap = el("div", { class: "chart-block" });
  wrap.append(togglesBar(ctx));
  wrap.append(lineChart(series.years, list, "history-chart"));
  return wrap;
}

// ---------------------------------------------------------------------------
// what-if

function whatifSide(title: string, payload: {
  totalReward_dkk: number;
  horizon: number;
  clamped: boolean;
  years: StepRow[];
}, testid: string): HTMLElement {
  const side = el("div", { class: "whatif-side" });
  side.append(el("h3", {}, [title]));
  const span = payload.years.length;
  side.append(el("p", {}, [
    "total reward ",
    el("strong", { "data-testid": testid },
      [formatDkk(payload.totalReward_dkk)]),
    ` over ${span} year${span === 1 ? "" : "s"}`
    + (payload.clamped ? " (clamped to the end of the horizon)" : ""),
  ]));
  const list = el("ul", { class: "whatif-years" });
  for (const row of payload.years) {
    list.append(el("li", {}, [
      `${row.year}: ${formatDkk(row.reward_dkk)} `
      + `(rain ${row.rain_mm.toFixed(1)} mm)`,
    ]));
  }
  side.append(list);
  return side;
}

function whatifPanel(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, ["What if?"]));
  const remaining = session.endYear - session.year + 1;
  const horizonInput = el("input", {
    type: "number", min: "1", max: String(Math.max(remaining, 1)),
    value: "3", "data-testid": "whatif-horizon",
  });
  const run = el("button", {
    "data-testid": "whatif-run",
    disabled: session.done || state.stepping,
    onclick: () => handlers.onWhatif(
      Number.parseInt(horizonInput.value, 10) || 1),
  }, ["Project pending plan"]);
  wrap.append(el("div", { class: "whatif-controls" }, [
    el("label", {}, ["years ", horizonInput]), run,
  ]));
  wrap.append(el("p", { class: "hint" }, [
    "Projections never advance the session; the server replays them "
    + "from the current year with a deterministic preview seed.",
  ]));

  const view = state.whatif;
  if (!view) return wrap;

  const panels = el("div", { class: "whatif-panels" });
  panels.append(
    whatifSide("Pending plan", view.candidate, "whatif-candidate-total"),
    whatifSide("Do nothing", view.baseline, "whatif-baseline-total"));
  wrap.append(panels);

  const delta = netDelta(view);
  const verdict = delta > 0 ? "better than" : delta < 0
    ? "worse than" : "the same as";
  wrap.append(el("p", { class: "whatif-net" }, [
    "net effect ",
    el("strong", { "data-testid": "whatif-net" }, [formatDkk(delta)]),
    `, the plan is ${verdict} doing nothing over this projection`,
  ]));
  return wrap;
}

// ---------------------------------------------------------------------------
// compare

function comparePanel(ctx: RenderContext): HTMLElement {
  const { state, handlers } = ctx;
  const session = state.session!;
  const wrap = el("div", { class: "panel" });
  wrap.append(el("h2", {}, ["Against the trained policy"]));
  if (!session.policyAttached) {
    wrap.append(el("p", { class: "hint" },
      ["No policy is attached to this world."]));
    return wrap;
  }
  const run = el("button", {
    "data-testid": "compare-run",
    disabled: session.history.length === 0,
    onclick: () => handlers.onCompare(),
  }, ["Replay my years with the policy"]);
  wrap.append(run);

  const payload = state.compare;
  if (!payload) return wrap;

  const years = payload.human.series.map((r) => r.year);
  const list: Series[] = [];
  for (const key of COMPONENT_KEYS) {
    if (!state.toggles[key]) continue;
    list.push({
      label: `human ${key}`,
      color: COMPONENT_COLORS[key],
      values: payload.human.series.map((r) => r.components[key]),
    });
    list.push({
      label: `policy ${key}`,
      color: COMPONENT_COLORS[key],
      dash: "5,4",
      values: payload.policy.series.map((r) => r.components[key]),
    });
  }
  wrap.append(togglesBar(ctx));
  wrap.append(lineChart(years, list, "compare-chart"));
  wrap.append(el("p", {}, [
    "cumulative cost: you ",
    el("strong", { "data-testid": "compare-human-cost" },
      [formatDkk(payload.human.cumulative.cost_dkk)]),
    ", policy ",
    el("strong", { "data-testid": "compare-policy-cost" },
      [formatDkk(payload.policy.cumulative.cost_dkk)]),
    " (solid you, dashed policy)",
  ]));
  return wrap;
}
