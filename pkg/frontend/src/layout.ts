/**
 * Deterministic force layout for the zone adjacency graph.
 *
 * The map is deliberately abstract: hexagonal tiles on a spring
 * embedding of the zone graph, no basemap. Starting positions come
 * from a fixed circle and the solver runs a fixed iteration budget,
 * so the same graph always lands in the same picture.
 */

export interface Point {
  x: number;
  y: number;
}

const ITERATIONS = 300;

export function zoneLayout(zones: number,
                           edges: [number, number][]): Point[] {
  if (zones <= 0) return [];
  if (zones === 1) return [{ x: 0.5, y: 0.5 }];

  // circle initialisation keeps the result independent of call order
  const pos: Point[] = [];
  for (let i = 0; i < zones; i++) {
    const angle = (2 * Math.PI * i) / zones;
    pos.push({ x: Math.cos(angle), y: Math.sin(angle) });
  }

  const ideal = Math.sqrt(4.0 / zones); // spread over a 2x2 box
  let temperature = 0.5;
  const cooling = temperature / ITERATIONS;

  const disp: Point[] = pos.map(() => ({ x: 0, y: 0 }));
  for (let iter = 0; iter < ITERATIONS; iter++) {
    for (const d of disp) {
      d.x = 0;
      d.y = 0;
    }
    // pairwise repulsion
    for (let i = 0; i < zones; i++) {
      for (let j = i + 1; j < zones; j++) {
        let dx = pos[i].x - pos[j].x;
        let dy = pos[i].y - pos[j].y;
        let dist = Math.hypot(dx, dy);
        if (dist < 1e-9) {
          // coincident points: push apart along a direction derived
          // from the indices so ties break the same way every run
          dx = 1e-3 * (i - j);
          dy = 1e-3;
          dist = Math.hypot(dx, dy);
        }
        const force = (ideal * ideal) / dist;
        disp[i].x += (dx / dist) * force;
        disp[i].y += (dy / dist) * force;
        disp[j].x -= (dx / dist) * force;
        disp[j].y -= (dy / dist) * force;
      }
    }
    // spring attraction along edges
    for (const [a, b] of edges) {
      if (a >= zones || b >= zones || a === b) continue;
      const dx = pos[a].x - pos[b].x;
      const dy = pos[a].y - pos[b].y;
      const dist = Math.max(Math.hypot(dx, dy), 1e-9);
      const force = (dist * dist) / ideal;
      disp[a].x -= (dx / dist) * force;
      disp[a].y -= (dy / dist) * force;
      disp[b].x += (dx / dist) * force;
      disp[b].y += (dy / dist) * force;
    }
    for (let i = 0; i < zones; i++) {
      const mag = Math.max(Math.hypot(disp[i].x, disp[i].y), 1e-9);
      const step = Math.min(mag, temperature);
      pos[i].x += (disp[i].x / mag) * step;
      pos[i].y += (disp[i].y / mag) * step;
    }
    temperature = Math.max(temperature - cooling, 1e-3);
  }

  return normalise(pos);
}

/** Rescale positions into [margin, 1 - margin] on both axes. */
function normalise(pos: Point[], margin = 0.12): Point[] {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const p of pos) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = 1 - 2 * margin;
  return pos.map((p) => ({
    x: margin + ((p.x - minX) / spanX) * scale,
    y: margin + ((p.y - minY) / spanY) * scale,
  }));
}

/** SVG polygon `points` attribute for a flat-topped hexagon. */
export function hexPoints(cx: number, cy: number, r: number): string {
  const pts: string[] = [];
  for (let k = 0; k < 6; k++) {
    const angle = (Math.PI / 3) * k + Math.PI / 6;
    const x = cx + r * Math.cos(angle);
    const y = cy + r * Math.sin(angle);
    pts.push(`${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return pts.join(" ");
}
