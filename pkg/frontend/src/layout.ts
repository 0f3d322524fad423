/** Deterministic geometry: the same graph JSON always yields the same scene. */

export interface Point {
  x: number;
  y: number;
}

export const NODE_RADIUS = 26;

/** Nodes on a circle in variable order, first variable at twelve o'clock. */
export function circularLayout(
  variables: string[],
  width: number,
  height: number,
  margin = 70,
): Map<string, Point> {
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.max(10, Math.min(width, height) / 2 - margin);
  const points = new Map<string, Point>();
  const n = variables.length;
  variables.forEach((name, i) => {
    if (n === 1) {
      points.set(name, { x: cx, y: cy });
      return;
    }
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / n;
    points.set(name, {
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
    });
  });
  return points;
}

function shift(a: Point, b: Point, curved: boolean): Point {
  // perpendicular offset so an A->B / B->A pair never overlaps
  if (!curved) return { x: 0, y: 0 };
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len = Math.hypot(dx, dy) || 1;
  return { x: (-dy / len) * 18, y: (dx / len) * 18 };
}

/** SVG path from a to b, ends padded off the node circles. */
export function edgePath(a: Point, b: Point, curved: boolean): string {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len = Math.hypot(dx, dy) || 1;
  const pad = NODE_RADIUS + 4;
  const start = { x: a.x + (dx / len) * pad, y: a.y + (dy / len) * pad };
  const end = { x: b.x - (dx / len) * pad, y: b.y - (dy / len) * pad };
  if (!curved) {
    return `M ${round(start.x)} ${round(start.y)} L ${round(end.x)} ${round(end.y)}`;
  }
  const off = shift(a, b, true);
  const mid = { x: (start.x + end.x) / 2 + off.x * 2, y: (start.y + end.y) / 2 + off.y * 2 };
  return `M ${round(start.x)} ${round(start.y)} Q ${round(mid.x)} ${round(mid.y)} ${round(end.x)} ${round(end.y)}`;
}

/** Where the lag-list label sits for an edge. */
export function labelPoint(a: Point, b: Point, curved: boolean): Point {
  const off = shift(a, b, curved);
  const k = curved ? 1.6 : 0.45;
  return {
    x: (a.x + b.x) / 2 + off.x * k,
    y: (a.y + b.y) / 2 + off.y * k - 4,
  };
}

function round(v: number): number {
  return Math.round(v * 100) / 100;
}

/** Map |strength| onto a blue ramp; null (strengthless links) gets no fill. */
export function strengthColor(abs: number | null, maxAbs: number): string {
  if (abs === null) return "";
  const t = maxAbs > 0 ? Math.min(1, abs / maxAbs) : 0;
  const light = Math.round(80 - 48 * t);
  return `hsl(215 70% ${light}%)`;
}

export interface LatticeCell {
  width: number;
  height: number;
  left: number;
  top: number;
}

/** Time-expanded grid: one column per step t-tau..t, one row per variable. */
export function latticeLayout(
  variables: string[],
  tauMax: number,
  cell: LatticeCell,
): (variable: string, lagBack: number) => Point {
  const row = new Map(variables.map((v, i) => [v, i]));
  return (variable, lagBack) => {
    const r = row.get(variable);
    if (r === undefined || lagBack < 0 || lagBack > tauMax) {
      throw new Error(`no lattice cell for ${variable} at lag ${lagBack}`);
    }
    return {
      x: cell.left + (tauMax - lagBack) * cell.width,
      y: cell.top + r * cell.height,
    };
  };
}
