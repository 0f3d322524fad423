import { describe, expect, it } from "vitest";

import {
  NODE_RADIUS,
  circularLayout,
  edgePath,
  labelPoint,
  latticeLayout,
  strengthColor,
} from "../src/layout.js";

const VARS = ["North", "East", "South", "West"];

describe("circular layout", () => {
  it("is deterministic", () => {
    const a = circularLayout(VARS, 860, 620);
    const b = circularLayout(VARS, 860, 620);
    expect([...a.entries()]).toEqual([...b.entries()]);
  });

  it("places nodes clockwise in variable order from twelve o'clock", () => {
    const points = circularLayout(VARS, 860, 620);
    const north = points.get("North")!;
    const east = points.get("East")!;
    const south = points.get("South")!;
    const west = points.get("West")!;
    expect(north.x).toBeCloseTo(430, 6);
    expect(north.y).toBeCloseTo(310 - 240, 6);
    expect(east.x).toBeCloseTo(430 + 240, 6);
    expect(south.y).toBeCloseTo(310 + 240, 6);
    expect(west.x).toBeCloseTo(430 - 240, 6);
  });

  it("centers a single node", () => {
    expect(circularLayout(["Only"], 400, 300).get("Only")).toEqual({ x: 200, y: 150 });
  });
});

describe("edge geometry", () => {
  const a = { x: 100, y: 100 };
  const b = { x: 400, y: 100 };

  it("pads both ends off the node circles", () => {
    const path = edgePath(a, b, false);
    expect(path).toBe(`M ${100 + NODE_RADIUS + 4} 100 L ${400 - NODE_RADIUS - 4} 100`);
  });

  it("bends one of a bidirectional pair into a quadratic arc", () => {
    expect(edgePath(a, b, true)).toMatch(/^M .+ Q .+ .+$/);
    expect(edgePath(a, b, true)).not.toBe(edgePath(b, a, true));
  });

  it("keeps label placement a pure function of the endpoints", () => {
    expect(labelPoint(a, b, true)).toEqual(labelPoint(a, b, true));
    expect(labelPoint(a, b, false).y).toBeCloseTo(96, 6);
  });
});

describe("strength color ramp", () => {
  it("maps missing strength to no color", () => {
    expect(strengthColor(null, 1)).toBe("");
  });

  it("runs light to dark as |strength| approaches the scene maximum", () => {
    expect(strengthColor(0, 1)).toBe("hsl(215 70% 80%)");
    expect(strengthColor(1, 1)).toBe("hsl(215 70% 32%)");
    expect(strengthColor(0.5, 1)).toBe("hsl(215 70% 56%)");
    // a flat scene (all strengths equal magnitude zero) stays at the light end
    expect(strengthColor(0, 0)).toBe("hsl(215 70% 80%)");
  });
});

describe("lattice layout", () => {
  const cell = { width: 100, height: 50, left: 150, top: 60 };
  const at = latticeLayout(["A", "B"], 3, cell);

  it("puts lag 0 in the rightmost column and deeper lags further left", () => {
    expect(at("A", 0)).toEqual({ x: 150 + 300, y: 60 });
    expect(at("A", 3)).toEqual({ x: 150, y: 60 });
    expect(at("B", 1).y).toBe(110);
    expect(at("A", 1).x).toBeGreaterThan(at("A", 2).x);
  });

  it("throws on cells outside the grid", () => {
    expect(() => at("Q", 0)).toThrow("no lattice cell");
    expect(() => at("A", 4)).toThrow("no lattice cell");
    expect(() => at("A", -1)).toThrow("no lattice cell");
  });
});
