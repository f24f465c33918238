import { describe, expect, it } from "vitest";

import { boundsOf, expand, fitToBounds, worldToScreen } from "../src/transform.js";

describe("boundsOf", () => {
  it("finds the bounding box", () => {
    const b = boundsOf([
      { x: -2, y: 5 },
      { x: 7, y: -1 },
      { x: 3, y: 9 },
    ]);
    expect(b).toEqual({ minX: -2, minY: -1, maxX: 7, maxY: 9 });
  });

  it("is null for no points", () => {
    expect(boundsOf([])).toBeNull();
  });
});

describe("fitToBounds", () => {
  const bounds = { minX: 0, minY: 0, maxX: 100, maxY: 50 };

  it("maps world corners inside the viewport with padding", () => {
    const t = fitToBounds(bounds, 640, 480, 20);
    const corners = [
      worldToScreen(t, 0, 0),
      worldToScreen(t, 100, 0),
      worldToScreen(t, 0, 50),
      worldToScreen(t, 100, 50),
    ];
    for (const c of corners) {
      expect(c.x).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(c.x).toBeLessThanOrEqual(640 - 20 + 1e-9);
      expect(c.y).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(c.y).toBeLessThanOrEqual(480 - 20 + 1e-9);
    }
  });

  it("uses a uniform scale (no distortion)", () => {
    const t = fitToBounds(bounds, 640, 480, 0);
    const a = worldToScreen(t, 0, 0);
    const b = worldToScreen(t, 10, 0);
    const c = worldToScreen(t, 0, 10);
    expect(Math.abs(b.x - a.x)).toBeCloseTo(Math.abs(a.y - c.y), 9);
  });

  it("flips the y axis (world up is screen up)", () => {
    const t = fitToBounds(bounds, 640, 480, 0);
    const low = worldToScreen(t, 0, 0);
    const high = worldToScreen(t, 0, 50);
    expect(high.y).toBeLessThan(low.y);
  });

  it("centers the yard", () => {
    const t = fitToBounds(bounds, 640, 480, 0);
    const mid = worldToScreen(t, 50, 25);
    expect(mid.x).toBeCloseTo(320, 6);
    expect(mid.y).toBeCloseTo(240, 6);
  });

  it("expand grows bounds on all sides", () => {
    expect(expand(bounds, 5)).toEqual({ minX: -5, minY: -5, maxX: 105, maxY: 55 });
  });
});
