// World-to-screen mapping: a fit-to-bounds affine transform. Yards are local
// frames, so no geographic projection — just uniform scale, centering, and a
// y-flip (world y grows up, canvas y grows down).

export interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function boundsOf(points: { x: number; y: number }[]): Bounds | null {
  if (points.length === 0) {
    return null;
  }
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    minX = Math.min(minX, p.x);
    minY = Math.min(minY, p.y);
    maxX = Math.max(maxX, p.x);
    maxY = Math.max(maxY, p.y);
  }
  return { minX, minY, maxX, maxY };
}

export function expand(bounds: Bounds, margin: number): Bounds {
  return {
    minX: bounds.minX - margin,
    minY: bounds.minY - margin,
    maxX: bounds.maxX + margin,
    maxY: bounds.maxY + margin,
  };
}

export function fitToBounds(bounds: Bounds, width: number, height: number, padding = 20): Transform {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-6);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-6);
  const scale = Math.min((width - 2 * padding) / spanX, (height - 2 * padding) / spanY);
  // center the yard in the viewport
  const offsetX = (width - scale * spanX) / 2 - scale * bounds.minX;
  const offsetY = (height - scale * spanY) / 2 + scale * bounds.maxY;
  return { scale, offsetX, offsetY };
}

export function worldToScreen(t: Transform, x: number, y: number): { x: number; y: number } {
  return { x: t.offsetX + t.scale * x, y: t.offsetY - t.scale * y };
}
