import type { CurvePoint } from "./types.js";

export interface ChartGeometry {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = {
  width: 560,
  height: 260,
  padLeft: 44,
  padRight: 12,
  padTop: 10,
  padBottom: 28,
};

export interface Scale {
  x: (labeledCount: number) => number;
  y: (f1: number) => number;
  xDomain: [number, number];
  yDomain: [number, number];
}

/**
 * Pixel mapping for learning-curve points: x spans the labeled counts,
 * y is always the full [0, 1] micro-F1 range so curves are comparable
 * across refreshes.
 */
export function curveScale(points: CurvePoint[], geo: ChartGeometry): Scale {
  const counts = points.map((p) => p.labeled_count);
  const xMin = Math.min(...counts);
  const xMax = Math.max(...counts);
  const xSpan = xMax > xMin ? xMax - xMin : 1;
  const innerW = geo.width - geo.padLeft - geo.padRight;
  const innerH = geo.height - geo.padTop - geo.padBottom;
  return {
    x: (v) => geo.padLeft + ((v - xMin) / xSpan) * innerW,
    y: (v) => geo.padTop + (1 - v) * innerH,
    xDomain: [xMin, xMax],
    yDomain: [0, 1],
  };
}

/** SVG polyline "points" attribute for the micro-F1 series. */
export function polylinePoints(points: CurvePoint[], geo: ChartGeometry): string {
  if (points.length === 0) return "";
  const scale = curveScale(points, geo);
  return points
    .map((p) => `${scale.x(p.labeled_count).toFixed(1)},${scale.y(p.micro_f1).toFixed(1)}`)
    .join(" ");
}

export interface Marker {
  cx: number;
  cy: number;
  labeledCount: number;
  microF1: number;
}

/** Circle markers carrying the exact underlying values for tooltips. */
export function markers(points: CurvePoint[], geo: ChartGeometry): Marker[] {
  const scale = curveScale(points, geo);
  return points.map((p) => ({
    cx: scale.x(p.labeled_count),
    cy: scale.y(p.micro_f1),
    labeledCount: p.labeled_count,
    microF1: p.micro_f1,
  }));
}
