/** Shared editor types and the standard 68-point landmark grouping. */

export interface Point {
  x: number; // normalized [0, 1]
  y: number;
}

export const NUM_LANDMARKS = 68;

/**
 * Polyline groups matching the server-side landmark map renderer, so what
 * the user drags is exactly what conditions the generator.
 */
export interface LandmarkGroup {
  name: string;
  indices: number[];
  closed: boolean;
}

const range = (start: number, end: number) =>
  Array.from({ length: end - start }, (_, i) => start + i);

export const LANDMARK_GROUPS: LandmarkGroup[] = [
  { name: "contour", indices: range(0, 17), closed: false },
  { name: "right-brow", indices: range(17, 22), closed: false },
  { name: "left-brow", indices: range(22, 27), closed: false },
  { name: "nose", indices: range(27, 36), closed: false },
  { name: "right-eye", indices: range(36, 42), closed: true },
  { name: "left-eye", indices: range(42, 48), closed: true },
  { name: "outer-lip", indices: range(48, 60), closed: true },
  { name: "inner-lip", indices: range(60, 68), closed: true },
];

export function groupOf(index: number): LandmarkGroup {
  const group = LANDMARK_GROUPS.find((g) => g.indices.includes(index));
  if (!group) throw new Error(`no landmark group contains index ${index}`);
  return group;
}

export const clamp01 = (v: number) => Math.min(1, Math.max(0, v));
