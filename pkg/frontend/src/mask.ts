/**
 * Binary mask raster at the image's native resolution.
 *
 * The canvas layer only displays this model; all painting math happens here
 * so the uploaded mask is exact regardless of zoom or device pixel ratio.
 */

export class MaskRaster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array; // 0 = keep, 1 = hole

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width < 1 || height < 1) throw new Error(`bad mask size ${width}x${height}`);
    this.width = width;
    this.height = height;
    if (data) {
      if (data.length !== width * height) throw new Error("mask data length mismatch");
      this.data = data;
    } else {
      this.data = new Uint8Array(width * height);
    }
  }

  clone(): MaskRaster {
    return new MaskRaster(this.width, this.height, this.data.slice());
  }

  clear(): void {
    this.data.fill(0);
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  holeCount(): number {
    let n = 0;
    for (const v of this.data) n += v;
    return n;
  }

  /** Paint (or erase) a filled circle; coordinates in image pixels. */
  brush(cx: number, cy: number, radius: number, value: 0 | 1 = 1): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.data[y * this.width + x] = value;
      }
    }
  }

  /** Paint (or erase) an axis-aligned rectangle; corners in image pixels. */
  rect(xa: number, ya: number, xb: number, yb: number, value: 0 | 1 = 1): void {
    const x0 = Math.max(0, Math.min(Math.round(xa), Math.round(xb)));
    const x1 = Math.min(this.width - 1, Math.max(Math.round(xa), Math.round(xb)));
    const y0 = Math.max(0, Math.min(Math.round(ya), Math.round(yb)));
    const y1 = Math.min(this.height - 1, Math.max(Math.round(ya), Math.round(yb)));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) this.data[y * this.width + x] = value;
    }
  }

  /** A stroke: stamped circles along the segment so fast drags stay solid. */
  stroke(x0: number, y0: number, x1: number, y1: number, radius: number, value: 0 | 1 = 1): void {
    const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0)));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.brush(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, radius, value);
    }
  }

  /** Grayscale bytes for PNG encoding: strictly 0 or 255. */
  toGrayscaleBytes(): Uint8Array {
    const out = new Uint8Array(this.data.length);
    for (let i = 0; i < this.data.length; i++) out[i] = this.data[i] ? 255 : 0;
    return out;
  }
}
