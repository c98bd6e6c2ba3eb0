/** Binary selection mask with a full-hardness circular brush.
 *
 *  Bits are 0 or 1, one byte per pixel; there is no soft edge anywhere, so
 *  the exported PNG holds only 0 and 255 no matter how strokes overlap.
 */

export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  readonly bits: Uint8Array;

  constructor(width: number, height: number, bits?: Uint8Array) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
      throw new Error(`invalid mask dimensions ${width}x${height}`);
    }
    if (bits !== undefined && bits.length !== width * height) {
      throw new Error(`bits length ${bits.length} does not match ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.bits = bits ? bits.slice() : new Uint8Array(width * height);
    for (let i = 0; i < this.bits.length; i++) {
      if (this.bits[i] !== 0 && this.bits[i] !== 1) {
        throw new Error(`mask bit ${i} is ${this.bits[i]}, want 0 or 1`);
      }
    }
  }

  clone(): MaskBuffer {
    return new MaskBuffer(this.width, this.height, this.bits);
  }

  get isEmpty(): boolean {
    return !this.bits.some((b) => b === 1);
  }

  get selectedCount(): number {
    let n = 0;
    for (let i = 0; i < this.bits.length; i++) n += this.bits[i];
    return n;
  }

  /** Stamp a filled circle; pixels with center distance <= radius flip on. */
  paint(cx: number, cy: number, radius: number): void {
    this.stamp(cx, cy, radius, 1);
  }

  /** Same circle, flipping pixels off. Erasing a painted stroke undoes it. */
  erase(cx: number, cy: number, radius: number): void {
    this.stamp(cx, cy, radius, 0);
  }

  private stamp(cx: number, cy: number, radius: number, value: 0 | 1): void {
    if (!(radius > 0)) {
      throw new Error(`brush radius must be positive, got ${radius}`);
    }
    const r2 = radius * radius;
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          this.bits[y * this.width + x] = value;
        }
      }
    }
  }

  /** Apply a whole stroke (a polyline of brush stamps). */
  stroke(points: [number, number][], radius: number, mode: "paint" | "erase"): void {
    for (const [x, y] of points) {
      if (mode === "paint") this.paint(x, y, radius);
      else this.erase(x, y, radius);
    }
  }
}
