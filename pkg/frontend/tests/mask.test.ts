import { describe, expect, it } from "vitest";

import { MaskBuffer } from "../src/mask.js";

describe("MaskBuffer", () => {
  it("starts empty", () => {
    const m = new MaskBuffer(16, 16);
    expect(m.isEmpty).toBe(true);
    expect(m.selectedCount).toBe(0);
  });

  it("paints a full-hardness disc", () => {
    const m = new MaskBuffer(32, 32);
    m.paint(16, 16, 5);
    expect(m.isEmpty).toBe(false);
    // brute-force the same circle test
    let expected = 0;
    for (let y = 0; y < 32; y++) {
      for (let x = 0; x < 32; x++) {
        const hit = (x - 16) ** 2 + (y - 16) ** 2 <= 25 ? 1 : 0;
        expect(m.bits[y * 32 + x]).toBe(hit);
        expected += hit;
      }
    }
    expect(m.selectedCount).toBe(expected);
  });

  it("erasing the same stroke leaves the mask empty", () => {
    const m = new MaskBuffer(40, 40);
    const stroke: [number, number][] = [
      [8, 8],
      [14, 11],
      [20, 15],
      [27, 22],
      [33, 30],
    ];
    m.stroke(stroke, 6, "paint");
    expect(m.selectedCount).toBeGreaterThan(0);
    m.stroke(stroke, 6, "erase");
    expect(m.isEmpty).toBe(true);
  });

  it("a wider eraser clears a narrower stroke too", () => {
    const m = new MaskBuffer(24, 24);
    m.paint(12, 12, 3);
    m.erase(12, 12, 8);
    expect(m.isEmpty).toBe(true);
  });

  it("clips strokes at the canvas border without throwing", () => {
    const m = new MaskBuffer(8, 8);
    m.paint(0, 0, 10); // disc mostly off-canvas
    m.paint(7.5, 7.5, 4);
    m.paint(-3, 4, 2);
    expect(m.bits.length).toBe(64);
    for (const b of m.bits) expect(b === 0 || b === 1).toBe(true);
  });

  it("stays strictly binary under overlapping strokes", () => {
    const m = new MaskBuffer(20, 20);
    for (let i = 0; i < 10; i++) m.paint(10, 10, 4 + (i % 3));
    for (const b of m.bits) expect(b === 0 || b === 1).toBe(true);
    m.erase(10, 10, 2);
    expect(m.bits[10 * 20 + 10]).toBe(0);
    expect(m.bits[4 * 20 + 10]).toBe(1); // ring outside the erased core survives
  });

  it("rejects non-positive radius and bad dimensions", () => {
    const m = new MaskBuffer(4, 4);
    expect(() => m.paint(1, 1, 0)).toThrow(/radius/);
    expect(() => m.erase(1, 1, -2)).toThrow(/radius/);
    expect(() => new MaskBuffer(0, 5)).toThrow(/dimensions/);
    expect(() => new MaskBuffer(3, 3, new Uint8Array([0, 1, 2, 0, 0, 0, 0, 0, 0]))).toThrow(
      /want 0 or 1/,
    );
  });

  it("clones independently", () => {
    const m = new MaskBuffer(6, 6);
    m.paint(3, 3, 2);
    const copy = m.clone();
    copy.erase(3, 3, 6);
    expect(copy.isEmpty).toBe(true);
    expect(m.isEmpty).toBe(false);
  });
});
