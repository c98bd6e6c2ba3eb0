import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { MaskBuffer } from "../src/mask.js";
import { decodeMaskPng, decodePng } from "../src/png.js";
import { canGrabAt, regionTransform, selectionCentroid } from "../src/transform.js";
import type { Rgba } from "../src/types.js";

const fixturePath = (name: string) =>
  fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
const fixtureBytes = (name: string) => new Uint8Array(readFileSync(fixturePath(name)));

interface GoldenCase {
  name: string;
  scale: number;
  dx: number;
  dy: number;
  expected: string;
}

const base = decodePng(fixtureBytes("base.png"));
const maskPng = decodeMaskPng(fixtureBytes("mask.png"));
const mask = new MaskBuffer(maskPng.width, maskPng.height, maskPng.bits);
const cases: GoldenCase[] = JSON.parse(readFileSync(fixturePath("cases.json"), "utf-8"));

function diffCount(a: Rgba, b: Rgba): number {
  let n = 0;
  for (let i = 0; i < a.data.length; i++) if (a.data[i] !== b.data[i]) n++;
  return n;
}

describe("selectionCentroid", () => {
  it("matches the arithmetic mean of selected coordinates", () => {
    const m = new MaskBuffer(10, 10);
    m.bits[2 * 10 + 3] = 1;
    m.bits[4 * 10 + 7] = 1;
    const { cx, cy } = selectionCentroid(m);
    expect(cx).toBe(5); // (3 + 7) / 2
    expect(cy).toBe(3); // (2 + 4) / 2
  });

  it("throws on an empty selection", () => {
    expect(() => selectionCentroid(new MaskBuffer(5, 5))).toThrow(/empty/);
  });
});

describe("regionTransform", () => {
  it("is a no-op at scale 1 with zero offset", () => {
    const out = regionTransform(base, mask, 1.0);
    expect(diffCount(out, base)).toBe(0);
  });

  // the server produced these PNGs from the same base/mask; the browser
  // preview must reproduce every pixel of them
  for (const c of cases) {
    it(`matches the server golden pixel-for-pixel: ${c.name}`, () => {
      const golden = decodePng(fixtureBytes(c.expected));
      const out = regionTransform(base, mask, c.scale, c.dx, c.dy);
      expect(out.width).toBe(golden.width);
      expect(out.height).toBe(golden.height);
      expect(diffCount(out, golden)).toBe(0);
    });
  }

  it("never touches pixels outside the selection", () => {
    const out = regionTransform(base, mask, 0.5, 9, -4);
    for (let i = 0; i < mask.bits.length; i++) {
      if (mask.bits[i]) continue;
      for (let c = 0; c < 4; c++) {
        expect(out.data[i * 4 + c]).toBe(base.data[i * 4 + c]);
      }
    }
  });

  it("fills vacated area with opaque white when shrinking", () => {
    const out = regionTransform(base, mask, 0.5);
    let fills = 0;
    for (let i = 0; i < mask.bits.length; i++) {
      if (!mask.bits[i]) continue;
      if (
        out.data[i * 4] === 255 &&
        out.data[i * 4 + 1] === 255 &&
        out.data[i * 4 + 2] === 255 &&
        out.data[i * 4 + 3] === 255
      ) {
        fills++;
      }
    }
    // shrinking to half leaves roughly three quarters of the disc vacated
    expect(fills).toBeGreaterThan(mask.selectedCount / 2);
  });

  it("rejects non-positive scale", () => {
    expect(() => regionTransform(base, mask, 0)).toThrow(/scale/);
    expect(() => regionTransform(base, mask, -1.5)).toThrow(/scale/);
  });

  it("rejects an empty selection", () => {
    const empty = new MaskBuffer(base.width, base.height);
    expect(() => regionTransform(base, empty, 0.5)).toThrow(/empty/);
  });

  it("rejects mismatched dimensions", () => {
    const small = new MaskBuffer(8, 8);
    small.paint(4, 4, 2);
    expect(() => regionTransform(base, small, 0.5)).toThrow(/8x8/);
  });
});

describe("canGrabAt", () => {
  it("accepts drags that start on the selection", () => {
    expect(canGrabAt(mask, 23, 25)).toBe(true);
  });

  it("rejects drags outside the selection or the canvas", () => {
    expect(canGrabAt(mask, 0, 0)).toBe(false);
    expect(canGrabAt(mask, 47, 47)).toBe(false);
    expect(canGrabAt(mask, -1, 10)).toBe(false);
    expect(canGrabAt(mask, 10, 200)).toBe(false);
  });
});
