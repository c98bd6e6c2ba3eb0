/** PNG codec helpers for node-side code (tests, golden comparisons).
 *
 *  The browser panel itself renders through canvas and never imports this
 *  module; everything here exists so tests can compare the exact bytes and
 *  pixels the server produces.
 */

import { PNG } from "pngjs";
import type { Rgba } from "./types.js";

/** Decode any 8-bit PNG (gray, RGB, RGBA) into an RGBA raster. */
export function decodePng(bytes: Uint8Array): Rgba {
  const png = PNG.sync.read(Buffer.from(bytes));
  return {
    width: png.width,
    height: png.height,
    data: new Uint8Array(png.data.buffer, png.data.byteOffset, png.data.length).slice(),
  };
}

/** Encode an RGBA raster as a color PNG. */
export function encodePng(img: Rgba): Uint8Array {
  const png = new PNG({ width: img.width, height: img.height });
  png.data = Buffer.from(img.data);
  return new Uint8Array(PNG.sync.write(png, { colorType: 6 }));
}

/** Encode mask bits (0/1 per pixel) as an 8-bit grayscale PNG of 0/255. */
export function encodeMaskPng(width: number, height: number, bits: Uint8Array): Uint8Array {
  if (bits.length !== width * height) {
    throw new Error(`mask is ${bits.length} bytes, expected ${width * height}`);
  }
  const png = new PNG({ width, height });
  for (let i = 0; i < bits.length; i++) {
    const v = bits[i] ? 255 : 0;
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  return new Uint8Array(
    PNG.sync.write(png, { colorType: 0, inputColorType: 6, bitDepth: 8 })
  );
}

/** Decode a strictly binary mask PNG; any gray level besides 0/255 throws. */
export function decodeMaskPng(bytes: Uint8Array): { width: number; height: number; bits: Uint8Array } {
  const img = decodePng(bytes);
  const bits = new Uint8Array(img.width * img.height);
  for (let i = 0; i < bits.length; i++) {
    const r = img.data[i * 4];
    const g = img.data[i * 4 + 1];
    const b = img.data[i * 4 + 2];
    if (r !== g || g !== b || (r !== 0 && r !== 255)) {
      throw new Error(`mask pixel ${i} is not binary (r=${r} g=${g} b=${b})`);
    }
    bits[i] = r === 255 ? 1 : 0;
  }
  return { width: img.width, height: img.height, bits };
}
