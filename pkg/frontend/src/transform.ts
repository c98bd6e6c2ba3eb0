/** Client-side hint transform: scale/move selected content, white fill.
 *
 *  This must agree with the server preview pixel for pixel, so the inverse
 *  mapping reproduces the server arithmetic exactly: all intermediates are
 *  IEEE-754 doubles evaluated in the same order, and the centroid is a sum
 *  of integers divided once (exact in doubles at any canvas size).
 */

import type { Rgba } from "./types.js";
import { cloneRgba, sameDims } from "./types.js";
import type { MaskBuffer } from "./mask.js";

const FILL: [number, number, number, number] = [255, 255, 255, 255];

/** Float mean of selected pixel coordinates. Throws on an empty mask. */
export function selectionCentroid(mask: MaskBuffer): { cx: number; cy: number } {
  let sumX = 0;
  let sumY = 0;
  let count = 0;
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (mask.bits[y * mask.width + x]) {
        sumX += x;
        sumY += y;
        count++;
      }
    }
  }
  if (count === 0) throw new Error("centroid of an empty selection");
  return { cx: sumX / count, cy: sumY / count };
}

/**
 * Scale selected content about the selection centroid, then translate by
 * (dx, dy). Nearest neighbor; destination pixels whose source falls outside
 * the selection or the frame turn white. Pixels outside the mask are never
 * touched.
 */
export function regionTransform(
  image: Rgba,
  mask: MaskBuffer,
  scale: number,
  dx = 0,
  dy = 0,
): Rgba {
  if (!sameDims(image, mask)) {
    throw new Error(
      `image is ${image.width}x${image.height}, mask is ${mask.width}x${mask.height}`,
    );
  }
  if (!(scale > 0)) throw new Error(`scale must be > 0, got ${scale}`);
  const { cx, cy } = selectionCentroid(mask);

  const w = image.width;
  const h = image.height;
  const out = cloneRgba(image);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      if (!mask.bits[y * w + x]) continue;
      const qx = Math.floor(cx + (x - dx - cx) / scale + 0.5);
      const qy = Math.floor(cy + (y - dy - cy) / scale + 0.5);
      const di = (y * w + x) * 4;
      if (qx >= 0 && qx < w && qy >= 0 && qy < h && mask.bits[qy * w + qx]) {
        const si = (qy * w + qx) * 4;
        out.data[di] = image.data[si];
        out.data[di + 1] = image.data[si + 1];
        out.data[di + 2] = image.data[si + 2];
        out.data[di + 3] = image.data[si + 3];
      } else {
        out.data[di] = FILL[0];
        out.data[di + 1] = FILL[1];
        out.data[di + 2] = FILL[2];
        out.data[di + 3] = FILL[3];
      }
    }
  }
  return out;
}

/** Guard for drag interactions: a transform handle must start on selection. */
export function canGrabAt(mask: MaskBuffer, x: number, y: number): boolean {
  if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) return false;
  return mask.bits[Math.trunc(y) * mask.width + Math.trunc(x)] === 1;
}
