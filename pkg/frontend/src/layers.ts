/** Layer stack: the base image plus generated layers with visibility flags.
 *
 *  Merge-visible applies the same rule the server composites with: a layer
 *  pixel replaces the one below it exactly where the layer alpha is 255.
 *  The stack keeps an undo history of layer-list snapshots.
 */

import type { Rgba } from "./types.js";
import { cloneRgba, sameDims } from "./types.js";

export interface Layer {
  name: string;
  pixels: Rgba;
  visible: boolean;
}

const MAX_HISTORY = 50;

export class LayerStack {
  readonly base: Rgba;
  layers: Layer[] = [];
  private history: Layer[][] = [];

  constructor(base: Rgba) {
    this.base = base;
  }

  /** Append a generated layer; dimensions must match the base. */
  addLayer(pixels: Rgba, name: string): Layer {
    if (!sameDims(pixels, this.base)) {
      throw new Error(
        `layer is ${pixels.width}x${pixels.height}, base is ${this.base.width}x${this.base.height}`,
      );
    }
    this.pushHistory();
    const layer: Layer = { name, pixels, visible: true };
    this.layers.push(layer);
    return layer;
  }

  removeLayer(index: number): void {
    if (index < 0 || index >= this.layers.length) {
      throw new Error(`no layer at index ${index}`);
    }
    this.pushHistory();
    this.layers.splice(index, 1);
  }

  setVisible(index: number, visible: boolean): void {
    if (index < 0 || index >= this.layers.length) {
      throw new Error(`no layer at index ${index}`);
    }
    this.pushHistory();
    this.layers[index].visible = visible;
  }

  /** Base with every visible layer applied in order, alpha==255 wins. */
  mergeVisible(): Rgba {
    const out = cloneRgba(this.base);
    const n = out.width * out.height;
    for (const layer of this.layers) {
      if (!layer.visible) continue;
      for (let i = 0; i < n; i++) {
        if (layer.pixels.data[i * 4 + 3] === 255) {
          out.data[i * 4] = layer.pixels.data[i * 4];
          out.data[i * 4 + 1] = layer.pixels.data[i * 4 + 1];
          out.data[i * 4 + 2] = layer.pixels.data[i * 4 + 2];
          out.data[i * 4 + 3] = layer.pixels.data[i * 4 + 3];
        }
      }
    }
    return out;
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  undo(): void {
    const prev = this.history.pop();
    if (prev === undefined) throw new Error("nothing to undo");
    this.layers = prev;
  }

  private pushHistory(): void {
    const snapshot = this.layers.map((l) => ({
      name: l.name,
      pixels: cloneRgba(l.pixels),
      visible: l.visible,
    }));
    this.history.push(snapshot);
    if (this.history.length > MAX_HISTORY) this.history.shift();
  }
}
