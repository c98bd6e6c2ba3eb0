/** Browser wiring: canvas, brush, tag chips, generate/poll/merge/diff.
 *
 *  The panel never resamples user data. The uploaded image is the original
 *  file's bytes; the mask is authored here as strict 0/255 and exported
 *  through a lossless canvas PNG encode; layers come back from the server
 *  and are decoded, never transformed.
 */

import { PanelClient } from "./api.js";
import { LayerStack } from "./layers.js";
import { MaskBuffer } from "./mask.js";
import { canGrabAt, regionTransform } from "./transform.js";
import type { Rgba, ScoredTag } from "./types.js";

interface PanelState {
  client: PanelClient;
  originalBytes: Uint8Array | null; // exact upload payload, never re-encoded
  stack: LayerStack | null;
  mask: MaskBuffer | null;
  workingImage: Rgba | null; // base plus applied hint transforms
  brushRadius: number;
  brushMode: "paint" | "erase";
  chips: ScoredTag[];
  selectedTags: string[];
  diffOverlay: HTMLImageElement | null;
  busy: boolean;
}

const state: PanelState = {
  client: new PanelClient(""),
  originalBytes: null,
  stack: null,
  mask: null,
  workingImage: null,
  brushRadius: 16,
  brushMode: "paint",
  chips: [],
  selectedTags: [],
  diffOverlay: null,
  busy: false,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvas(): HTMLCanvasElement {
  return el<HTMLCanvasElement>("canvas");
}

function setStatus(text: string, isError = false): void {
  const bar = el<HTMLDivElement>("status");
  bar.textContent = text;
  bar.className = isError ? "status error" : "status";
}

function rgbaToImageData(img: Rgba): ImageData {
  return new ImageData(new Uint8ClampedArray(img.data), img.width, img.height);
}

function imageDataToRgba(data: ImageData): Rgba {
  return {
    width: data.width,
    height: data.height,
    data: new Uint8Array(data.data.buffer.slice(0)),
  };
}

async function decodeToRgba(bytes: Uint8Array): Promise<Rgba> {
  const blob = new Blob([bytes as BlobPart], { type: "image/png" });
  const bitmap = await createImageBitmap(blob);
  const scratch = document.createElement("canvas");
  scratch.width = bitmap.width;
  scratch.height = bitmap.height;
  const ctx = scratch.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  return imageDataToRgba(ctx.getImageData(0, 0, bitmap.width, bitmap.height));
}

/** Lossless PNG export of the binary mask through an opaque gray canvas. */
function maskToPngBlob(mask: MaskBuffer): Promise<Blob> {
  const scratch = document.createElement("canvas");
  scratch.width = mask.width;
  scratch.height = mask.height;
  const ctx = scratch.getContext("2d")!;
  const img = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < mask.bits.length; i++) {
    const v = mask.bits[i] ? 255 : 0;
    img.data[i * 4] = v;
    img.data[i * 4 + 1] = v;
    img.data[i * 4 + 2] = v;
    img.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  return new Promise((resolve, reject) => {
    scratch.toBlob(
      (blob) => (blob ? resolve(blob) : reject(new Error("mask export failed"))),
      "image/png",
    );
  });
}

function redraw(): void {
  if (!state.stack || !state.mask) return;
  const merged = state.stack.mergeVisible();
  const display = state.workingImage ?? merged;
  const cv = canvas();
  cv.width = display.width;
  cv.height = display.height;
  const ctx = cv.getContext("2d")!;
  ctx.putImageData(rgbaToImageData(state.workingImage ? display : merged), 0, 0);

  // selection tint
  const overlay = ctx.getImageData(0, 0, cv.width, cv.height);
  for (let i = 0; i < state.mask.bits.length; i++) {
    if (state.mask.bits[i]) {
      overlay.data[i * 4] = Math.min(255, overlay.data[i * 4] + 40);
      overlay.data[i * 4 + 2] = Math.min(255, overlay.data[i * 4 + 2] + 80);
    }
  }
  ctx.putImageData(overlay, 0, 0);

  if (state.diffOverlay) {
    ctx.globalAlpha = 0.75;
    ctx.drawImage(state.diffOverlay, 0, 0);
    ctx.globalAlpha = 1.0;
  }
  renderLayerList();
}

function renderLayerList(): void {
  if (!state.stack) return;
  const list = el<HTMLUListElement>("layers");
  list.replaceChildren();
  state.stack.layers.forEach((layer, i) => {
    const item = document.createElement("li");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = layer.visible;
    box.addEventListener("change", () => {
      state.stack!.setVisible(i, box.checked);
      redraw();
    });
    item.append(box, ` ${layer.name}`);
    list.append(item);
  });
}

function renderChips(): void {
  const row = el<HTMLDivElement>("chips");
  row.replaceChildren();
  for (const hit of state.chips) {
    const chip = document.createElement("button");
    chip.className = state.selectedTags.includes(hit.tag_name) ? "chip active" : "chip";
    chip.textContent = hit.exact ? `${hit.tag_name} (exact)` : hit.tag_name;
    chip.addEventListener("click", () => {
      const at = state.selectedTags.indexOf(hit.tag_name);
      if (at >= 0) state.selectedTags.splice(at, 1);
      else state.selectedTags.push(hit.tag_name);
      el<HTMLInputElement>("tags").value = state.selectedTags.join(", ");
      renderChips();
    });
    row.append(chip);
  }
}

async function badgeTransformationFree(): Promise<void> {
  const free = new Set(
    (await state.client.tags({ transformationFree: true })).map((t) => t.name),
  );
  for (const chip of document.querySelectorAll<HTMLButtonElement>("#chips .chip")) {
    const name = chip.textContent?.replace(" (exact)", "") ?? "";
    if (free.has(name)) chip.classList.add("no-transform");
  }
}

async function onLoadFile(input: HTMLInputElement): Promise<void> {
  const file = input.files?.[0];
  if (!file) return;
  state.originalBytes = new Uint8Array(await file.arrayBuffer());
  const base = await decodeToRgba(state.originalBytes);
  state.stack = new LayerStack(base);
  state.mask = new MaskBuffer(base.width, base.height);
  state.workingImage = null;
  state.diffOverlay = null;
  setStatus(`loaded ${file.name}, ${base.width}x${base.height}`);
  redraw();
}

function canvasPoint(event: MouseEvent): [number, number] {
  const rect = canvas().getBoundingClientRect();
  const sx = canvas().width / rect.width;
  const sy = canvas().height / rect.height;
  return [(event.clientX - rect.left) * sx, (event.clientY - rect.top) * sy];
}

function bindBrush(): void {
  let painting = false;
  canvas().addEventListener("mousedown", (e) => {
    if (!state.mask) return;
    painting = true;
    const [x, y] = canvasPoint(e);
    state.mask.stroke([[x, y]], state.brushRadius, state.brushMode);
    redraw();
  });
  canvas().addEventListener("mousemove", (e) => {
    if (!painting || !state.mask) return;
    const [x, y] = canvasPoint(e);
    state.mask.stroke([[x, y]], state.brushRadius, state.brushMode);
    redraw();
  });
  window.addEventListener("mouseup", () => {
    painting = false;
  });
}

function applyTransform(): void {
  if (!state.stack || !state.mask) return;
  const scale = Number(el<HTMLInputElement>("scale").value);
  const dx = Number(el<HTMLInputElement>("dx").value);
  const dy = Number(el<HTMLInputElement>("dy").value);
  const grabX = Math.floor(state.mask.width / 2);
  const grabY = Math.floor(state.mask.height / 2);
  if (!canGrabAt(state.mask, grabX, grabY) && state.mask.isEmpty) {
    setStatus("make a selection before transforming", true);
    return;
  }
  try {
    const source = state.workingImage ?? state.stack.mergeVisible();
    state.workingImage = regionTransform(source, state.mask, scale, dx, dy);
    setStatus(`transform applied: scale ${scale}, move (${dx}, ${dy})`);
  } catch (err) {
    setStatus(String(err), true);
  }
  redraw();
}

async function runRetrieve(): Promise<void> {
  const text = el<HTMLTextAreaElement>("story").value.trim();
  if (!text) return;
  try {
    const doc = await state.client.retrieve(text, { k: 8 });
    state.chips = doc.results;
    renderChips();
    await badgeTransformationFree();
    setStatus(doc.degraded ? `retrieval degraded: ${doc.detail}` : "tags retrieved");
  } catch (err) {
    setStatus(String(err), true);
  }
}

async function runGenerate(): Promise<void> {
  if (state.busy) {
    setStatus("a generation is already running", true);
    return;
  }
  if (!state.originalBytes || !state.stack || !state.mask || state.mask.isEmpty) {
    setStatus("load an image and paint a selection first", true);
    return;
  }
  state.busy = true;
  setStatus("generating...");
  try {
    const maskBlob = await maskToPngBlob(state.mask);
    const maskBytes = new Uint8Array(await maskBlob.arrayBuffer());
    const tags = el<HTMLInputElement>("tags").value
      .split(",")
      .map((t) => t.trim())
      .filter((t) => t.length > 0);
    const seedRaw = el<HTMLInputElement>("seed").value.trim();
    const jobId = await state.client.submitEdit(state.originalBytes, maskBytes, {
      tags,
      params: {
        denoising_strength: Number(el<HTMLInputElement>("denoise").value),
        cfg_scale: Number(el<HTMLInputElement>("cfg").value),
        sampling_steps: Number(el<HTMLInputElement>("steps").value),
        seed: seedRaw === "random" || seedRaw === "" ? "random" : Number(seedRaw),
      },
    });
    const doc = await state.client.pollJob(jobId);
    const layerBytes = await state.client.layerPng(jobId);
    const layer = await decodeToRgba(layerBytes);
    state.stack.addLayer(layer, doc.summary.prompt || `edit ${jobId}`);
    state.workingImage = null;
    setStatus(`done in ${doc.latency_ms} ms`);
  } catch (err) {
    setStatus(String(err), true); // failed jobs land here with the backend detail
  } finally {
    state.busy = false;
    redraw();
  }
}

async function toggleDiffOverlay(): Promise<void> {
  if (!state.stack || !state.originalBytes || !state.mask) return;
  if (state.diffOverlay) {
    state.diffOverlay = null;
    redraw();
    return;
  }
  try {
    const merged = state.stack.mergeVisible();
    const scratch = document.createElement("canvas");
    scratch.width = merged.width;
    scratch.height = merged.height;
    scratch.getContext("2d")!.putImageData(rgbaToImageData(merged), 0, 0);
    const mergedBlob: Blob = await new Promise((resolve, reject) =>
      scratch.toBlob((b) => (b ? resolve(b) : reject(new Error("encode failed"))), "image/png"),
    );
    const maskBlob = await maskToPngBlob(state.mask);
    const doc = await state.client.diff(
      state.originalBytes,
      new Uint8Array(await mergedBlob.arrayBuffer()),
      new Uint8Array(await maskBlob.arrayBuffer()),
    );
    const overlay = new Image();
    overlay.src = `data:image/png;base64,${doc.heatmap_png_base64}`;
    await overlay.decode();
    state.diffOverlay = overlay;
    const outside = doc.stats.changed_outside_mask;
    setStatus(`diff: ${doc.stats.changed_pixel_count} px changed, ${outside} outside selection`);
  } catch (err) {
    setStatus(String(err), true);
  }
  redraw();
}

export function boot(): void {
  state.client = new PanelClient(window.location.origin);
  el<HTMLInputElement>("file").addEventListener("change", (e) =>
    onLoadFile(e.target as HTMLInputElement),
  );
  el<HTMLInputElement>("radius").addEventListener("input", (e) => {
    state.brushRadius = Number((e.target as HTMLInputElement).value);
  });
  el<HTMLSelectElement>("mode").addEventListener("change", (e) => {
    state.brushMode = (e.target as HTMLSelectElement).value as "paint" | "erase";
  });
  el<HTMLButtonElement>("clear-mask").addEventListener("click", () => {
    if (!state.mask) return;
    state.mask = new MaskBuffer(state.mask.width, state.mask.height);
    redraw();
  });
  el<HTMLButtonElement>("apply-transform").addEventListener("click", applyTransform);
  el<HTMLButtonElement>("retrieve").addEventListener("click", runRetrieve);
  el<HTMLButtonElement>("generate").addEventListener("click", runGenerate);
  el<HTMLButtonElement>("diff").addEventListener("click", toggleDiffOverlay);
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    if (state.stack?.canUndo) {
      state.stack.undo();
      redraw();
    }
  });
  bindBrush();
  setStatus("load an image to start");
}

boot();
