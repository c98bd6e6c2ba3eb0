/** Shared data shapes for the panel. Pixel buffers are plain typed arrays so
 *  the same logic runs under node (tests) and in the browser. */

/** 8-bit RGBA raster, row-major, 4 bytes per pixel. */
export interface Rgba {
  width: number;
  height: number;
  data: Uint8Array; // length = width * height * 4
}

export interface AliasRow {
  text: string;
  language: string;
}

export interface TagRow {
  name: string;
  definition: string;
  aliases: AliasRow[];
  transformation_free: boolean;
  n_stories: number;
  n_example_images: number;
}

export interface ScoredTag {
  tag_name: string;
  score: number | null; // null marks an exact name/alias hit
  exact: boolean;
  matched_fields: string[];
}

export interface RetrieveResponse {
  results: ScoredTag[];
  degraded: boolean;
  detail: string | null;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobDoc {
  id: string;
  state: JobState;
  summary: {
    prompt?: string;
    width?: number;
    height?: number;
    selected_pixels?: number;
    padding?: number;
  };
  latency_ms?: number;
  error?: string;
}

export interface DiffStats {
  changed_pixel_count: number;
  mean_l1: number;
  fraction_changed: number;
  changed_outside_mask: number | null;
  max_l1_outside_mask: number | null;
}

export interface DiffResponse {
  stats: DiffStats;
  threshold: number;
  heatmap_png_base64: string;
}

export interface EditParams {
  tags?: string[];
  prompt?: string;
  negative_prompt?: string;
  params?: {
    denoising_strength?: number;
    controlnet_steps?: number;
    sampling_steps?: number;
    cfg_scale?: number;
    seed?: number | "random";
  };
  loras?: string[];
  padding?: number;
  context_dots?: [number, number][];
}

export function makeRgba(width: number, height: number): Rgba {
  return { width, height, data: new Uint8Array(width * height * 4) };
}

export function cloneRgba(img: Rgba): Rgba {
  return { width: img.width, height: img.height, data: img.data.slice() };
}

export function sameDims(a: { width: number; height: number },
                         b: { width: number; height: number }): boolean {
  return a.width === b.width && a.height === b.height;
}
