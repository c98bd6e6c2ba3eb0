/** HTTP client for the editing service. Works in the browser and in node
 *  (both provide fetch/FormData/Blob); all traffic goes through the JSON
 *  and multipart endpoints, never around them.
 */

import type {
  DiffResponse,
  EditParams,
  JobDoc,
  RetrieveResponse,
  TagRow,
} from "./types.js";

export const DEFAULT_POLL_INTERVAL_MS = 500;

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
  }
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const doc = await resp.json();
    if (doc && typeof doc.detail === "string") return doc.detail;
    return JSON.stringify(doc);
  } catch {
    return resp.statusText || "request failed";
  }
}

export class PanelClient {
  readonly baseUrl: string;
  private inFlightJob: string | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as T;
  }

  private async bytes(path: string): Promise<Uint8Array> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return new Uint8Array(await resp.arrayBuffer());
  }

  info(): Promise<{ name: string; version: string; db: Record<string, number> }> {
    return this.json("/api/info");
  }

  tags(opts: { transformationFree?: boolean; q?: string } = {}): Promise<TagRow[]> {
    const params = new URLSearchParams();
    if (opts.transformationFree !== undefined) {
      params.set("transformation_free", String(opts.transformationFree));
    }
    if (opts.q) params.set("q", opts.q);
    const suffix = params.size > 0 ? `?${params}` : "";
    return this.json(`/api/tags${suffix}`);
  }

  retrieve(
    text: string,
    opts: { k?: number; useLlm?: boolean; allowFallback?: boolean } = {},
  ): Promise<RetrieveResponse> {
    return this.json("/api/retrieve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        text,
        k: opts.k ?? 5,
        use_llm: opts.useLlm ?? false,
        allow_fallback: opts.allowFallback ?? true,
      }),
    });
  }

  /** Upload an edit; resolves to the job id. One job in flight at a time. */
  async submitEdit(
    imagePng: Uint8Array,
    maskPng: Uint8Array,
    params: EditParams = {},
  ): Promise<string> {
    if (this.inFlightJob !== null) {
      throw new Error(`job ${this.inFlightJob} is still in flight`);
    }
    const form = new FormData();
    form.append("image", new Blob([imagePng as BlobPart], { type: "image/png" }), "input.png");
    form.append("mask", new Blob([maskPng as BlobPart], { type: "image/png" }), "mask.png");
    form.append("params", JSON.stringify(params));
    const doc = await this.json<{ job_id: string }>("/api/edits", {
      method: "POST",
      body: form,
    });
    this.inFlightJob = doc.job_id;
    return doc.job_id;
  }

  jobStatus(jobId: string): Promise<JobDoc> {
    return this.json(`/api/edits/${jobId}`);
  }

  /** Poll until the job settles; resolves on done, rejects with the backend
   *  detail on failure. Clears the in-flight slot either way. */
  pollJob(jobId: string, intervalMs: number = DEFAULT_POLL_INTERVAL_MS): Promise<JobDoc> {
    return new Promise((resolve, reject) => {
      const tick = async () => {
        let doc: JobDoc;
        try {
          doc = await this.jobStatus(jobId);
        } catch (err) {
          this.clearInFlight(jobId);
          reject(err);
          return;
        }
        if (doc.state === "done") {
          this.clearInFlight(jobId);
          resolve(doc);
        } else if (doc.state === "failed") {
          this.clearInFlight(jobId);
          reject(new Error(doc.error ?? "edit failed"));
        } else {
          setTimeout(tick, intervalMs);
        }
      };
      tick();
    });
  }

  private clearInFlight(jobId: string): void {
    if (this.inFlightJob === jobId) this.inFlightJob = null;
  }

  layerPng(jobId: string): Promise<Uint8Array> {
    return this.bytes(`/api/edits/${jobId}/layer.png`);
  }

  compositePng(jobId: string): Promise<Uint8Array> {
    return this.bytes(`/api/edits/${jobId}/composite.png`);
  }

  async diff(
    aPng: Uint8Array,
    bPng: Uint8Array,
    maskPng?: Uint8Array,
    threshold?: number,
  ): Promise<DiffResponse> {
    const form = new FormData();
    form.append("a", new Blob([aPng as BlobPart], { type: "image/png" }), "a.png");
    form.append("b", new Blob([bPng as BlobPart], { type: "image/png" }), "b.png");
    if (maskPng) {
      form.append("mask", new Blob([maskPng as BlobPart], { type: "image/png" }), "mask.png");
    }
    if (threshold !== undefined) form.append("threshold", String(threshold));
    return this.json("/api/diff", { method: "POST", body: form });
  }

  getSettings(): Promise<Record<string, unknown>> {
    return this.json("/api/settings");
  }

  putSettings(update: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.json("/api/settings", {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(update),
    });
  }
}
