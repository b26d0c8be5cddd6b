/** Client for the render service. At most one render request is in flight;
 * newer requests abort and supersede pending ones. */

import type { RenderRequest } from "./state.js";

export interface FieldError {
  field: string;
  message: string;
}

export type RenderResult =
  | { kind: "image"; bytes: ArrayBuffer }
  | { kind: "invalid"; errors: FieldError[] }
  | { kind: "not-found"; message: string }
  | { kind: "network"; message: string }
  | { kind: "superseded" };

export interface DatasetSummary {
  id: string;
  dataset: string;
  bands: { label: string; kind: string; wavelength_nm: number[] }[];
  lights: number[][];
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class RenderClient {
  private inFlight: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  async datasets(): Promise<DatasetSummary[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/datasets`);
    return (await resp.json()) as DatasetSummary[];
  }

  async dataset(id: string): Promise<DatasetSummary> {
    const resp = await this.fetchFn(`${this.baseUrl}/datasets/${id}`);
    if (!resp.ok) throw new Error(`unknown dataset ${id}`);
    return (await resp.json()) as DatasetSummary;
  }

  /** POST /render. A newer call aborts any pending one, which resolves as
   * superseded rather than surfacing an error. */
  async render(request: RenderRequest): Promise<RenderResult> {
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/render`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
      if (resp.status === 422) {
        const doc = (await resp.json()) as { errors: FieldError[] };
        return { kind: "invalid", errors: doc.errors };
      }
      if (resp.status === 404) {
        const doc = (await resp.json()) as { error: string };
        return { kind: "not-found", message: doc.error };
      }
      if (!resp.ok) {
        return { kind: "network", message: `server returned ${resp.status}` };
      }
      return { kind: "image", bytes: await resp.arrayBuffer() };
    } catch (err) {
      if (controller.signal.aborted) return { kind: "superseded" };
      return { kind: "network", message: String(err) };
    } finally {
      if (this.inFlight === controller) this.inFlight = null;
    }
  }
}
