/** Parameter panel controller: edits debounce into a single render request
 * per gesture; the server's field messages surface inline and a network
 * failure keeps the last image up. DOM-free so it is testable headless. */

import { RenderClient, FieldError, RenderResult } from "./api.js";
import { Debounced, debounce } from "./debounce.js";
import { SessionState, clampParam, renderRequest } from "./state.js";

export interface PanelEvents {
  onImage(bytes: ArrayBuffer): void;
  onFieldErrors(errors: FieldError[]): void;
  onBanner(message: string | null): void;
  onStateChange(state: SessionState): void;
}

export const DEBOUNCE_MS = 150;

export class ParamPanel {
  readonly state: SessionState;
  lastImage: ArrayBuffer | null = null;
  private scheduled: Debounced<[]>;

  constructor(
    initial: SessionState,
    private client: RenderClient,
    private events: PanelEvents,
    debounceMs: number = DEBOUNCE_MS,
  ) {
    this.state = { ...initial };
    this.scheduled = debounce(() => {
      void this.renderNow();
    }, debounceMs);
  }

  /** Slider / toggle edit: clamp numeric values to their ranges, notify,
   * and schedule one render for the gesture. */
  set<K extends keyof SessionState>(name: K, value: SessionState[K]): void {
    if (typeof value === "number") {
      (this.state as unknown as Record<string, unknown>)[name] = clampParam(
        String(name),
        value,
      );
    } else {
      (this.state as unknown as Record<string, unknown>)[name] = value;
    }
    this.events.onStateChange(this.state);
    this.scheduled();
  }

  /** Immediate render (initial load, URL restore). */
  async renderNow(): Promise<RenderResult> {
    const result = await this.client.render(renderRequest(this.state));
    switch (result.kind) {
      case "image":
        this.lastImage = result.bytes;
        this.events.onBanner(null);
        this.events.onFieldErrors([]);
        this.events.onImage(result.bytes);
        break;
      case "invalid":
        // image unchanged; the server's messages go inline
        this.events.onFieldErrors(result.errors);
        break;
      case "not-found":
      case "network":
        // non-blocking banner, last image retained
        this.events.onBanner(result.message);
        break;
      case "superseded":
        break;
    }
    return result;
  }

  flush(): void {
    this.scheduled.flush();
  }

  dispose(): void {
    this.scheduled.cancel();
  }
}
