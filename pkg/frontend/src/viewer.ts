/** Pan-zoom viewport shared by the compare panes, plus the wipe split.
 * One viewport object serves both panes, so synchronization is exact by
 * construction. */

export class Viewport {
  scale = 1;
  offsetX = 0;
  offsetY = 0;

  /** Zoom about a fixed point in pane coordinates. */
  zoomAt(px: number, py: number, factor: number): void {
    const next = Math.min(64, Math.max(0.25, this.scale * factor));
    const applied = next / this.scale;
    this.offsetX = px - (px - this.offsetX) * applied;
    this.offsetY = py - (py - this.offsetY) * applied;
    this.scale = next;
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  reset(): void {
    this.scale = 1;
    this.offsetX = 0;
    this.offsetY = 0;
  }

  cssTransform(): string {
    return `translate(${this.offsetX}px, ${this.offsetY}px) scale(${this.scale})`;
  }

  snapshot(): { scale: number; offsetX: number; offsetY: number } {
    return { scale: this.scale, offsetX: this.offsetX, offsetY: this.offsetY };
  }
}

export interface WipeSplit {
  /** Width of the live pane's visible strip, from the left edge. */
  liveWidth: number;
  /** Width of the pinned render's visible strip, to the right of the seam. */
  pinnedWidth: number;
}

/** Pixel-boundary wipe: position 0 shows only the pinned render, 1 only
 * the live one. */
export function wipeSplit(position: number, paneWidth: number): WipeSplit {
  const t = Math.min(1, Math.max(0, position));
  const seam = Math.round(t * paneWidth);
  return { liveWidth: seam, pinnedWidth: paneWidth - seam };
}

export interface CompareState {
  /** Shared viewport: pan-zoom applied to either pane lands on both. */
  viewport: Viewport;
  pinned: ArrayBuffer | null;
  wipe: number;
}

export function makeCompareState(): CompareState {
  return { viewport: new Viewport(), pinned: null, wipe: 1 };
}
