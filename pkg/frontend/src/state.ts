/** Session state: everything needed to reproduce one render, URL-codable. */

export type RenderMode =
  | "sbs"
  | "curvature"
  | "lines"
  | "toon"
  | "mlic"
  | "lambertian";

export const RENDER_MODES: RenderMode[] = [
  "sbs",
  "curvature",
  "lines",
  "toon",
  "mlic",
  "lambertian",
];

export type LineType = "suggestive" | "discontinuity" | "principal";

export interface SessionState {
  dataset: string;
  mode: RenderMode;
  /** Light steering as azimuth/elevation; converted to a unit vector on submit. */
  azimuthDeg: number;
  elevationDeg: number;
  bandVis: string;
  bandNir: string;
  a: number;
  f: number;
  r: number;
  th: number;
  levels: number;
  enhancement: "dynamic" | "static";
  strategy: "enhancement-map" | "multilight" | "static-principal";
  q: number;
  k: number;
  beta: number;
  lineType: LineType;
}

export const DEFAULT_STATE: SessionState = {
  dataset: "",
  mode: "sbs",
  azimuthDeg: 35,
  elevationDeg: 60,
  bandVis: "vis",
  bandNir: "nir720",
  a: 35,
  f: 0,
  r: 13,
  th: 0.1,
  levels: 6,
  enhancement: "dynamic",
  strategy: "enhancement-map",
  q: 10,
  k: 4,
  beta: 0.5,
  lineType: "suggestive",
};

/** Slider ranges mirroring the server's validation rules. */
export const PARAM_RANGES: Record<string, { min: number; max: number; step: number }> = {
  azimuthDeg: { min: 0, max: 360, step: 1 },
  elevationDeg: { min: 5, max: 90, step: 1 },
  a: { min: 1, max: 100, step: 1 },
  f: { min: -1, max: 1, step: 0.05 },
  r: { min: 1, max: 40, step: 1 },
  th: { min: 0, max: 0.5, step: 0.01 },
  levels: { min: 1, max: 8, step: 1 },
  q: { min: 0.5, max: 50, step: 0.5 },
  k: { min: 2, max: 12, step: 1 },
  beta: { min: 0.05, max: 1, step: 0.05 },
};

export function clampParam(name: string, value: number): number {
  const range = PARAM_RANGES[name];
  if (!range) return value;
  return Math.min(range.max, Math.max(range.min, value));
}

/** Azimuth/elevation (degrees) to a unit light vector, z toward the viewer. */
export function lightVector(azimuthDeg: number, elevationDeg: number): [number, number, number] {
  const az = (azimuthDeg * Math.PI) / 180;
  const el = (elevationDeg * Math.PI) / 180;
  const x = Math.cos(el) * Math.cos(az);
  const y = Math.cos(el) * Math.sin(az);
  const z = Math.sin(el);
  const norm = Math.hypot(x, y, z);
  return [x / norm, y / norm, z / norm];
}

export interface RenderRequest {
  dataset: string;
  mode: RenderMode;
  params: Record<string, unknown>;
}

/** The exact body POSTed to /render for a state (single source of truth). */
export function renderRequest(state: SessionState): RenderRequest {
  const light = lightVector(state.azimuthDeg, state.elevationDeg);
  const params: Record<string, unknown> = { light };
  switch (state.mode) {
    case "sbs":
      Object.assign(params, {
        band_vis: state.bandVis,
        band_nir: state.bandNir,
        a: state.a,
        f: state.f,
        r: state.r,
        th: state.th,
        levels: state.levels,
        enhancement: state.enhancement,
        strategy: state.strategy,
      });
      break;
    case "curvature":
      Object.assign(params, {
        band_vis: state.bandVis,
        band_nir: state.bandNir,
        q: state.q,
        levels: state.levels,
      });
      break;
    case "lines":
      Object.assign(params, { band: state.bandNir, line_type: state.lineType });
      break;
    case "toon":
      Object.assign(params, {
        band_vis: state.bandVis,
        band_nir: state.bandNir,
        k: state.k,
      });
      break;
    case "mlic":
      Object.assign(params, { beta: state.beta });
      break;
    case "lambertian":
      Object.assign(params, { band: state.bandVis });
      break;
  }
  return { dataset: state.dataset, mode: state.mode, params };
}

const NUMERIC_KEYS: (keyof SessionState)[] = [
  "azimuthDeg", "elevationDeg", "a", "f", "r", "th", "levels", "q", "k",
  "beta",
];
const STRING_KEYS: (keyof SessionState)[] = [
  "dataset", "mode", "bandVis", "bandNir", "enhancement", "strategy",
  "lineType",
];

/** Full state into a URL query string; reload must reproduce the render. */
export function encodeState(state: SessionState): string {
  const qs = new URLSearchParams();
  for (const key of STRING_KEYS) qs.set(key, String(state[key]));
  for (const key of NUMERIC_KEYS) qs.set(key, String(state[key]));
  return qs.toString();
}

export function decodeState(query: string, defaults: SessionState = DEFAULT_STATE): SessionState {
  const qs = new URLSearchParams(query);
  const state: SessionState = { ...defaults };
  for (const key of STRING_KEYS) {
    const raw = qs.get(key);
    if (raw !== null) (state as unknown as Record<string, unknown>)[key] = raw;
  }
  for (const key of NUMERIC_KEYS) {
    const raw = qs.get(key);
    if (raw !== null) {
      const value = Number(raw);
      if (Number.isFinite(value)) (state as unknown as Record<string, unknown>)[key] = value;
    }
  }
  return state;
}
