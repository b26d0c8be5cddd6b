/** Browser bootstrap: builds the controls, wires pan-zoom and compare, and
 * keeps the full session in the URL so a reload reproduces the render. */

import { RenderClient, DatasetSummary } from "./api.js";
import { DEBOUNCE_MS, ParamPanel } from "./panel.js";
import {
  DEFAULT_STATE,
  PARAM_RANGES,
  RENDER_MODES,
  SessionState,
  decodeState,
  encodeState,
} from "./state.js";
import { makeCompareState, wipeSplit } from "./viewer.js";

const SERVICE_URL = (window as { SPECTRA_SERVICE_URL?: string }).SPECTRA_SERVICE_URL
  ?? "http://127.0.0.1:8787";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  props: Partial<HTMLElementTagNameMap[K]> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  Object.assign(node, props);
  parent?.appendChild(node);
  return node;
}

function blobUrl(bytes: ArrayBuffer): string {
  return URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;

  const client = new RenderClient(SERVICE_URL);
  let datasets: DatasetSummary[] = [];
  try {
    datasets = await client.datasets();
  } catch {
    el("div", { className: "banner", textContent: "render service unreachable" }, root);
    return;
  }

  const initial: SessionState = decodeState(
    window.location.search.replace(/^\?/, ""),
    { ...DEFAULT_STATE, dataset: datasets[0]?.id ?? "" },
  );

  const controls = el("div", { className: "controls" }, root);
  const paneWrap = el("div", { className: "panes" }, root);
  const livePane = el("div", { className: "pane" }, paneWrap);
  const pinnedPane = el("div", { className: "pane pinned" }, paneWrap);
  const liveImg = el("img", { alt: "render" }, livePane);
  const pinnedImg = el("img", { alt: "pinned render" }, pinnedPane);
  const banner = el("div", { className: "banner hidden" }, root);
  const errorBox = el("div", { className: "field-errors" }, root);

  const compare = makeCompareState();

  const panel = new ParamPanel(
    initial,
    client,
    {
      onImage(bytes) {
        liveImg.src = blobUrl(bytes);
      },
      onFieldErrors(errors) {
        errorBox.replaceChildren(
          ...errors.map((e) =>
            el("div", { className: "field-error", textContent: `${e.field}: ${e.message}` }),
          ),
        );
      },
      onBanner(message) {
        banner.textContent = message ?? "";
        banner.classList.toggle("hidden", message === null);
      },
      onStateChange(state) {
        history.replaceState(null, "", `?${encodeState(state)}`);
      },
    },
    DEBOUNCE_MS,
  );

  // -- controls ------------------------------------------------------------

  const datasetSel = el("select", {}, controls);
  for (const d of datasets) {
    el("option", { value: d.id, textContent: d.id, selected: d.id === initial.dataset }, datasetSel);
  }
  datasetSel.onchange = () => panel.set("dataset", datasetSel.value);

  const modeSel = el("select", {}, controls);
  for (const m of RENDER_MODES) {
    el("option", { value: m, textContent: m, selected: m === initial.mode }, modeSel);
  }
  modeSel.onchange = () => panel.set("mode", modeSel.value as SessionState["mode"]);

  const bands = datasets.find((d) => d.id === initial.dataset)?.bands ?? [];
  const nirSel = el("select", { title: "near-infrared band" }, controls);
  for (const b of bands.filter((b) => b.kind === "nir")) {
    el("option", { value: b.label, textContent: b.label, selected: b.label === initial.bandNir }, nirSel);
  }
  nirSel.onchange = () => panel.set("bandNir", nirSel.value);

  const sliders: (keyof SessionState)[] = [
    "azimuthDeg", "elevationDeg", "a", "f", "r", "th", "levels", "q", "k",
    "beta",
  ];
  for (const name of sliders) {
    const range = PARAM_RANGES[name as string];
    const label = el("label", { textContent: String(name) }, controls);
    const input = el("input", { type: "range" }, label);
    input.min = String(range.min);
    input.max = String(range.max);
    input.step = String(range.step);
    input.value = String(panel.state[name]);
    const numeric = el("input", { type: "number", value: String(panel.state[name]) }, label);
    input.oninput = () => {
      numeric.value = input.value;
      panel.set(name, Number(input.value) as SessionState[typeof name]);
    };
    numeric.onchange = () => {
      input.value = numeric.value;
      panel.set(name, Number(numeric.value) as SessionState[typeof name]);
    };
  }

  // -- compare: pin, wipe, shared pan-zoom ----------------------------------

  const pinBtn = el("button", { textContent: "pin" }, controls);
  pinBtn.onclick = () => {
    if (panel.lastImage) {
      compare.pinned = panel.lastImage;
      pinnedImg.src = blobUrl(compare.pinned);
    }
  };

  const wipe = el("input", { type: "range" }, controls);
  wipe.min = "0";
  wipe.max = "1";
  wipe.step = "0.01";
  wipe.value = "1";

  const applyView = () => {
    const t = compare.viewport.cssTransform();
    liveImg.style.transform = t;
    pinnedImg.style.transform = t;
    const split = wipeSplit(Number(wipe.value), paneWrap.clientWidth || 1);
    livePane.style.clipPath = `inset(0 ${Math.max(0, (paneWrap.clientWidth || 1) - split.liveWidth)}px 0 0)`;
    pinnedPane.style.clipPath = `inset(0 0 0 ${split.liveWidth}px)`;
  };
  wipe.oninput = applyView;

  for (const pane of [livePane, pinnedPane]) {
    pane.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const rect = pane.getBoundingClientRect();
      compare.viewport.zoomAt(
        ev.clientX - rect.left,
        ev.clientY - rect.top,
        ev.deltaY < 0 ? 1.15 : 1 / 1.15,
      );
      applyView();
    });
    let dragging = false;
    let last = [0, 0];
    pane.addEventListener("mousedown", (ev) => {
      dragging = true;
      last = [ev.clientX, ev.clientY];
    });
    window.addEventListener("mousemove", (ev) => {
      if (!dragging) return;
      compare.viewport.panBy(ev.clientX - last[0], ev.clientY - last[1]);
      last = [ev.clientX, ev.clientY];
      applyView();
    });
    window.addEventListener("mouseup", () => {
      dragging = false;
    });
  }

  window.addEventListener("popstate", () => {
    const restored = decodeState(window.location.search.replace(/^\?/, ""), panel.state);
    Object.assign(panel.state, restored);
    void panel.renderNow();
  });

  await panel.renderNow();
  applyView();
}

void boot();
