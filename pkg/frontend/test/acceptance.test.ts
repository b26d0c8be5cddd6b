/** Viewer acceptance: URL round-trip render identity and one-request-per-
 * gesture debouncing, against a deterministic stand-in service whose bytes
 * depend only on the request body (the real service's determinism
 * contract). */

import assert from "node:assert/strict";
import { createHash } from "node:crypto";
import { mock, test } from "node:test";

import { RenderClient } from "../src/api.js";
import { DEBOUNCE_MS, ParamPanel } from "../src/panel.js";
import {
  DEFAULT_STATE,
  SessionState,
  decodeState,
  encodeState,
  renderRequest,
} from "../src/state.js";

function deterministicService() {
  const calls: string[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const body = String(init?.body ?? "");
    calls.push(body);
    const bytes = createHash("sha256").update(body).digest();
    return new Response(new Uint8Array(bytes), { status: 200 });
  };
  return { calls, fetchFn };
}

function capturePanel(state: SessionState, service = deterministicService()) {
  const images: Buffer[] = [];
  const client = new RenderClient("http://svc", service.fetchFn);
  const panel = new ParamPanel(state, client, {
    onImage: (bytes) => images.push(Buffer.from(bytes)),
    onFieldErrors: () => {},
    onBanner: () => {},
    onStateChange: () => {},
  });
  return { panel, images, calls: service.calls };
}

test("ACCEPTANCE: URL-encoded session reload reproduces the identical render (byte compare)", async () => {
  const session: SessionState = {
    ...DEFAULT_STATE,
    dataset: "sphere",
    mode: "sbs",
    azimuthDeg: 247,
    elevationDeg: 22,
    a: 42,
    f: -0.35,
    r: 9,
    th: 0.12,
    levels: 5,
  };

  const service = deterministicService();
  const first = capturePanel(session, service);
  await first.panel.renderNow();

  // simulate a reload: state restored purely from the URL
  const url = encodeState(session);
  const restored = decodeState(url);
  const second = capturePanel(restored, service);
  await second.panel.renderNow();

  assert.equal(first.images.length, 1);
  assert.equal(second.images.length, 1);
  assert.ok(first.images[0].equals(second.images[0]),
            "reloaded render bytes differ");
  // and the request bodies themselves are identical
  assert.equal(service.calls[0], service.calls[1]);
  console.log("ACCEPTANCE PASS: viewer URL round-trip (byte-identical render)");
});

test("ACCEPTANCE: debounce emits exactly one request per slider gesture", async () => {
  mock.timers.enable({ apis: ["setTimeout"] });
  try {
    const { panel, calls } = capturePanel({
      ...DEFAULT_STATE,
      dataset: "sphere",
    });
    for (let v = 0; v <= 180; v += 4) panel.set("azimuthDeg", v);
    assert.equal(calls.length, 0, "request fired before the gesture ended");
    mock.timers.tick(DEBOUNCE_MS + 10);
    await new Promise((resolve) => setImmediate(resolve));
    assert.equal(calls.length, 1);
    console.log("ACCEPTANCE PASS: viewer debounce (one request per gesture)");
  } finally {
    mock.timers.reset();
  }
});

test("request body is a pure function of session state", () => {
  const a = JSON.stringify(renderRequest({ ...DEFAULT_STATE, dataset: "d" }));
  const b = JSON.stringify(renderRequest({ ...DEFAULT_STATE, dataset: "d" }));
  assert.equal(a, b);
});
