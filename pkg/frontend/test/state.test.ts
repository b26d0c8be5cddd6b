import assert from "node:assert/strict";
import { test } from "node:test";

import {
  DEFAULT_STATE,
  SessionState,
  clampParam,
  decodeState,
  encodeState,
  lightVector,
  renderRequest,
} from "../src/state.js";

const SAMPLE: SessionState = {
  ...DEFAULT_STATE,
  dataset: "sphere",
  mode: "sbs",
  azimuthDeg: 120,
  elevationDeg: 35,
  a: 25,
  f: -0.5,
  th: 0.15,
};

test("URL round-trip is the identity on session state", () => {
  const encoded = encodeState(SAMPLE);
  const decoded = decodeState(encoded);
  assert.deepEqual(decoded, SAMPLE);
});

test("URL round-trip yields an identical render request body", () => {
  const before = JSON.stringify(renderRequest(SAMPLE));
  const after = JSON.stringify(renderRequest(decodeState(encodeState(SAMPLE))));
  assert.equal(after, before);
});

test("light converts to a unit vector before submission", () => {
  for (const [az, el] of [[0, 90], [45, 30], [200, 5], [359, 89]]) {
    const [x, y, z] = lightVector(az, el);
    assert.ok(Math.abs(Math.hypot(x, y, z) - 1) < 1e-12);
    assert.ok(z >= 0);
  }
  const zenith = lightVector(0, 90);
  assert.ok(Math.abs(zenith[2] - 1) < 1e-12);
});

test("request body carries the light as a vector, not angles", () => {
  const req = renderRequest(SAMPLE);
  const light = req.params.light as number[];
  assert.equal(light.length, 3);
  assert.ok(!("azimuthDeg" in req.params));
});

test("band toggle lands in the request body", () => {
  const req1 = renderRequest({ ...SAMPLE, bandNir: "nir720" });
  const req2 = renderRequest({ ...SAMPLE, bandNir: "nir830" });
  assert.equal(req1.params.band_nir, "nir720");
  assert.equal(req2.params.band_nir, "nir830");
  assert.notEqual(JSON.stringify(req1), JSON.stringify(req2));
});

test("mode determines the parameter set", () => {
  const mlic = renderRequest({ ...SAMPLE, mode: "mlic" });
  assert.ok("beta" in mlic.params);
  assert.ok(!("a" in mlic.params));
  const lines = renderRequest({ ...SAMPLE, mode: "lines" });
  assert.equal(lines.params.line_type, "suggestive");
});

test("clampParam keeps slider edits inside the validated ranges", () => {
  assert.equal(clampParam("a", -5), 1);
  assert.equal(clampParam("f", 3), 1);
  assert.equal(clampParam("beta", 0), 0.05);
  assert.equal(clampParam("k", 1), 2);
});

test("decode tolerates unknown and missing keys", () => {
  const decoded = decodeState("mode=mlic&bogus=1");
  assert.equal(decoded.mode, "mlic");
  assert.equal(decoded.a, DEFAULT_STATE.a);
});
