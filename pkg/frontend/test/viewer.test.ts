import assert from "node:assert/strict";
import { test } from "node:test";

import { Viewport, makeCompareState, wipeSplit } from "../src/viewer.js";

test("both panes read one viewport, so zoom sync is exact", () => {
  const compare = makeCompareState();
  compare.viewport.zoomAt(100, 80, 2.0);
  compare.viewport.panBy(12, -7);
  // the "left pane" and "right pane" transforms are the same object
  const left = compare.viewport.cssTransform();
  const right = compare.viewport.cssTransform();
  assert.equal(left, right);
});

test("zoomAt keeps the anchor point fixed", () => {
  const vp = new Viewport();
  // content point under the anchor before zooming
  const anchor = [50, 40];
  const before = [(anchor[0] - vp.offsetX) / vp.scale,
                  (anchor[1] - vp.offsetY) / vp.scale];
  vp.zoomAt(anchor[0], anchor[1], 3.0);
  const after = [(anchor[0] - vp.offsetX) / vp.scale,
                 (anchor[1] - vp.offsetY) / vp.scale];
  assert.ok(Math.abs(before[0] - after[0]) < 1e-12);
  assert.ok(Math.abs(before[1] - after[1]) < 1e-12);
});

test("zoom factors clamp to sane bounds", () => {
  const vp = new Viewport();
  for (let i = 0; i < 40; i++) vp.zoomAt(0, 0, 10);
  assert.ok(vp.scale <= 64);
  for (let i = 0; i < 80; i++) vp.zoomAt(0, 0, 0.1);
  assert.ok(vp.scale >= 0.25);
});

test("wipe at 0 shows only the pinned render", () => {
  const split = wipeSplit(0, 640);
  assert.equal(split.liveWidth, 0);
  assert.equal(split.pinnedWidth, 640);
});

test("wipe at 1 shows only the live render", () => {
  const split = wipeSplit(1, 640);
  assert.equal(split.liveWidth, 640);
  assert.equal(split.pinnedWidth, 0);
});

test("wipe splits at a pixel boundary", () => {
  const split = wipeSplit(0.37, 640);
  assert.equal(split.liveWidth, Math.round(0.37 * 640));
  assert.equal(split.liveWidth + split.pinnedWidth, 640);
  assert.equal(split.liveWidth, Math.trunc(split.liveWidth));
});

test("pinning stores the previous render alongside the live one", () => {
  const compare = makeCompareState();
  const pinnedBytes = new Uint8Array([9, 9, 9]).buffer;
  compare.pinned = pinnedBytes;
  assert.equal(compare.pinned, pinnedBytes);
  // changing parameters afterwards must not touch the pinned slot
  compare.wipe = 0.5;
  assert.equal(compare.pinned, pinnedBytes);
});
