import assert from "node:assert/strict";
import { test } from "node:test";

import { RenderClient } from "../src/api.js";
import { RenderRequest } from "../src/state.js";

const REQ: RenderRequest = { dataset: "s", mode: "sbs", params: { a: 1 } };

test("newer render supersedes the pending one", async () => {
  let release: (() => void) | null = null;
  let aborted = 0;
  const fetchFn = (url: string, init?: RequestInit): Promise<Response> =>
    new Promise((resolve, reject) => {
      const signal = init?.signal;
      signal?.addEventListener("abort", () => {
        aborted += 1;
        reject(new DOMException("aborted", "AbortError"));
      });
      release = () =>
        resolve(new Response(new Uint8Array([1, 2, 3]), { status: 200 }));
    });

  const client = new RenderClient("http://x", fetchFn);
  const first = client.render(REQ);
  const second = client.render(REQ);
  release!();
  const [r1, r2] = await Promise.all([first, second]);
  assert.equal(r1.kind, "superseded");
  assert.equal(r2.kind, "image");
  assert.equal(aborted, 1);
});

test("422 responses become field errors", async () => {
  const fetchFn = async () =>
    new Response(
      JSON.stringify({ errors: [{ field: "beta", message: "must be <= 1" }] }),
      { status: 422 },
    );
  const client = new RenderClient("http://x", fetchFn);
  const result = await client.render(REQ);
  assert.equal(result.kind, "invalid");
  if (result.kind === "invalid") {
    assert.equal(result.errors[0].field, "beta");
  }
});

test("404 responses carry the service message", async () => {
  const fetchFn = async () =>
    new Response(JSON.stringify({ error: "unknown dataset 'ghost'" }), {
      status: 404,
    });
  const client = new RenderClient("http://x", fetchFn);
  const result = await client.render(REQ);
  assert.equal(result.kind, "not-found");
});

test("network failures are reported, not thrown", async () => {
  const client = new RenderClient("http://x", async () => {
    throw new TypeError("fetch failed");
  });
  const result = await client.render(REQ);
  assert.equal(result.kind, "network");
});

test("datasets endpoint parses summaries", async () => {
  const fetchFn = async () =>
    new Response(JSON.stringify([{ id: "sphere", dataset: "layered-sphere",
                                   bands: [], lights: [] }]));
  const client = new RenderClient("http://x", fetchFn);
  const list = await client.datasets();
  assert.equal(list[0].id, "sphere");
});
