import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { matchesFilter, observeHostTraffic } from "../src/observer.js";
import type { TransactionReport } from "../src/types.js";
import { FakeBackend } from "./fixtures.js";

const FILTER = {
  urlPattern: "/backend-api/conversation",
  ignoreSubstrings: ["init", "implicit"],
};

describe("matchesFilter", () => {
  it.each([
    ["POST", "https://chatgpt.com/backend-api/conversation", 200, true],
    ["post", "https://chatgpt.com/backend-api/conversation", 200, true],
    ["GET", "https://chatgpt.com/backend-api/conversation", 200, false],
    ["POST", "https://chatgpt.com/backend-api/conversation", 404, false],
    ["POST", "https://chatgpt.com/backend-api/conversation/init", 200, false],
    ["POST", "https://chatgpt.com/backend-api/conversation/implicit/x", 200, false],
    ["POST", "https://chatgpt.com/backend-api/conversation?feature=initial", 200, false],
    ["POST", "https://chatgpt.com/backend-api/conversation/INIT", 200, true],
    ["POST", "https://chatgpt.com/backend-api/other", 200, false],
    ["POST", "https://chatgpt.com/backend-api/conversations", 200, true],
  ])("%s %s %d -> %s", (method, url, status, want) => {
    expect(matchesFilter(method as string, url as string, status as number, FILTER)).toBe(want);
  });
});

function pageWith(backend: FakeBackend) {
  // The "host page" issues traffic through its own fetch; the observer wraps
  // it and reports matches to the backend through the client.
  const target: { fetch: typeof fetch } = {
    fetch: async (input, init) => {
      const request = new Request(input as RequestInfo, init);
      const status = request.url.includes("fail") ? 500 : 200;
      return new Response("{}", { status });
    },
  };
  const client = new ApiClient({ baseUrl: "http://backend", userId: "u" }, backend.fetch);
  const handle = observeHostTraffic(client, "u", FILTER, target);
  return { target, client, handle };
}

describe("observeHostTraffic", () => {
  it("reports each completed matching request exactly once", async () => {
    const backend = new FakeBackend();
    const { target, client } = pageWith(backend);
    for (let i = 0; i < 7; i += 1) {
      await target.fetch("https://chatgpt.com/backend-api/conversation", { method: "POST" });
    }
    await client.flush();
    expect(backend.transactions).toHaveLength(7);
    expect(backend.queryCount).toBe(7);
  });

  it("does not report excluded or non-matching traffic", async () => {
    const backend = new FakeBackend();
    const { target, client } = pageWith(backend);
    await target.fetch("https://chatgpt.com/backend-api/conversation/init", { method: "POST" });
    await target.fetch("https://chatgpt.com/backend-api/conversation", { method: "GET" });
    await target.fetch("https://chatgpt.com/backend-api/me", { method: "POST" });
    await target.fetch("https://chatgpt.com/backend-api/conversation/fail", { method: "POST" });
    await client.flush();
    expect(backend.transactions).toHaveLength(0);
  });

  it("reports carry the observed status and absolute url", async () => {
    const backend = new FakeBackend();
    const { target, client } = pageWith(backend);
    await target.fetch("https://chatgpt.com/backend-api/conversation", { method: "post" });
    await client.flush();
    const report = backend.transactions[0] as TransactionReport;
    expect(report.method).toBe("POST");
    expect(report.status).toBe(200);
    expect(report.url).toBe("https://chatgpt.com/backend-api/conversation");
    expect(Date.parse(report.observed_at)).not.toBeNaN();
  });

  it("stop() restores the original fetch", async () => {
    const backend = new FakeBackend();
    const { target, client, handle } = pageWith(backend);
    handle.stop();
    await target.fetch("https://chatgpt.com/backend-api/conversation", { method: "POST" });
    await client.flush();
    expect(backend.transactions).toHaveLength(0);
  });

  it("keeps reports ordered across an offline gap", async () => {
    const backend = new FakeBackend();
    const { target, client } = pageWith(backend);
    backend.online = false;
    for (let i = 0; i < 3; i += 1) {
      await target.fetch(`https://chatgpt.com/backend-api/conversation?i=${i}`, {
        method: "POST",
      });
    }
    expect(backend.transactions).toHaveLength(0);
    backend.online = true;
    await client.flush(); // may join the in-flight offline attempt
    await client.flush(); // force an immediate retry instead of waiting out the timer
    const urls = backend.transactions.map((t) => (t as TransactionReport).url);
    expect(urls).toEqual([
      "https://chatgpt.com/backend-api/conversation?i=0",
      "https://chatgpt.com/backend-api/conversation?i=1",
      "https://chatgpt.com/backend-api/conversation?i=2",
    ]);
    client.dispose();
  });
});
