import { describe, expect, it } from "vitest";

import { ApiError, Client, detailOf, type FetchLike } from "../src/api.js";

/** Endpoints the service documents; the client must never call anything else. */
const DOCUMENTED = new Set([
  "/api/graph",
  "/api/summary",
  "/api/features",
  "/api/edits",
  "/api/quick-eval",
]);

interface LoggedRequest {
  url: string;
  method: string;
  body: unknown;
}

function scripted(): { fetchFn: FetchLike; log: LoggedRequest[] } {
  const log: LoggedRequest[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    log.push({
      url,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    });
    return new Response("{}", {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  };
  return { fetchFn, log };
}

describe("client requests", () => {
  it("touches only documented endpoints across a full session", async () => {
    const { fetchFn, log } = scripted();
    const client = new Client(fetchFn);
    await client.graph();
    await client.summary();
    await client.features("Y", "causal-lags");
    await client.features("Y", "causal-lags", true);
    await client.edits({ author: "expert", add: [], remove: [], commit: false });
    await client.quickEval("Y", "causal-lags", true);
    await client.edits({ author: "expert", add: [], remove: [], commit: true });

    for (const entry of log) {
      const path = entry.url.split("?")[0]!;
      expect(DOCUMENTED.has(path), `unexpected request to ${entry.url}`).toBe(true);
    }
    expect(log).toHaveLength(7);
  });

  it("encodes feature lookups as query parameters", async () => {
    const { fetchFn, log } = scripted();
    await new Client(fetchFn).features("In Temp", "causal-all", true);
    const entry = log[0]!;
    expect(entry.method).toBe("GET");
    const query = new URLSearchParams(entry.url.split("?")[1]);
    expect(query.get("target")).toBe("In Temp");
    expect(query.get("method")).toBe("causal-all");
    expect(query.get("preview")).toBe("true");
  });

  it("posts edit batches and quick-eval settings as JSON", async () => {
    const { fetchFn, log } = scripted();
    const client = new Client(fetchFn);
    const batch = {
      author: "expert",
      add: [{ source: "A", target: "B", lag: 2, note: "" }],
      remove: [],
      commit: true,
    };
    await client.edits(batch);
    await client.quickEval("B", "all");
    expect(log[0]).toEqual({ url: "/api/edits", method: "POST", body: batch });
    expect(log[1]).toEqual({
      url: "/api/quick-eval",
      method: "POST",
      body: { target: "B", method: "all", preview: false, horizon: null },
    });
  });
});

describe("error surfacing", () => {
  function failing(status: number, body: string): FetchLike {
    return async () => new Response(body, { status });
  }

  it("passes a plain detail string through", async () => {
    const client = new Client(failing(409, '{"detail": "batch conflicts with the committed graph"}'));
    const err = await client.graph().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).detail).toBe("batch conflicts with the committed graph");
  });

  it("flattens validation issue lists", async () => {
    const body = JSON.stringify({
      detail: [
        { loc: ["body", "add", 0, "lag"], msg: "must be at least 1", type: "value_error" },
        { loc: ["body", "author"], msg: "field required", type: "missing" },
      ],
    });
    const client = new Client(failing(422, body));
    const err = (await client.graph().catch((e: unknown) => e)) as ApiError;
    expect(err.detail).toBe("body.add.0.lag: must be at least 1; body.author: field required");
  });

  it("falls back to the status line for non-JSON bodies", async () => {
    const err = (await new Client(failing(500, "boom"))
      .graph()
      .catch((e: unknown) => e)) as ApiError;
    expect(err.status).toBe(500);
    expect(err.detail).toBe("HTTP 500");
  });

  it("reports network failures with status zero", async () => {
    const down: FetchLike = async () => {
      throw new TypeError("fetch failed");
    };
    const err = (await new Client(down).graph().catch((e: unknown) => e)) as ApiError;
    expect(err.status).toBe(0);
    expect(err.detail).toContain("service unreachable");
  });
});

describe("detail extraction", () => {
  it("handles strings, issue lists, and junk", () => {
    expect(detailOf({ detail: "nope" })).toBe("nope");
    expect(detailOf({ detail: [{ msg: "bad" }] })).toBe("body: bad");
    expect(detailOf({ unrelated: 1 })).toBeNull();
    expect(detailOf("text")).toBeNull();
    expect(detailOf(null)).toBeNull();
  });
});
