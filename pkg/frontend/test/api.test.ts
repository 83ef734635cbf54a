import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiError, DesignerClient, FetchLike } from "../src/api.js";

function fixture(name: string): unknown {
  return JSON.parse(readFileSync(new URL(`../fixtures/${name}`, import.meta.url), "utf-8"));
}

/** Replay recorded responses keyed by "METHOD path". */
function fixtureFetch(routes: Record<string, { status: number; body: unknown }>): FetchLike & { calls: string[] } {
  const calls: string[] = [];
  const impl = async (url: string, init?: RequestInit) => {
    const key = `${init?.method ?? "GET"} ${url.replace("http://fixture", "")}`;
    calls.push(key);
    const route = routes[key];
    if (!route) throw new Error(`no fixture for ${key}`);
    return new Response(JSON.stringify(route.body), {
      status: route.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return Object.assign(impl, { calls });
}

describe("designer client", () => {
  it("round-trips rule evaluation against the recorded fixture", async () => {
    const evaluation = fixture("evaluation.json");
    const system = fixture("system.json");
    const fetchImpl = fixtureFetch({
      "PUT /sessions/s1/rules": { status: 200, body: evaluation },
    });
    const client = new DesignerClient("http://fixture", fetchImpl);
    const got = await client.putRules("s1", system as never);
    expect(got).toEqual(evaluation);
    expect(fetchImpl.calls).toEqual(["PUT /sessions/s1/rules"]);
  });

  it("fetches what-if deltas and relation search results", async () => {
    const whatIf = fixture("whatif_duplicate.json");
    const relations = fixture("relations.json");
    const fetchImpl = fixtureFetch({
      "POST /sessions/s1/whatif": { status: 200, body: whatIf },
      "GET /sessions/s1/relations?query=class&limit=50": { status: 200, body: relations },
    });
    const client = new DesignerClient("http://fixture", fetchImpl);
    expect(await client.whatIf("s1", { root: 205, edge: "instance_of" })).toEqual(whatIf);
    const got = await client.searchRelations("s1", "class");
    expect(got).toEqual(relations);
  });

  it("surfaces structured service errors", async () => {
    const fetchImpl = fixtureFetch({
      "PUT /sessions/s1/rules": {
        status: 400,
        body: { error: { code: "bad_system", message: "unknown expression op 'nope'", path: "$.axes[0].rules[0].expr" } },
      },
    });
    const client = new DesignerClient("http://fixture", fetchImpl);
    await expect(client.putRules("s1", { axes: [] })).rejects.toThrowError(ApiError);
    try {
      await client.putRules("s1", { axes: [] });
    } catch (err) {
      const apiErr = err as ApiError;
      expect(apiErr.status).toBe(400);
      expect(apiErr.body.path).toBe("$.axes[0].rules[0].expr");
    }
  });
});
