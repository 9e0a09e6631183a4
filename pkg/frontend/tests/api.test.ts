import { describe, expect, it } from "vitest";

import {
  ApiError,
  ServiceClient,
  TargetLeakError,
  assertNoTargetLeak,
} from "../src/api.js";

function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("assertNoTargetLeak", () => {
  it("accepts documents without a target key", () => {
    expect(() =>
      assertNoTargetLeak({
        pending: { separation_mm: 22.5, options: ["FIRST_A", "FIRST_B"] },
        trials: [{ index: 1, correct: true }],
      }),
    ).not.toThrow();
  });

  it("rejects a target on the pending trial", () => {
    expect(() =>
      assertNoTargetLeak({ pending: { separation_mm: 22.5, target: "FIRST_A" } }),
    ).toThrow(TargetLeakError);
  });

  it("rejects a top-level target", () => {
    expect(() => assertNoTargetLeak({ target: "FIRST_B" })).toThrow(
      TargetLeakError,
    );
  });

  it("rejects targets buried in nested arrays", () => {
    expect(() =>
      assertNoTargetLeak({ events: [[{ target: "FIRST_A" }]] }),
    ).toThrow(TargetLeakError);
  });

  it("allows targets on completed trial rows of a record", () => {
    expect(() =>
      assertNoTargetLeak({
        session_id: "s",
        trials: [
          { index: 1, target: "FIRST_A", correct: true },
          { index: 2, target: "FIRST_B", correct: false },
        ],
      }),
    ).not.toThrow();
  });

  it("reports the offending path", () => {
    try {
      assertNoTargetLeak({ pending: { target: "FIRST_A" } });
      expect.unreachable("should have thrown");
    } catch (err) {
      expect((err as Error).message).toContain("$.pending.target");
    }
  });
});

describe("ServiceClient", () => {
  it("sends JSON bodies and parses replies", async () => {
    const calls: Array<{ url: string; init?: RequestInit }> = [];
    const client = new ServiceClient("http://svc", async (url, init) => {
      calls.push({ url, init });
      return jsonResponse({
        schema_version: 1,
        session_id: "abc",
        tsid: "T1",
        phase: "AWAITING_RESPONSE",
        trial_counter: 0,
      });
    });
    const handle = await client.createSession({ tsid: "T1", task: "VT2PD" });
    expect(handle.session_id).toBe("abc");
    expect(calls[0].url).toBe("http://svc/sessions");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      tsid: "T1",
      task: "VT2PD",
    });
  });

  it("maps HTTP errors to ApiError with the service code", async () => {
    const client = new ServiceClient("http://svc", async () =>
      jsonResponse({ detail: { error: "WRONG_PHASE" } }, 409),
    );
    const err = await client.submitResponse("s", "FIRST_A").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).code).toBe("WRONG_PHASE");
  });

  it("refuses successful payloads that leak the pending target", async () => {
    const client = new ServiceClient("http://svc", async () =>
      jsonResponse({
        session_id: "s",
        pending: { separation_mm: 10, target: "FIRST_A" },
      }),
    );
    await expect(client.getLive("s")).rejects.toBeInstanceOf(TargetLeakError);
  });

  it("escapes session ids in paths", async () => {
    const urls: string[] = [];
    const client = new ServiceClient("http://svc", async (url) => {
      urls.push(url);
      return jsonResponse({});
    });
    await client.getLive("a/b c");
    expect(urls[0]).toBe("http://svc/sessions/a%2Fb%20c/live");
  });
});
