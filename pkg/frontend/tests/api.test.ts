import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, SessionApi } from "../src/api";

function mockFetch(status: number, body: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      calls.push({ url, init });
      return {
        ok: status >= 200 && status < 300,
        status,
        json: async () => body,
      } as Response;
    }),
  );
  return calls;
}

afterEach(() => vi.unstubAllGlobals());

describe("SessionApi", () => {
  it("submits the response body exactly as validated by the form", async () => {
    const calls = mockFetch(200, {
      schema: "feedback/1",
      trial: 1,
      structure: "bandit",
      got_pickup: true,
      reward_delta: 0.2,
      running_reward: 2.2,
      done: false,
    });
    const api = new SessionApi("http://svc");
    const body = {
      district: "east",
      anticipated: { west: 300, north: 150, east: 147 },
    };
    await api.submitResponse("abc", 1, body);
    expect(calls[0].url).toBe("http://svc/sessions/abc/trials/1/response");
    expect(calls[0].init?.method).toBe("POST");
    // round trip: the wire payload equals the validated form output
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(body);
  });

  it("raises structured errors with the residual attached", async () => {
    mockFetch(422, {
      schema: "error/1",
      code: "elicitation_sum_mismatch",
      message: "anticipated flows must sum to 597",
      residual: 12,
    });
    const api = new SessionApi("");
    const error = await api
      .submitResponse("abc", 1, { district: "west", anticipated: {} })
      .catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.code).toBe("elicitation_sum_mismatch");
    expect(error.residual).toBe(12);
    expect(error.status).toBe(422);
  });

  it("creates sessions with an optional level request", async () => {
    const calls = mockFetch(201, {
      schema: "session/1",
      session_id: "s1",
      level: 2,
      treatment: { display: "static", feedback: "full" },
      comprehension: { kind: "choice", prompt: "", options: [], district: null },
    });
    const api = new SessionApi("");
    await api.createSession(2);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ level: 2 });
  });
});
