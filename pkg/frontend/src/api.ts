/** Typed client for the session service. The UI never computes game
 * quantities itself; every number it shows originates here. */

import type {
  ComprehensionResultDoc,
  ErrorDoc,
  FeedbackDoc,
  ResponseBody,
  SessionDoc,
  TrialDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public residual?: number,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await res.json();
  if (!res.ok || body.schema === "error/1") {
    const err = body as ErrorDoc;
    throw new ApiError(
      res.status,
      err.code ?? "unknown_error",
      err.message ?? "request failed",
      err.residual,
    );
  }
  return body as T;
}

export class SessionApi {
  constructor(private baseUrl: string) {}

  createSession(level?: number): Promise<SessionDoc> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify(level === undefined ? {} : { level }),
    });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return request(`${this.baseUrl}/sessions/${sessionId}`);
  }

  submitComprehension(
    sessionId: string,
    answer: string | number,
  ): Promise<ComprehensionResultDoc> {
    return request(`${this.baseUrl}/sessions/${sessionId}/comprehension`, {
      method: "POST",
      body: JSON.stringify({ answer }),
    });
  }

  getTrial(sessionId: string, trial: number): Promise<TrialDoc> {
    return request(`${this.baseUrl}/sessions/${sessionId}/trials/${trial}`);
  }

  submitResponse(
    sessionId: string,
    trial: number,
    body: ResponseBody,
  ): Promise<FeedbackDoc> {
    return request(
      `${this.baseUrl}/sessions/${sessionId}/trials/${trial}/response`,
      { method: "POST", body: JSON.stringify(body) },
    );
  }

  getSummary(sessionId: string): Promise<Record<string, unknown>> {
    return request(`${this.baseUrl}/sessions/${sessionId}/summary`);
  }
}
