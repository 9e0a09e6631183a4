/**
 * Typed client for the session service HTTP API.
 *
 * Every payload passes through a leak guard that rejects any document
 * carrying a `target` field outside the per-trial history rows: the console
 * must be unable to learn the pending trial's correct answer even if the
 * server misbehaves.
 */

export interface SessionHandle {
  schema_version: number;
  session_id: string;
  tsid: string;
  phase: string;
  trial_counter: number;
}

export interface PendingTrial {
  separation_mm: number;
  orientation: "HORIZONTAL" | "VERTICAL";
  options: string[];
}

export interface TrialSummary {
  index: number;
  block: number;
  orientation: string;
  separation_mm: number;
  correct: boolean;
  response_time_ms: number;
}

export interface LiveDoc {
  schema_version: number;
  session_id: string;
  tsid: string;
  phase: string;
  task: string;
  block: number;
  orientation: "HORIZONTAL" | "VERTICAL";
  options: string[];
  trial_counter: number;
  total_trials: number;
  entropy: number;
  entropy_trace: number[];
  trials: TrialSummary[];
  postmean: {
    params_expectation: { a: number; b: number; gamma: number };
    curve_samples: { x_mm: number[]; y: number[] };
  };
  marginals: Record<string, { values: number[]; probs: number[] }>;
  bias: { flags: string[]; excluded: boolean };
  pending?: PendingTrial;
}

export interface ResponseResult {
  schema_version: number;
  trial_index: number;
  phase: string;
  trial_counter: number;
  total_trials: number;
  correct?: boolean;
  orientation?: string;
}

export interface CreateSessionParams {
  tsid: string;
  task: string;
  trials_per_block?: number;
  seed?: number;
  first_orientation?: string;
  reveal_feedback?: boolean;
  session_id?: string;
  apparatus?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class TargetLeakError extends Error {
  constructor(path: string) {
    super(`payload leaks a trial target at ${path}`);
    this.name = "TargetLeakError";
  }
}

/**
 * Reject any document that exposes a `target` key, except inside completed
 * trial rows (`trials[i].target` in persisted records is legitimate: those
 * trials are already answered).
 */
export function assertNoTargetLeak(doc: unknown, path = "$"): void {
  if (Array.isArray(doc)) {
    doc.forEach((item, i) => assertNoTargetLeak(item, `${path}[${i}]`));
    return;
  }
  if (doc !== null && typeof doc === "object") {
    for (const [key, value] of Object.entries(doc)) {
      if (key === "target" && !/\.trials\[\d+\]$/.test(path)) {
        throw new TargetLeakError(`${path}.target`);
      }
      assertNoTargetLeak(value, `${path}.${key}`);
    }
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const doc = text ? JSON.parse(text) : {};
    if (!resp.ok) {
      const detail = (doc as { detail?: { error?: string } }).detail;
      throw new ApiError(resp.status, detail?.error ?? "HTTP_ERROR", text);
    }
    assertNoTargetLeak(doc);
    return doc as T;
  }

  health(): Promise<{ status: string; schema_version: number }> {
    return this.request("GET", "/health");
  }

  createSession(params: CreateSessionParams): Promise<SessionHandle> {
    return this.request("POST", "/sessions", params);
  }

  getSession(sid: string): Promise<SessionHandle> {
    return this.request("GET", `/sessions/${encodeURIComponent(sid)}`);
  }

  getLive(sid: string): Promise<LiveDoc> {
    return this.request("GET", `/sessions/${encodeURIComponent(sid)}/live`);
  }

  submitResponse(sid: string, response: string): Promise<ResponseResult> {
    return this.request("POST", `/sessions/${encodeURIComponent(sid)}/response`, {
      response,
    });
  }

  abort(sid: string): Promise<SessionHandle> {
    return this.request("POST", `/sessions/${encodeURIComponent(sid)}/abort`);
  }

  getRecord(sid: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${encodeURIComponent(sid)}/record`);
  }

  listSessions(params: { tsid?: string; phase?: string } = {}): Promise<{
    total: number;
    sessions: Array<{ session_id: string; tsid: string; phase: string }>;
  }> {
    const query = new URLSearchParams(
      Object.entries(params).filter(([, v]) => v !== undefined) as [
        string,
        string,
      ][],
    ).toString();
    return this.request("GET", `/sessions${query ? "?" + query : ""}`);
  }

  /** Server-sent events subscription; browser-only (uses EventSource). */
  subscribe(sid: string, onEvent: (data: unknown) => void): () => void {
    const source = new EventSource(
      `${this.baseUrl}/sessions/${encodeURIComponent(sid)}/events`,
    );
    source.onmessage = (evt) => {
      const doc = JSON.parse(evt.data);
      assertNoTargetLeak(doc);
      onEvent(doc);
    };
    return () => source.close();
  }
}
