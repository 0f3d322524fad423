/** Typed client for the service; every request the UI makes goes through here,
so a request log in tests is a complete account of the UI's side effects. */

import type {
  EditResponse,
  FeaturePayload,
  GraphPayload,
  QuickEvalPayload,
  SummaryPayload,
} from "./types.js";
import type { EditRequest } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

interface ShapeIssue {
  loc?: unknown[];
  msg?: string;
}

/** Flatten a service error body: plain detail string or a list of shape issues. */
export function detailOf(body: unknown): string | null {
  if (body === null || typeof body !== "object") return null;
  const detail = (body as { detail?: unknown }).detail;
  if (typeof detail === "string") return detail;
  if (Array.isArray(detail)) {
    return detail
      .map((issue: ShapeIssue) => {
        const where = Array.isArray(issue.loc) ? issue.loc.join(".") : "body";
        return `${where}: ${issue.msg ?? "invalid"}`;
      })
      .join("; ");
  }
  return null;
}

export class Client {
  constructor(
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${err instanceof Error ? err.message : err}`);
    }
    const text = await resp.text();
    let body: unknown = null;
    try {
      body = JSON.parse(text);
    } catch {
      // non-JSON bodies fall through to the status line
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, detailOf(body) ?? `HTTP ${resp.status}`);
    }
    return body as T;
  }

  graph(): Promise<GraphPayload> {
    return this.request("/api/graph");
  }

  summary(): Promise<SummaryPayload> {
    return this.request("/api/summary");
  }

  features(target: string, method: string, preview = false): Promise<FeaturePayload> {
    const query = new URLSearchParams({
      target,
      method,
      preview: preview ? "true" : "false",
    });
    return this.request(`/api/features?${query.toString()}`);
  }

  edits(body: EditRequest): Promise<EditResponse> {
    return this.request("/api/edits", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  quickEval(
    target: string,
    method: string,
    preview = false,
    horizon: number | null = null,
  ): Promise<QuickEvalPayload> {
    return this.request("/api/quick-eval", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ target, method, preview, horizon }),
    });
  }
}
