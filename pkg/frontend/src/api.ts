/** Typed client for the review service HTTP API. */

export type SpanPair = [number, number];
export type SpanMap = Record<string, SpanPair[]>;

export interface TripletRecord {
  triplet_id: string;
  clip_id: string;
  question: string;
  answer: string;
  span_map: SpanMap;
  status: string;
  category: string | null;
  provenance?: Record<string, string>;
  flags?: Record<string, unknown>;
  filter_rationale?: string | null;
}

export interface NarrationRecord {
  narration_id: string | null;
  start: number;
  end: number | null;
  text: string;
}

export interface ClipRecord {
  clip_id: string;
  video_id: string;
  window: SpanPair;
  narrations: NarrationRecord[];
}

export interface TripletPage {
  items: TripletRecord[];
  total: number;
  limit: number;
  offset: number;
}

export interface DecisionRequest {
  decision_id: string;
  reviewer_id: string;
  action: "accept" | "adjust" | "reject";
  category: string | null;
  adjusted_answer?: string;
  adjusted_span_map?: SpanMap;
}

export interface QueueFilter {
  status?: string;
  clip_id?: string;
  category?: string;
  limit?: number;
  offset?: number;
}

/** Problem-JSON error from the service; fields carry per-path messages. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public fields: Record<string, string> = {},
  ) {
    super(message);
  }
}

/** Endpoint unreachable (connection refused, DNS, aborted). */
export class OfflineError extends Error {}

export function queueUrl(base: string, filter: QueueFilter): string {
  const params = new URLSearchParams();
  for (const key of ["status", "clip_id", "category"] as const) {
    const value = filter[key];
    if (value !== undefined) params.set(key, value);
  }
  if (filter.limit !== undefined) params.set("limit", String(filter.limit));
  if (filter.offset !== undefined) params.set("offset", String(filter.offset));
  const query = params.toString();
  return `${base}/triplets${query ? "?" + query : ""}`;
}

async function parseProblem(response: Response): Promise<ApiError> {
  let code = "error";
  let message = `HTTP ${response.status}`;
  let fields: Record<string, string> = {};
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
    fields = body.fields ?? {};
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message, fields);
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetcher: typeof fetch = fetch,
  ) {}

  private async request<T>(url: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetcher(url, init);
    } catch (err) {
      throw new OfflineError(String(err));
    }
    if (!response.ok) throw await parseProblem(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request(`${this.base}/health`);
  }

  loadQueue(filter: QueueFilter = {}): Promise<TripletPage> {
    return this.request(queueUrl(this.base, filter));
  }

  getTriplet(tripletId: string): Promise<TripletRecord> {
    return this.request(`${this.base}/triplets/${tripletId}`);
  }

  getClip(clipId: string): Promise<ClipRecord> {
    return this.request(`${this.base}/clips/${clipId}`);
  }

  getHistory(tripletId: string): Promise<{ triplet_id: string; decisions: unknown[] }> {
    return this.request(`${this.base}/triplets/${tripletId}/history`);
  }

  submitDecision(tripletId: string, decision: DecisionRequest): Promise<TripletRecord> {
    return this.request(`${this.base}/triplets/${tripletId}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
  }
}
