/** Typed client for the pairrank annotation service JSON endpoints. */

export interface NextPairResponse {
  status: "ok" | "exhausted";
  step: number | null;
  pair: [number, number] | null;
  payloads: [string, string] | null;
}

export interface RankEntry {
  item: number;
  score: number;
  std: number | null;
}

export interface AnswerResponse {
  step: number;
  ranking_preview: RankEntry[] | null;
}

export interface RankingResponse {
  items: RankEntry[];
}

export interface CreateSessionBody {
  pool: { features: number[][]; true_scores?: number[] | null; display?: string[] | null };
  sampler: { kind: string; posterior_samples?: number };
  model?: string;
  seed?: number;
  budget?: number | null;
}

/** Server rejected the request (4xx/5xx) with a machine-readable code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = response.statusText;
  try {
    const body = (await response.json()) as { detail?: { code?: string; message?: string } };
    if (body.detail) {
      code = body.detail.code ?? code;
      message = body.detail.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, message);
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(body: CreateSessionBody): Promise<{ session_id: string }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  nextPair(sessionId: string): Promise<NextPairResponse> {
    return this.request(`/sessions/${sessionId}/next`);
  }

  submitAnswer(
    sessionId: string,
    i: number,
    j: number,
    choice: 0 | 1,
    annotator?: string,
  ): Promise<AnswerResponse> {
    return this.request(`/sessions/${sessionId}/answers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ i, j, choice, annotator: annotator ?? null }),
    });
  }

  ranking(sessionId: string): Promise<RankingResponse> {
    return this.request(`/sessions/${sessionId}/ranking`);
  }

  exportSession(sessionId: string): Promise<Record<string, unknown>> {
    return this.request(`/sessions/${sessionId}/export`);
  }

  exportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/export`;
  }
}
