/**
 * Typed HTTP client for the pairwise-rating study service.
 *
 * The client knows nothing about rendering; it maps the service's JSON
 * endpoints onto typed promises and implements exactly-once submission:
 * a response is retried on network failure with the *same* trial token,
 * and a duplicate-token rejection after a retry is treated as confirmation
 * that the first attempt was delivered.
 */

export interface SessionInfo {
  session_id: string;
  stage: number;
  trial_count: number;
}

export interface TrialSide {
  image_id: string;
  url: string;
}

export interface PendingTrial {
  done: false;
  token: string;
  index: number;
  total: number;
  left: TrialSide;
  right: TrialSide;
}

export interface FinishedTrialState {
  done: true;
  status: "complete" | "rejected";
}

export type TrialView = PendingTrial | FinishedTrialState;

export interface SubmitResult {
  accepted: boolean;
  progress: number;
  total: number;
  session_status: "active" | "complete" | "rejected";
}

export interface ApiErrorBody {
  error: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.error}: ${body.message}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ClientOptions {
  /** Injectable for tests; defaults to the global fetch. */
  fetchFn?: FetchLike;
  /** Maximum delivery attempts per response submission. */
  maxAttempts?: number;
  /** Delay between retries, in milliseconds. */
  retryDelayMs?: number;
}

async function parseError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody = { error: "HTTPError", message: response.statusText };
  try {
    const parsed = (await response.json()) as { detail?: ApiErrorBody };
    if (parsed.detail && typeof parsed.detail.error === "string") {
      body = parsed.detail;
    }
  } catch {
    // non-JSON error body; keep the generic one
  }
  return new ApiError(response.status, body);
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** The operations the session flow needs; lets tests substitute fakes. */
export interface StudyApi {
  createSession(
    raterId: string,
    viewport: { width: number; height: number },
  ): Promise<SessionInfo>;
  nextTrial(sessionId: string): Promise<TrialView>;
  submitResponse(
    sessionId: string,
    body: { token: string; choice: string; latency: number },
  ): Promise<SubmitResult>;
}

export class StudyApiClient implements StudyApi {
  private readonly fetchFn: FetchLike;
  private readonly maxAttempts: number;
  private readonly retryDelayMs: number;

  constructor(
    private readonly baseUrl: string,
    options: ClientOptions = {},
  ) {
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
    this.maxAttempts = options.maxAttempts ?? 4;
    this.retryDelayMs = options.retryDelayMs ?? 50;
  }

  imageUrl(path: string): string {
    return this.baseUrl + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(
    raterId: string,
    viewport: { width: number; height: number },
  ): Promise<SessionInfo> {
    const query = new URLSearchParams({
      rater_id: raterId,
      viewport_width: String(viewport.width),
      viewport_height: String(viewport.height),
    });
    return this.getJson<SessionInfo>(`/api/session?${query}`);
  }

  nextTrial(sessionId: string): Promise<TrialView> {
    return this.getJson<TrialView>(
      `/api/session/${encodeURIComponent(sessionId)}/trial`,
    );
  }

  /**
   * Submit one choice. Network failures are retried with the same token;
   * the service deduplicates on the token, so a 409 duplicate-token reply
   * on a retry means the earlier attempt landed and the submission is
   * reported as delivered rather than failed.
   */
  async submitResponse(
    sessionId: string,
    body: { token: string; choice: string; latency: number },
  ): Promise<SubmitResult> {
    const url = `${this.baseUrl}/api/session/${encodeURIComponent(sessionId)}/response`;
    let attempted = false;
    let lastNetworkError: unknown = null;
    for (let attempt = 0; attempt < this.maxAttempts; attempt++) {
      if (attempt > 0) {
        await sleep(this.retryDelayMs);
      }
      let response: Response;
      try {
        response = await this.fetchFn(url, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify(body),
        });
      } catch (err) {
        attempted = true;
        lastNetworkError = err;
        continue;
      }
      if (response.ok) {
        return (await response.json()) as SubmitResult;
      }
      const error = await parseError(response);
      if (error.body.error === "DuplicateResponse" && attempted) {
        // The earlier attempt was delivered; fetch authoritative progress.
        const trial = await this.nextTrial(sessionId);
        if (trial.done) {
          return {
            accepted: true,
            progress: 0,
            total: 0,
            session_status: trial.status,
          };
        }
        return {
          accepted: true,
          progress: trial.index,
          total: trial.total,
          session_status: "active",
        };
      }
      throw error;
    }
    throw new Error(
      `response submission failed after ${this.maxAttempts} attempts: ${String(lastNetworkError)}`,
    );
  }
}
