/** Typed client for the listening-test JSON API.
 *
 * The payload types mirror what the service sends a listener: opaque slot
 * ids and clip URLs, never condition labels. Base URL and fetch are
 * injectable so tests can stub the network.
 */

export interface Session {
  listener_id: string;
  trials: string[];
}

export interface TrialClipRef {
  slot: string;
  clip_url: string;
}

export interface TrialPayload {
  trial_id: string;
  reference_url: string;
  clips: TrialClipRef[];
}

export interface SubmitResult {
  accepted: boolean;
  recorded: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class DuplicateSubmissionError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "DuplicateSubmissionError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface RatingsApi {
  createSession(): Promise<Session>;
  fetchTrial(trialId: string, listenerId: string): Promise<TrialPayload>;
  submitRatings(
    listenerId: string,
    trialId: string,
    scores: Record<string, number>,
  ): Promise<SubmitResult>;
}

export class ApiClient implements RatingsApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (response.ok) {
      return response;
    }
    let detail = `${response.status}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) {
        detail = body.detail;
      }
    } catch {
      // non-JSON error body; keep the status text
    }
    if (response.status === 409) {
      throw new DuplicateSubmissionError(detail);
    }
    throw new ApiError(response.status, detail);
  }

  async createSession(): Promise<Session> {
    const response = await this.request("/api/session", { method: "POST" });
    return (await response.json()) as Session;
  }

  async fetchTrial(trialId: string, listenerId: string): Promise<TrialPayload> {
    const query = new URLSearchParams({ listener: listenerId });
    const response = await this.request(
      `/api/trial/${encodeURIComponent(trialId)}?${query.toString()}`,
    );
    return (await response.json()) as TrialPayload;
  }

  async submitRatings(
    listenerId: string,
    trialId: string,
    scores: Record<string, number>,
  ): Promise<SubmitResult> {
    const response = await this.request("/api/ratings", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        listener_id: listenerId,
        trial_id: trialId,
        scores,
      }),
    });
    return (await response.json()) as SubmitResult;
  }
}
