/** Typed client for the listening-test JSON API.
 *
 * The payload types mirror what the service sends a listener: opaque slot
 * ids and clip URLs, never condition labels. Base URL and fetch are
 * injectable so tests can stub the network.
 */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
export class DuplicateSubmissionError extends ApiError {
    constructor(message) {
        super(409, message);
        this.name = "DuplicateSubmissionError";
    }
}
export class ApiClient {
    baseUrl;
    fetchFn;
    constructor(baseUrl = "", fetchFn = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    async request(path, init) {
        const response = await this.fetchFn(this.baseUrl + path, init);
        if (response.ok) {
            return response;
        }
        let detail = `${response.status}`;
        try {
            const body = (await response.json());
            if (body.detail) {
                detail = body.detail;
            }
        }
        catch {
            // non-JSON error body; keep the status text
        }
        if (response.status === 409) {
            throw new DuplicateSubmissionError(detail);
        }
        throw new ApiError(response.status, detail);
    }
    async createSession() {
        const response = await this.request("/api/session", { method: "POST" });
        return (await response.json());
    }
    async fetchTrial(trialId, listenerId) {
        const query = new URLSearchParams({ listener: listenerId });
        const response = await this.request(`/api/trial/${encodeURIComponent(trialId)}?${query.toString()}`);
        return (await response.json());
    }
    async submitRatings(listenerId, trialId, scores) {
        const response = await this.request("/api/ratings", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({
                listener_id: listenerId,
                trial_id: trialId,
                scores,
            }),
        });
        return (await response.json());
    }
}
