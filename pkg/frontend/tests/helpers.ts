import { ApiError } from "../src/api.js";
import type { RatingsApi, Session, SubmitResult, TrialPayload } from "../src/api.js";
import type { StorageLike } from "../src/state.js";

export function memoryStorage(): StorageLike {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => {
      map.set(key, value);
    },
    removeItem: (key) => {
      map.delete(key);
    },
  };
}

export const SLOTS = ["c1", "c2", "c3", "c4", "c5"] as const;

export function trialPayload(trialId: string): TrialPayload {
  return {
    trial_id: trialId,
    reference_url: `/clips/${trialId}/reference.wav`,
    clips: SLOTS.map((slot) => ({
      slot,
      clip_url: `/clips/${trialId}/clip_${slot}.wav`,
    })),
  };
}

export interface Submission {
  listenerId: string;
  trialId: string;
  scores: Record<string, number>;
}

export interface FakeApi extends RatingsApi {
  submissions: Submission[];
  sessionCalls: number;
  /** When set, the next submitRatings call throws this and clears it. */
  failSubmitOnce: Error | null;
}

export function fakeApi(trialIds: string[]): FakeApi {
  const api: FakeApi = {
    submissions: [],
    sessionCalls: 0,
    failSubmitOnce: null,
    async createSession(): Promise<Session> {
      api.sessionCalls += 1;
      return { listener_id: "ab12cd34ef56", trials: [...trialIds] };
    },
    async fetchTrial(trialId: string): Promise<TrialPayload> {
      if (!trialIds.includes(trialId)) {
        throw new ApiError(404, `unknown trial ${trialId}`);
      }
      return trialPayload(trialId);
    },
    async submitRatings(listenerId, trialId, scores): Promise<SubmitResult> {
      if (api.failSubmitOnce !== null) {
        const err = api.failSubmitOnce;
        api.failSubmitOnce = null;
        throw err;
      }
      api.submissions.push({ listenerId, trialId, scores });
      return { accepted: true, recorded: Object.keys(scores).length };
    },
  };
  return api;
}
