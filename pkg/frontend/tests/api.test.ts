import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, DuplicateSubmissionError } from "../src/api.js";

interface RecordedCall {
  input: string;
  init?: RequestInit;
}

function clientWith(
  responder: (input: string, init?: RequestInit) => Response,
): { client: ApiClient; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const client = new ApiClient("", async (input, init) => {
    calls.push({ input, init });
    return responder(input, init);
  });
  return { client, calls };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("creates a session with POST /api/session", async () => {
    const { client, calls } = clientWith(() =>
      jsonResponse(200, { listener_id: "ab12cd34ef56", trials: ["t001", "t002"] }),
    );
    const session = await client.createSession();
    expect(calls).toHaveLength(1);
    expect(calls[0]?.input).toBe("/api/session");
    expect(calls[0]?.init?.method).toBe("POST");
    expect(session.listener_id).toBe("ab12cd34ef56");
    expect(session.trials).toEqual(["t001", "t002"]);
  });

  it("fetches a trial with the listener in the query string", async () => {
    const { client, calls } = clientWith(() =>
      jsonResponse(200, { trial_id: "t001", reference_url: "/x", clips: [] }),
    );
    await client.fetchTrial("t001", "ab12cd34ef56");
    expect(calls[0]?.input).toBe("/api/trial/t001?listener=ab12cd34ef56");
    expect(calls[0]?.init?.method).toBeUndefined();
  });

  it("escapes awkward ids", async () => {
    const { client, calls } = clientWith(() =>
      jsonResponse(200, { trial_id: "a/b", reference_url: "/x", clips: [] }),
    );
    await client.fetchTrial("a/b", "me&you");
    expect(calls[0]?.input).toBe("/api/trial/a%2Fb?listener=me%26you");
  });

  it("prefixes a base url when given one", async () => {
    const calls: RecordedCall[] = [];
    const client = new ApiClient("http://127.0.0.1:9", async (input, init) => {
      calls.push({ input, init });
      return jsonResponse(200, { listener_id: "x", trials: [] });
    });
    await client.createSession();
    expect(calls[0]?.input).toBe("http://127.0.0.1:9/api/session");
  });

  it("submits ratings as json keyed by slot only", async () => {
    const { client, calls } = clientWith(() => jsonResponse(200, { accepted: true, recorded: 5 }));
    const result = await client.submitRatings("ab12cd34ef56", "t001", {
      c1: 10,
      c2: 20,
      c3: 30,
      c4: 40,
      c5: 50,
    });
    expect(result).toEqual({ accepted: true, recorded: 5 });
    expect(calls[0]?.input).toBe("/api/ratings");
    expect(calls[0]?.init?.method).toBe("POST");

    const body = String(calls[0]?.init?.body);
    expect(JSON.parse(body)).toEqual({
      listener_id: "ab12cd34ef56",
      trial_id: "t001",
      scores: { c1: 10, c2: 20, c3: 30, c4: 40, c5: 50 },
    });
    // Nothing in the outbound payload may hint at how a clip was produced.
    expect(body).not.toMatch(/condition|hidden|k0|gt_|pred|rand|anchor/i);
  });

  it("turns a 409 into DuplicateSubmissionError", async () => {
    const { client } = clientWith(() => jsonResponse(409, { detail: "trial already submitted" }));
    const err = await client
      .submitRatings("x", "t001", { c1: 1 })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(DuplicateSubmissionError);
    expect((err as DuplicateSubmissionError).message).toBe("trial already submitted");
    expect((err as DuplicateSubmissionError).status).toBe(409);
  });

  it("turns other failures into ApiError with the detail message", async () => {
    const { client } = clientWith(() => jsonResponse(422, { detail: "scores incomplete" }));
    const err = await client
      .submitRatings("x", "t001", { c1: 1 })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err).not.toBeInstanceOf(DuplicateSubmissionError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).message).toBe("scores incomplete");
  });

  it("copes with non-json error bodies", async () => {
    const { client } = clientWith(
      () => new Response("<h1>boom</h1>", { status: 500, headers: { "content-type": "text/html" } }),
    );
    const err = await client
      .createSession()
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(500);
    expect((err as ApiError).message).toBe("500");
  });

  it("propagates network failures untouched", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(client.createSession()).rejects.toThrow("fetch failed");
  });
});
