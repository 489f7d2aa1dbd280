import { describe, expect, it } from "vitest";

import { ApiError, StudyApiClient } from "../src/api.js";
import type { FetchLike } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/**
 * Minimal in-memory stand-in for the response endpoint: consumes tokens in
 * order, returns 409 DuplicateResponse for a re-sent consumed token. The
 * `failures` script says, per POST, whether to drop the reply before or
 * after the server applies the submission.
 */
function fakeService(failures: Array<"none" | "before" | "after">) {
  const consumed: string[] = [];
  let calls = 0;
  const fetchFn: FetchLike = async (input, init) => {
    if (init?.method !== "POST") {
      return jsonResponse(200, {
        done: false,
        token: `t${consumed.length}`,
        index: consumed.length,
        total: 5,
        left: { image_id: "a", url: "/img/a" },
        right: { image_id: "b", url: "/img/b" },
      });
    }
    const mode = failures[calls] ?? "none";
    calls += 1;
    const { token } = JSON.parse(String(init.body)) as { token: string };
    if (mode === "before") {
      throw new TypeError("network down");
    }
    if (consumed.includes(token)) {
      return jsonResponse(409, {
        detail: { error: "DuplicateResponse", message: "token consumed" },
      });
    }
    if (token !== `t${consumed.length}`) {
      return jsonResponse(403, {
        detail: { error: "InvalidToken", message: token },
      });
    }
    consumed.push(token);
    if (mode === "after") {
      throw new TypeError("connection reset after delivery");
    }
    return jsonResponse(200, {
      accepted: true,
      progress: consumed.length,
      total: 5,
      session_status: "active",
    });
  };
  return { fetchFn, consumed, callCount: () => calls };
}

function client(fetchFn: FetchLike): StudyApiClient {
  return new StudyApiClient("http://svc", {
    fetchFn,
    retryDelayMs: 1,
  });
}

describe("exactly-once response submission", () => {
  it("submits once on the happy path", async () => {
    const svc = fakeService([]);
    const result = await client(svc.fetchFn).submitResponse("s", {
      token: "t0",
      choice: "a",
      latency: 100,
    });
    expect(result.accepted).toBe(true);
    expect(svc.consumed).toEqual(["t0"]);
  });

  it("retries the same token after a failure before delivery", async () => {
    const svc = fakeService(["before", "none"]);
    const result = await client(svc.fetchFn).submitResponse("s", {
      token: "t0",
      choice: "a",
      latency: 100,
    });
    expect(result.accepted).toBe(true);
    expect(svc.consumed).toEqual(["t0"]);
    expect(svc.callCount()).toBe(2);
  });

  it("treats duplicate-token on retry as delivered, not as an error", async () => {
    // The reply to the first attempt is lost after the server applied it;
    // the retry gets 409, which the client resolves against /trial.
    const svc = fakeService(["after"]);
    const result = await client(svc.fetchFn).submitResponse("s", {
      token: "t0",
      choice: "a",
      latency: 100,
    });
    expect(result.accepted).toBe(true);
    expect(result.progress).toBe(1);
    expect(svc.consumed).toEqual(["t0"]); // applied exactly once
  });

  it("propagates duplicate-token when no retry happened", async () => {
    const svc = fakeService([]);
    const c = client(svc.fetchFn);
    await c.submitResponse("s", { token: "t0", choice: "a", latency: 9 });
    await expect(
      c.submitResponse("s", { token: "t0", choice: "a", latency: 9 }),
    ).rejects.toMatchObject({ status: 409 });
  });

  it("does not retry on a rejection that is not transient", async () => {
    const fetchFn: FetchLike = async () =>
      jsonResponse(422, {
        detail: { error: "InvalidChoice", message: "not in pair" },
      });
    await expect(
      client(fetchFn).submitResponse("s", {
        token: "t0",
        choice: "zzz",
        latency: 9,
      }),
    ).rejects.toBeInstanceOf(ApiError);
  });

  it("gives up after the attempt budget when the network stays down", async () => {
    const svc = fakeService(["before", "before", "before", "before"]);
    await expect(
      client(svc.fetchFn).submitResponse("s", {
        token: "t0",
        choice: "a",
        latency: 9,
      }),
    ).rejects.toThrow(/failed after 4 attempts/);
    expect(svc.consumed).toEqual([]);
  });
});
