import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, OfflineError, queueUrl } from "../src/api.js";

describe("queue URL building", () => {
  it("serializes filters", () => {
    expect(queueUrl("", { status: "llm_filtered", limit: 10, offset: 20 })).toBe(
      "/triplets?status=llm_filtered&limit=10&offset=20",
    );
  });

  it("omits absent filters", () => {
    expect(queueUrl("http://x", {})).toBe("http://x/triplets");
  });
});

function fakeFetch(status: number, body: unknown): typeof fetch {
  return async () =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
}

describe("ApiClient error mapping", () => {
  it("parses problem JSON into ApiError", async () => {
    const client = new ApiClient(
      "",
      fakeFetch(422, {
        code: "validation_error",
        message: "bad markup",
        fields: { adjusted_answer: "unbalanced" },
      }),
    );
    const err = await client.getTriplet("t1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.code).toBe("validation_error");
    expect(err.fields.adjusted_answer).toBe("unbalanced");
  });

  it("wraps connection failures as OfflineError", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(OfflineError);
  });

  it("returns parsed bodies on success", async () => {
    const client = new ApiClient("", fakeFetch(200, { status: "ok" }));
    expect(await client.health()).toEqual({ status: "ok" });
  });
});
