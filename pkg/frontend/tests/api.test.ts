import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("api client", () => {
  it("sends the bearer token and parses JSON", async () => {
    let seen: Record<string, string> = {};
    const client = new ApiClient("", async (input, init) => {
      seen = (init?.headers as Record<string, string>) ?? {};
      return jsonResponse(200, { ok: true });
    });
    client.token = "tok123";
    const out = await client.me();
    expect(seen["Authorization"]).toBe("Bearer tok123");
    expect(out).toEqual({ ok: true });
  });

  it("maps error envelopes to ApiError with the stable code", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse(403, { code: "not-authorized", message: "no read access" }),
    );
    const err = await client.getDataset("x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("not-authorized");
    expect(err.status).toBe(403);
    expect(err.message).toBe("no read access");
  });

  it("parses the NDJSON stream and skips keepalive blanks", async () => {
    const chunks = [
      '{"room":"r","seq":1,"author":"u","ts":1,"body":"a"}\n\n',
      '{"room":"r","seq":2,"author":"u"',
      ',"ts":2,"body":"b"}\n\n{"room":"r","seq":3,"author":"u","ts":3,"body":"c"}\n',
    ];
    const stream = new ReadableStream<Uint8Array>({
      start(controller) {
        const enc = new TextEncoder();
        for (const c of chunks) controller.enqueue(enc.encode(c));
        controller.close();
      },
    });
    const client = new ApiClient("", async () => new Response(stream, { status: 200 }));
    const seqs: number[] = [];
    for await (const m of client.streamRoom("r", 1, new AbortController().signal)) {
      seqs.push(m.seq);
    }
    expect(seqs).toEqual([1, 2, 3]);
  });

  it("builds multipart bodies for uploads", async () => {
    let form: FormData | null = null;
    const client = new ApiClient("", async (_input, init) => {
      form = init?.body as FormData;
      return jsonResponse(200, { id: "d1" });
    });
    await client.uploadDataset({ name: "x" }, new Blob([new TextEncoder().encode("abc")]), "x.csv");
    expect(form).not.toBeNull();
    expect(JSON.parse(String(form!.get("meta")))).toEqual({ name: "x" });
    const file = form!.get("content") as File;
    expect(await file.text()).toBe("abc");
  });
});
