import { describe, expect, it } from "vitest";

import { EventStream, SseDecoder, parseSseFrame } from "../src/events.js";
import type { JournalEvent } from "../src/types.js";

function sseBytes(events: JournalEvent[]): Uint8Array {
  const text = events
    .map((e) => `id: ${e.cursor}\nevent: ${e.type}\ndata: ${JSON.stringify(e)}\n\n`)
    .join("");
  return new TextEncoder().encode(text);
}

function streamResponse(chunks: Uint8Array[]): Response {
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(chunk);
      controller.close();
    },
  });
  return new Response(body, {
    status: 200,
    headers: { "Content-Type": "text/event-stream" },
  });
}

const ev = (cursor: number, type = "anomaly"): JournalEvent => ({
  cursor,
  ts: cursor * 10,
  type,
  data: { anomaly_id: `a${cursor}` },
});

describe("SSE parsing", () => {
  it("parses one frame", () => {
    const lines = ["id: 3", "event: anomaly", 'data: {"cursor":3,"ts":1,"type":"anomaly","data":{}}'];
    expect(parseSseFrame(lines)?.cursor).toBe(3);
  });

  it("reassembles frames split across chunks", () => {
    const decoder = new SseDecoder();
    const bytes = sseBytes([ev(1), ev(2)]);
    const text = new TextDecoder().decode(bytes);
    const cut = Math.floor(text.length / 2) + 3;
    const first = decoder.push(text.slice(0, cut));
    const second = decoder.push(text.slice(cut));
    expect([...first, ...second].map((e) => e.cursor)).toEqual([1, 2]);
  });
});

describe("EventStream", () => {
  it("delivers events and tracks the cursor", async () => {
    const seen: number[] = [];
    const states: string[] = [];
    let calls = 0;
    const fetchImpl = async (url: any) => {
      calls += 1;
      if (calls === 1) {
        expect(String(url)).toContain("cursor=0");
        return streamResponse([sseBytes([ev(1), ev(2)])]);
      }
      expect(String(url)).toContain("cursor=2"); // resume from the last id
      return streamResponse([sseBytes([ev(3)])]);
    };
    const stream = new EventStream(
      "http://svc",
      {
        onEvent: (e) => {
          seen.push(e.cursor);
          if (e.cursor === 3) stream.stop();
        },
        onState: (s) => states.push(s),
      },
      { fetchImpl: fetchImpl as unknown as typeof fetch, backoffMs: [1] },
    );
    await stream.run();
    expect(seen).toEqual([1, 2, 3]);
    expect(stream.lastCursor).toBe(3);
    expect(states).toContain("live");
  });

  it("reports lost connection and retries with backoff", async () => {
    const states: string[] = [];
    let calls = 0;
    const fetchImpl = async () => {
      calls += 1;
      if (calls < 3) throw new Error("refused");
      return streamResponse([sseBytes([ev(1)])]);
    };
    const stream = new EventStream(
      "http://svc",
      {
        onEvent: () => stream.stop(),
        onState: (s) => states.push(s),
      },
      { fetchImpl: fetchImpl as unknown as typeof fetch, backoffMs: [1, 2] },
    );
    await stream.run();
    expect(calls).toBe(3);
    expect(states.filter((s) => s === "lost").length).toBeGreaterThanOrEqual(2);
    expect(states[states.length - 1]).toBe("live");
  });
});
