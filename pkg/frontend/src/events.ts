// Journal event stream over server-sent events, consumed via fetch so the
// same code runs in browsers and node. Reconnects with exponential backoff
// from the last seen cursor; the console shows a connection-lost banner in
// the meantime and marks cached data stale.

import type { JournalEvent } from "./types.js";

export type ConnectionState = "connecting" | "live" | "lost";

export interface StreamHandlers {
  onEvent: (event: JournalEvent) => void;
  onState?: (state: ConnectionState) => void;
}

export interface StreamOptions {
  fetchImpl?: typeof fetch;
  /** backoff schedule in ms; the last entry repeats */
  backoffMs?: number[];
  signal?: AbortSignal;
}

/** Parse one SSE frame (the lines between blank separators). */
export function parseSseFrame(lines: string[]): JournalEvent | null {
  let data = "";
  for (const line of lines) {
    if (line.startsWith("data:")) data += line.slice(5).trim();
  }
  if (!data) return null;
  try {
    return JSON.parse(data) as JournalEvent;
  } catch {
    return null;
  }
}

/** Split incoming SSE text into frames, keeping any trailing partial. */
export class SseDecoder {
  private buffer = "";

  push(chunk: string): JournalEvent[] {
    this.buffer += chunk;
    const events: JournalEvent[] = [];
    let idx;
    while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
      const frame = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 2);
      const event = parseSseFrame(frame.split("\n"));
      if (event) events.push(event);
    }
    return events;
  }
}

export class EventStream {
  private cursor: number;
  private stopped = false;

  constructor(
    private baseUrl: string,
    private handlers: StreamHandlers,
    private opts: StreamOptions = {},
    startCursor = 0,
  ) {
    this.cursor = startCursor;
  }

  get lastCursor(): number {
    return this.cursor;
  }

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    const fetchImpl = this.opts.fetchImpl ?? fetch.bind(globalThis);
    const backoff = this.opts.backoffMs ?? [500, 1000, 2000, 5000];
    let attempt = 0;
    while (!this.stopped) {
      this.handlers.onState?.(attempt === 0 ? "connecting" : "lost");
      try {
        const response = await fetchImpl(
          `${this.baseUrl}/events?cursor=${this.cursor}`,
          { signal: this.opts.signal },
        );
        if (!response.ok || !response.body) {
          throw new Error(`stream failed: ${response.status}`);
        }
        this.handlers.onState?.("live");
        attempt = 0;
        const decoder = new SseDecoder();
        const reader = response.body.getReader();
        const text = new TextDecoder();
        for (;;) {
          const { done, value } = await reader.read();
          if (done || this.stopped) break;
          for (const event of decoder.push(text.decode(value, { stream: true }))) {
            this.cursor = event.cursor;
            this.handlers.onEvent(event);
          }
        }
      } catch {
        // fall through to backoff
      }
      if (this.stopped) return;
      this.handlers.onState?.("lost");
      const wait = backoff[Math.min(attempt, backoff.length - 1)];
      attempt += 1;
      await new Promise((resolve) => setTimeout(resolve, wait));
    }
  }
}
