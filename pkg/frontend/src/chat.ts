// Chat feed with lossless stream resume.
//
// The feed consumes an injectable connect() source (the real NDJSON stream in
// the app, a scripted one in tests). It remembers the last delivered seq and
// reconnects from lastSeq + 1 after any drop, skipping replayed messages, so
// the delivered sequence is always exactly fromSeq, fromSeq+1, ... with no
// gaps or duplicates.

import type { ApiClient, ChatMessage } from "./api.js";

export type ConnectFn = (fromSeq: number, signal: AbortSignal) => AsyncIterable<ChatMessage>;

export interface ChatFeedOptions {
  retryMs?: number;
  onError?: (err: unknown) => void;
}

export class ChatFeed {
  lastSeq = 0;

  constructor(
    private connect: ConnectFn,
    private onMessage: (m: ChatMessage) => void,
    private options: ChatFeedOptions = {},
  ) {}

  /** Consume the stream until the signal aborts, reconnecting on drops. */
  async run(fromSeq: number, signal: AbortSignal): Promise<void> {
    this.lastSeq = fromSeq - 1;
    while (!signal.aborted) {
      try {
        for await (const message of this.connect(this.lastSeq + 1, signal)) {
          if (signal.aborted) return;
          if (message.seq <= this.lastSeq) continue; // replay after resume
          this.onMessage(message);
          this.lastSeq = message.seq;
          if (signal.aborted) return;
        }
      } catch (err) {
        if (signal.aborted) return;
        this.options.onError?.(err);
      }
      if (signal.aborted) return;
      await delay(this.options.retryMs ?? 250);
    }
  }
}

export function liveConnect(api: ApiClient, roomId: string): ConnectFn {
  return (fromSeq, signal) => api.streamRoom(roomId, fromSeq, signal);
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
