/** HTTP + SSE client for the `yolo serve` shim.
 *
 * Every action round-trips through the daemon; the UI renders what the
 * daemon echoes back, never local optimism.  The event stream reconnects
 * with backoff and each (re)connect starts with a full-state resync.
 */

import type { ConsoleEvent, Decision, SessionState } from "./types.js";

export class ConsoleApi {
  constructor(readonly baseUrl: string = "") {}

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body ?? {}),
    });
    const payload = await resp.json();
    if (!resp.ok) {
      throw new Error(String((payload as { error?: string }).error ?? resp.status));
    }
    return payload;
  }

  async getState(): Promise<SessionState> {
    const resp = await fetch(this.baseUrl + "/api/state");
    if (!resp.ok) throw new Error(`state: HTTP ${resp.status}`);
    return (await resp.json()) as SessionState;
  }

  decide(decision: Decision): Promise<unknown> {
    return this.post("/api/decision", decision);
  }

  travel(target: number | string): Promise<unknown> {
    return this.post("/api/travel", { target });
  }

  commit(): Promise<unknown> {
    return this.post("/api/commit", {});
  }

  abort(): Promise<unknown> {
    return this.post("/api/abort", {});
  }
}

/** Incremental server-sent-events parser; framing only, no dispatch. */
export function sseParser(onEvent: (data: string) => void) {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk;
    let at: number;
    while ((at = buffer.indexOf("\n\n")) >= 0) {
      const frame = buffer.slice(0, at);
      buffer = buffer.slice(at + 2);
      const lines = frame
        .split("\n")
        .filter((l) => l.startsWith("data: "))
        .map((l) => l.slice(6));
      if (lines.length) onEvent(lines.join("\n"));
    }
  };
}

export interface StreamHandle {
  stop(): void;
}

export function streamEvents(
  baseUrl: string,
  onEvent: (event: ConsoleEvent) => void,
  onStatus: (status: "connected" | "retrying") => void = () => {},
): StreamHandle {
  let stopped = false;
  let controller: AbortController | null = null;

  const run = async (delayMs: number) => {
    while (!stopped) {
      try {
        controller = new AbortController();
        const resp = await fetch(baseUrl + "/api/events", {
          signal: controller.signal,
        });
        if (!resp.ok || !resp.body) throw new Error(`HTTP ${resp.status}`);
        onStatus("connected");
        delayMs = 500;
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        const parse = sseParser((data) => {
          try {
            onEvent(JSON.parse(data) as ConsoleEvent);
          } catch {
            /* tolerate malformed frames */
          }
        });
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          parse(decoder.decode(value, { stream: true }));
        }
      } catch {
        /* fall through to retry */
      }
      if (stopped) return;
      onStatus("retrying");
      await new Promise((r) => setTimeout(r, delayMs));
      delayMs = Math.min(delayMs * 2, 10_000);
    }
  };
  void run(500);

  return {
    stop() {
      stopped = true;
      controller?.abort();
    },
  };
}
