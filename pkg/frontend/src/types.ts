/** Wire types mirroring the session daemon's control protocol. */

export interface DiffEntry {
  path: string;
  kind: "created" | "modified" | "deleted" | "renamed";
  src?: string;
  ino?: number;
}

export interface Marker {
  gen: number;
  tag: "P" | "T";
  label: string;
  target: number | null;
}

export interface SegmentInfo {
  gen: number;
  records: number;
  live: boolean;
}

export interface LogView {
  generation: number;
  records: unknown[][];
  markers: Marker[];
  segments: SegmentInfo[];
}

export interface PendingAsk {
  id: string;
  path: string;
  kind: string;
  process: string;
  ts: number;
}

export interface SessionState {
  base: string;
  mount: string | null;
  generation: number;
  pending_asks: PendingAsk[];
  diff: DiffEntry[];
  log: LogView;
}

/** Events pushed over the SSE stream (plus the initial resync). */
export type ConsoleEvent =
  | { event: "state"; state: SessionState }
  | { event: "ask"; ask: PendingAsk }
  | { event: "decision"; ask_id: string; verdict: string; source: string }
  | { event: "journal"; record: unknown[] }
  | { event: "marker"; tag: string; label: string; gen: number }
  | { event: "commit"; summary: Record<string, unknown> }
  | { event: "abort" }
  | { event: "keepalive" };

export interface Decision {
  ask_id: string;
  verdict: "allow" | "deny";
  install_path?: string;
  install_state?: string;
}
