/** Client-side session view: a reducer over pushed events.
 *
 * Asks resolve from daemon echoes, never locally: a decision made in another
 * client resolves the row here with its source attached.  Journal and marker
 * events mark the state dirty so the view re-syncs diff/log from /api/state.
 */

import type { ConsoleEvent, PendingAsk, SessionState } from "./types.js";

export interface ResolvedAsk extends PendingAsk {
  verdict: string;
  source: string;
}

export interface SessionView {
  state: SessionState | null;
  pending: PendingAsk[];
  resolved: ResolvedAsk[];
  connection: "connecting" | "connected" | "retrying";
  dirty: boolean; // diff/log are stale; refetch wanted
}

export function emptyView(): SessionView {
  return {
    state: null,
    pending: [],
    resolved: [],
    connection: "connecting",
    dirty: false,
  };
}

export function applyEvent(view: SessionView, event: ConsoleEvent): SessionView {
  switch (event.event) {
    case "state":
      return {
        ...view,
        state: event.state,
        pending: event.state.pending_asks,
        dirty: false,
      };
    case "ask":
      if (view.pending.some((a) => a.id === event.ask.id)) return view;
      return { ...view, pending: [...view.pending, event.ask] };
    case "decision": {
      const ask = view.pending.find((a) => a.id === event.ask_id);
      if (!ask) return view;
      return {
        ...view,
        pending: view.pending.filter((a) => a.id !== event.ask_id),
        resolved: [
          { ...ask, verdict: event.verdict, source: event.source },
          ...view.resolved,
        ].slice(0, 50),
      };
    }
    case "journal":
    case "marker":
    case "commit":
    case "abort":
      return { ...view, dirty: true };
    case "keepalive":
      return view;
    default:
      return view;
  }
}

export function askAgeSeconds(ask: PendingAsk, now = Date.now() / 1000): number {
  return Math.max(0, now - ask.ts);
}
