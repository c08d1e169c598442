import { describe, expect, it } from "vitest";
import { applyEvent, emptyView } from "../src/state.js";
import type { PendingAsk, SessionState } from "../src/types.js";

const ask: PendingAsk = {
  id: "abc123",
  path: "proj/.env",
  kind: "read",
  process: "cat",
  ts: 1700000000,
};

function baseState(): SessionState {
  return {
    base: "/work/proj",
    mount: "/mnt/proj",
    generation: 0,
    pending_asks: [],
    diff: [],
    log: { generation: 0, records: [], markers: [], segments: [] },
  };
}

describe("session view reducer", () => {
  it("resync replaces everything", () => {
    let view = emptyView();
    view = applyEvent(view, { event: "ask", ask });
    const state = baseState();
    view = applyEvent(view, { event: "state", state });
    expect(view.state).toBe(state);
    expect(view.pending).toEqual([]);
    expect(view.dirty).toBe(false);
  });

  it("ask appends once", () => {
    let view = emptyView();
    view = applyEvent(view, { event: "ask", ask });
    view = applyEvent(view, { event: "ask", ask });
    expect(view.pending).toHaveLength(1);
  });

  it("decision from another client resolves the row with its source", () => {
    let view = emptyView();
    view = applyEvent(view, { event: "ask", ask });
    view = applyEvent(view, {
      event: "decision",
      ask_id: ask.id,
      verdict: "allow",
      source: "cli",
    });
    expect(view.pending).toHaveLength(0);
    expect(view.resolved[0]).toMatchObject({
      id: ask.id,
      verdict: "allow",
      source: "cli",
    });
  });

  it("decision for an unknown ask is a no-op", () => {
    const view = applyEvent(emptyView(), {
      event: "decision",
      ask_id: "never-seen",
      verdict: "deny",
      source: "cli",
    });
    expect(view.resolved).toHaveLength(0);
  });

  it("journal and marker events mark the view dirty", () => {
    for (const event of [
      { event: "journal", record: ["S", "a", 1] },
      { event: "marker", tag: "P", label: "x", gen: 1 },
      { event: "commit", summary: {} },
      { event: "abort" },
    ] as const) {
      expect(applyEvent(emptyView(), event).dirty).toBe(true);
    }
  });

  it("keepalive changes nothing", () => {
    const view = emptyView();
    expect(applyEvent(view, { event: "keepalive" })).toBe(view);
  });
});
