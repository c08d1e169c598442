import { ConsoleApi, streamEvents } from "./protocol.js";
import { applyEvent, emptyView, type SessionView } from "./state.js";
import { renderAskQueue, renderDiff, renderStatus, renderTimeline, type Actions } from "./render.js";
import type { PendingAsk } from "./types.js";

const api = new ConsoleApi("");
let view: SessionView = emptyView();

const panels = {
  status: document.getElementById("status")!,
  asks: document.getElementById("asks")!,
  diff: document.getElementById("diff")!,
  timeline: document.getElementById("timeline")!,
};

const actions: Actions = {
  async decide(ask: PendingAsk, verdict, scope) {
    try {
      await api.decide({
        ask_id: ask.id,
        verdict,
        ...(scope === "subtree"
          ? {
              install_path: ask.path.includes("/")
                ? ask.path.slice(0, ask.path.lastIndexOf("/"))
                : "/",
              install_state: verdict === "allow" ? "allow" : "deny",
            }
          : {}),
      });
    } catch (err) {
      notice(`already decided elsewhere: ${String(err)}`);
    }
  },
  async travel(gen) {
    try {
      await api.travel(gen);
      await resync();
    } catch (err) {
      notice(String(err));
    }
  },
  async commit() {
    try {
      await api.commit();
      await resync();
    } catch (err) {
      notice(String(err));
    }
  },
  async abort() {
    try {
      await api.abort();
      await resync();
    } catch (err) {
      notice(String(err));
    }
  },
};

function notice(text: string): void {
  const banner = document.getElementById("notice")!;
  banner.textContent = text;
  banner.classList.add("visible");
  setTimeout(() => banner.classList.remove("visible"), 4000);
}

function redraw(): void {
  renderStatus(panels.status, view);
  renderAskQueue(panels.asks, view.pending, view.resolved, actions);
  renderDiff(panels.diff, view.state?.diff ?? []);
  renderTimeline(panels.timeline, view, actions);
}

async function resync(): Promise<void> {
  try {
    const state = await api.getState();
    view = applyEvent(view, { event: "state", state });
    redraw();
  } catch {
    /* stream reconnect will resync */
  }
}

document.getElementById("commit")!.addEventListener("click", actions.commit);
document.getElementById("abort")!.addEventListener("click", actions.abort);

streamEvents(
  "",
  (event) => {
    view = applyEvent(view, event);
    if (view.dirty) void resync();
    redraw();
  },
  (status) => {
    view = { ...view, connection: status };
    redraw();
  },
);

setInterval(redraw, 1000); // keep ask ages ticking
