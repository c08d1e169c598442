/** DOM rendering for the three panels: ask queue, staged diff, timeline. */

import { askAgeSeconds, type ResolvedAsk, type SessionView } from "./state.js";
import { buildTimeline } from "./timeline.js";
import type { DiffEntry, PendingAsk } from "./types.js";

export interface Actions {
  decide(ask: PendingAsk, verdict: "allow" | "deny", scope: "once" | "subtree"): void;
  travel(gen: number): void;
  commit(): void;
  abort(): void;
}

const KIND_CODE: Record<string, string> = {
  created: "C",
  modified: "M",
  deleted: "D",
  renamed: "R",
};

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderAskQueue(
  root: HTMLElement,
  pending: PendingAsk[],
  resolved: ResolvedAsk[],
  actions: Actions,
): void {
  root.replaceChildren();
  if (!pending.length && !resolved.length) {
    root.append(el("p", "empty", "no pending asks"));
    return;
  }
  for (const ask of pending) {
    const row = el("div", "ask-row pending");
    row.dataset.askId = ask.id;
    row.append(
      el("span", "ask-kind", ask.kind),
      el("span", "ask-path", ask.path),
      el("span", "ask-proc", `${ask.process} · ${askAgeSeconds(ask).toFixed(0)}s`),
    );
    const buttons = el("span", "ask-buttons");
    for (const [label, verdict, scope] of [
      ["allow", "allow", "once"],
      ["deny", "deny", "once"],
      ["allow subtree", "allow", "subtree"],
      ["deny subtree", "deny", "subtree"],
    ] as const) {
      const button = el("button", `act-${verdict}-${scope}`, label);
      button.addEventListener("click", () => actions.decide(ask, verdict, scope));
      buttons.append(button);
    }
    row.append(buttons);
    root.append(row);
  }
  for (const ask of resolved.slice(0, 8)) {
    const row = el("div", "ask-row resolved");
    row.append(
      el("span", "ask-kind", ask.kind),
      el("span", "ask-path", ask.path),
      el(
        "span",
        "ask-outcome",
        ask.source === "timeout"
          ? `denied (timeout)`
          : `${ask.verdict} — decided by ${ask.source}`,
      ),
    );
    root.append(row);
  }
}

export function renderDiff(root: HTMLElement, entries: DiffEntry[]): void {
  root.replaceChildren();
  if (!entries.length) {
    root.append(el("p", "empty", "no staged changes"));
    return;
  }
  for (const entry of entries) {
    const row = el("div", `diff-row kind-${entry.kind}`);
    row.append(el("span", "diff-kind", KIND_CODE[entry.kind] ?? "?"));
    row.append(el("span", "diff-path", entry.path));
    if (entry.src) row.append(el("span", "diff-src", `← ${entry.src}`));
    root.append(row);
  }
}

const STEP_X = 90;
const ROW_Y = 46;

export function renderTimeline(
  root: HTMLElement,
  view: SessionView,
  actions: Actions,
): void {
  root.replaceChildren();
  if (!view.state) return;
  const timeline = buildTimeline(view.state.log);
  const svgNs = "http://www.w3.org/2000/svg";
  const width = Math.max(timeline.nodes.length * STEP_X + 40, 300);
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", "120");
  const x = (gen: number) => 30 + gen * STEP_X;

  for (const edge of timeline.solid) {
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(x(edge.from)));
    line.setAttribute("y1", String(ROW_Y));
    line.setAttribute("x2", String(x(edge.to)));
    line.setAttribute("y2", String(ROW_Y));
    line.setAttribute(
      "class",
      `segment seg-${edge.segment} ${edge.live ? "live" : "dead"}`,
    );
    svg.append(line);
  }
  for (const edge of timeline.dashed) {
    const path = document.createElementNS(svgNs, "path");
    const x1 = x(edge.from);
    const x2 = x(edge.to);
    path.setAttribute(
      "d",
      `M ${x1} ${ROW_Y - 8} C ${x1} ${ROW_Y - 38}, ${x2} ${ROW_Y - 38}, ${x2} ${ROW_Y - 8}`,
    );
    path.setAttribute("class", `travel-edge from-${edge.from} to-${edge.to}`);
    svg.append(path);
  }
  for (const node of timeline.nodes) {
    const g = document.createElementNS(svgNs, "g");
    g.setAttribute(
      "class",
      `node gen-${node.gen} ${node.live ? "live" : "dead"}` +
        (node.current ? " current" : ""),
    );
    const circle = document.createElementNS(svgNs, "circle");
    circle.setAttribute("cx", String(x(node.gen)));
    circle.setAttribute("cy", String(ROW_Y));
    circle.setAttribute("r", "13");
    g.append(circle);
    const num = document.createElementNS(svgNs, "text");
    num.setAttribute("x", String(x(node.gen)));
    num.setAttribute("y", String(ROW_Y + 4));
    num.setAttribute("text-anchor", "middle");
    num.textContent = String(node.gen);
    g.append(num);
    const label = document.createElementNS(svgNs, "text");
    label.setAttribute("x", String(x(node.gen)));
    label.setAttribute("y", String(ROW_Y + 34));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "node-label");
    label.textContent = node.tag === "start" ? "" : `${node.tag} ${node.label}`;
    g.append(label);
    g.addEventListener("click", () => {
      if (!node.current) actions.travel(node.gen);
    });
    svg.append(g);
  }
  root.append(svg);
}

export function renderStatus(root: HTMLElement, view: SessionView): void {
  const state = view.state;
  root.replaceChildren();
  root.append(
    el("span", `conn ${view.connection}`, view.connection),
    el("span", "gen", state ? `generation ${state.generation}` : ""),
    el("span", "base", state ? state.base : ""),
  );
}
