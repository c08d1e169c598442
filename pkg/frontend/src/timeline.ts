/** Timeline graph built from journal markers and segment liveness.
 *
 * One node per generation.  A closed segment draws a solid edge from the
 * state it grew on (the previous marker for snapshots, the travel target for
 * travels) to the marker that closed it; travel markers additionally draw a
 * dashed edge to their target.  Dead segments and nodes reachable only
 * through them are dimmed.
 */

import type { LogView, Marker } from "./types.js";

export interface TimelineNode {
  gen: number;
  tag: "start" | "P" | "T";
  label: string;
  live: boolean;
  current: boolean;
}

export interface SolidEdge {
  from: number;
  to: number;
  segment: number;
  live: boolean;
}

export interface DashedEdge {
  from: number;
  to: number;
}

export interface Timeline {
  nodes: TimelineNode[];
  solid: SolidEdge[];
  dashed: DashedEdge[];
}

/** The node whose state a segment opened from. */
function segmentSource(gen: number, markers: Marker[]): number {
  if (gen === 0) return 0;
  const marker = markers[gen - 1];
  return marker.tag === "T" ? (marker.target as number) : marker.gen;
}

export function buildTimeline(log: LogView): Timeline {
  const markers = log.markers;
  const liveSegments = new Set(
    log.segments.filter((s) => s.live).map((s) => s.gen),
  );

  const solid: SolidEdge[] = [];
  for (const marker of markers) {
    const segment = marker.gen - 1; // the segment this marker closed
    solid.push({
      from: segmentSource(segment, markers),
      to: marker.gen,
      segment,
      live: liveSegments.has(segment),
    });
  }

  const dashed: DashedEdge[] = markers
    .filter((m) => m.tag === "T")
    .map((m) => ({ from: m.gen, to: m.target as number }));

  const liveNodes = new Set<number>([log.generation]);
  for (const edge of solid) {
    if (edge.live) {
      liveNodes.add(edge.from);
      liveNodes.add(edge.to);
    }
  }

  const nodes: TimelineNode[] = [
    {
      gen: 0,
      tag: "start",
      label: "start",
      live: liveNodes.has(0),
      current: log.generation === 0,
    },
  ];
  for (const marker of markers) {
    nodes.push({
      gen: marker.gen,
      tag: marker.tag,
      label: marker.label,
      live: liveNodes.has(marker.gen),
      current: log.generation === marker.gen,
    });
  }
  return { nodes, solid, dashed };
}
