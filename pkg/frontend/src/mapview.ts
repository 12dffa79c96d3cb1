// 2D SVG rendering of the map, the active route (red), the offered
// alternative (green), and the robot markers.

import type { MapDocument, MapNode, RouteJson } from "./types.js";
import type { ViewState } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const MARGIN = 3;

interface Projection {
  x(v: number): number;
  y(v: number): number;
}

function projection(mapDoc: MapDocument): Projection {
  const xs = mapDoc.nodes.map((n) => n.x);
  const ys = mapDoc.nodes.map((n) => n.y);
  const maxY = Math.max(...ys);
  const minX = Math.min(...xs);
  // SVG y grows downward; map y grows upward.
  return {
    x: (v: number) => v - minX + MARGIN,
    y: (v: number) => maxY - v + MARGIN,
  };
}

function nodeById(mapDoc: MapDocument): Map<string, MapNode> {
  return new Map(mapDoc.nodes.map((n) => [n.id, n]));
}

function el(name: string, attrs: Record<string, string>): SVGElement {
  const element = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) {
    element.setAttribute(key, value);
  }
  return element as SVGElement;
}

function routePoints(route: RouteJson, nodes: Map<string, MapNode>, proj: Projection): string {
  return route.node_sequence
    .map((id) => {
      const node = nodes.get(id);
      return node ? `${proj.x(node.x)},${proj.y(node.y)}` : "";
    })
    .filter(Boolean)
    .join(" ");
}

const HEADING_VECTOR: Record<number, [number, number]> = {
  0: [1, 0],
  90: [0, -1], // screen coordinates: map +y (90 deg) points up
  180: [-1, 0],
  270: [0, 1],
};

export function renderMap(container: HTMLElement, state: ViewState, debug: boolean): void {
  const mapDoc = state.mapDoc;
  const proj = projection(mapDoc);
  const nodes = nodeById(mapDoc);
  const xs = mapDoc.nodes.map((n) => proj.x(n.x));
  const ys = mapDoc.nodes.map((n) => proj.y(n.y));
  const width = Math.max(...xs) + MARGIN;
  const height = Math.max(...ys) + MARGIN;

  const svg = el("svg", {
    viewBox: `0 0 ${width} ${height}`,
    class: "map-svg",
    role: "img",
    "aria-label": `Map of ${mapDoc.name}`,
  });

  for (const edge of mapDoc.edges) {
    const a = nodes.get(edge.from);
    const b = nodes.get(edge.to);
    if (!a || !b) continue;
    svg.appendChild(
      el("line", {
        class: "edge",
        "data-edge": `${edge.from}->${edge.to}`,
        x1: String(proj.x(a.x)),
        y1: String(proj.y(a.y)),
        x2: String(proj.x(b.x)),
        y2: String(proj.y(b.y)),
      }),
    );
  }

  if (state.route) {
    svg.appendChild(
      el("polyline", {
        class: "route-active",
        "data-route": state.route.node_sequence.join(","),
        points: routePoints(state.route, nodes, proj),
        fill: "none",
      }),
    );
  }
  if (state.alternative) {
    svg.appendChild(
      el("polyline", {
        class: "route-alt",
        "data-route": state.alternative.node_sequence.join(","),
        points: routePoints(state.alternative, nodes, proj),
        fill: "none",
      }),
    );
  }

  for (const node of mapDoc.nodes) {
    const group = el("g", { class: "node", "data-node-id": node.id });
    group.appendChild(el("circle", { cx: String(proj.x(node.x)), cy: String(proj.y(node.y)), r: "0.8" }));
    const text = el("text", {
      x: String(proj.x(node.x) + 1),
      y: String(proj.y(node.y) - 1),
      class: "node-label",
    });
    text.textContent = node.label ?? node.id;
    group.appendChild(text);
    svg.appendChild(group);
  }

  const drawRobot = (pose: { node: string; heading: number }, cls: string) => {
    const node = nodes.get(pose.node);
    if (!node) return;
    const cx = proj.x(node.x);
    const cy = proj.y(node.y);
    const [dx, dy] = HEADING_VECTOR[pose.heading] ?? [0, 0];
    svg.appendChild(el("circle", { class: cls, "data-node": pose.node, cx: String(cx), cy: String(cy), r: "1.2" }));
    svg.appendChild(
      el("line", {
        class: `${cls}-heading`,
        x1: String(cx),
        y1: String(cy),
        x2: String(cx + 2 * dx),
        y2: String(cy + 2 * dy),
      }),
    );
  };
  if (state.believed) {
    drawRobot(state.believed, "robot-believed");
  }
  if (debug && state.truth) {
    drawRobot(state.truth, "robot-truth");
  }

  container.replaceChildren(svg);
}
