/**
 * SVG renderer for the derived graph: node boxes on the left, topics on the
 * right, wrapped bases nested inside their wrapper's outline. Edge styles:
 * solid = publish, dashed = subscribe, dotted orange = alias rerouting.
 */

import { ConsoleGraphModel, deriveView, ViewGraph } from "./model";

const NODE_W = 190;
const NODE_H = 34;
const TOPIC_W = 260;
const TOPIC_H = 26;
const GAP = 14;
const COLUMN_X = { node: 20, topic: 420 };

export class GraphView {
  constructor(
    private svg: SVGSVGElement,
    private model: ConsoleGraphModel,
    private onSelect: (kind: "node" | "topic", name: string) => void,
  ) {}

  render(): void {
    const view = deriveView(this.model.graph);
    const svg = this.svg;
    while (svg.firstChild) svg.removeChild(svg.firstChild);

    const nodeY = new Map<string, number>();
    const topicY = new Map<string, number>();

    // bases render directly under their wrapper, visually nested
    const ordered = [...view.nodes].sort((a, b) => {
      const keyA = a.role === "base" ? `${a.wrappedBy}~1` : `${a.name}~0`;
      const keyB = b.role === "base" ? `${b.wrappedBy}~1` : `${b.name}~0`;
      return keyA.localeCompare(keyB);
    });

    let y = 20;
    for (const node of ordered) {
      const nested = node.role === "base";
      const x = COLUMN_X.node + (nested ? 18 : 0);
      if (node.role === "wrapper") {
        const baseCount = view.nodes.filter((n) => n.wrappedBy === node.name).length;
        const outline = rect(x - 6, y - 6, NODE_W + 30, (NODE_H + GAP) * (1 + baseCount) + 2,
                             "wrap-outline");
        svg.appendChild(outline);
      }
      const group = rect(x, y, NODE_W, NODE_H, `node-box role-${node.role}`);
      group.addEventListener("click", () => this.onSelect("node", node.name));
      svg.appendChild(group);
      svg.appendChild(label(x + 8, y + 22, node.name, `node-label role-${node.role}`));
      nodeY.set(node.name, y + NODE_H / 2);
      y += NODE_H + GAP;
    }

    let ty = 20;
    for (const topic of view.topics) {
      const cls = topic.internal ? "topic-box internal" : "topic-box";
      const box = rect(COLUMN_X.topic, ty, TOPIC_W, TOPIC_H, cls);
      box.addEventListener("click", () => this.onSelect("topic", topic.name));
      svg.appendChild(box);
      const rate = this.model.topicRate(topic.name);
      const rateText = rate > 0 ? `  ${rate.toFixed(1)} Hz` : "";
      svg.appendChild(label(COLUMN_X.topic + 6, ty + 18,
                            `${topic.name} [${topic.schema ?? "raw"}]${rateText}`,
                            "topic-label"));
      topicY.set(topic.name, ty + TOPIC_H / 2);
      ty += TOPIC_H + 10;
    }

    for (const edge of view.edges) {
      const [fromKind, fromName] = splitRef(edge.from);
      const [toKind, toName] = splitRef(edge.to);
      const x1 = fromKind === "node" ? COLUMN_X.node + NODE_W : COLUMN_X.topic;
      const y1 = (fromKind === "node" ? nodeY : topicY).get(fromName);
      const x2 = toKind === "node" ? COLUMN_X.node + NODE_W : COLUMN_X.topic;
      const y2 = (toKind === "node" ? nodeY : topicY).get(toName);
      if (y1 === undefined || y2 === undefined) continue;
      svg.appendChild(line(x1, y1, x2, y2, `edge edge-${edge.kind}`));
    }

    svg.setAttribute("height", String(Math.max(y, ty) + 30));
  }
}

function splitRef(ref: string): [string, string] {
  const idx = ref.indexOf(":");
  return [ref.slice(0, idx), ref.slice(idx + 1)];
}

const SVG_NS = "http://www.w3.org/2000/svg";

function rect(x: number, y: number, w: number, h: number, cls: string): SVGRectElement {
  const el = document.createElementNS(SVG_NS, "rect");
  el.setAttribute("x", String(x));
  el.setAttribute("y", String(y));
  el.setAttribute("width", String(w));
  el.setAttribute("height", String(h));
  el.setAttribute("rx", "4");
  el.setAttribute("class", cls);
  return el;
}

function label(x: number, y: number, text: string, cls: string): SVGTextElement {
  const el = document.createElementNS(SVG_NS, "text");
  el.setAttribute("x", String(x));
  el.setAttribute("y", String(y));
  el.setAttribute("class", cls);
  el.textContent = text;
  return el;
}

function line(x1: number, y1: number, x2: number, y2: number, cls: string): SVGLineElement {
  const el = document.createElementNS(SVG_NS, "line");
  el.setAttribute("x1", String(x1));
  el.setAttribute("y1", String(y1));
  el.setAttribute("x2", String(x2));
  el.setAttribute("y2", String(y2));
  el.setAttribute("class", cls);
  return el;
}

export { deriveView };
export type { ViewGraph };
