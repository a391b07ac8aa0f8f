/**
 * Client-side mirror of the broker graph plus live per-topic statistics.
 *
 * The model only changes in response to server frames (graph-changed,
 * message-sample, param-changed, process-exited, and request replies it is
 * explicitly fed); there is no optimistic mutation path. On disconnect the
 * last state is kept and flagged stale.
 */

export interface GraphNode {
  name: string;
  pid?: number | null;
  admin?: boolean;
  publications: { topic: string; schema: string | null }[];
  subscriptions: { topic: string; schema: string | null; drops?: number }[];
}

export interface GraphTopic {
  name: string;
  schema: string | null;
  publishers: string[];
  subscribers: string[];
}

export interface GraphAlias {
  node: string;
  external: string;
  internal: string;
}

export interface Graph {
  version?: number;
  nodes: GraphNode[];
  topics: GraphTopic[];
  aliases: GraphAlias[];
}

export interface Sample {
  sub: number;
  topic: string;
  schema: string | null;
  seq: number;
  ts: number;
  value?: unknown;
  origin?: [string, number] | null;
}

const RATE_WINDOW_MS = 3000;
const WRAP_PREFIX = "/__wrap/";

export class ConsoleGraphModel {
  graph: Graph = { nodes: [], topics: [], aliases: [] };
  stale = true;
  params = new Map<string, { value: number; version: number }>();
  lastSamples = new Map<string, Sample>();
  exits: { node: string; returncode: number | null }[] = [];
  private sampleTimes = new Map<string, number[]>();
  private listeners = new Set<() => void>();

  onChange(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  /** Route one server event into the mirror. */
  apply(event: { event: string; [key: string]: unknown }, now = Date.now()): void {
    switch (event.event) {
      case "graph-changed":
        this.setGraph(event.graph as Graph);
        break;
      case "param-changed": {
        const name = event.name as string;
        this.params.set(name, {
          value: event.value as number,
          version: event.version as number,
        });
        this.emit();
        break;
      }
      case "message-sample": {
        const sample = event as unknown as Sample;
        this.lastSamples.set(sample.topic, sample);
        const times = this.sampleTimes.get(sample.topic) ?? [];
        times.push(now);
        while (times.length && times[0] < now - RATE_WINDOW_MS) times.shift();
        this.sampleTimes.set(sample.topic, times);
        this.emit();
        break;
      }
      case "process-exited":
        this.exits.push({
          node: event.node as string,
          returncode: (event.returncode as number | null) ?? null,
        });
        this.emit();
        break;
      default:
        break; // unknown events carry nothing we may show
    }
  }

  setGraph(graph: Graph): void {
    this.graph = graph;
    this.stale = false;
    this.emit();
  }

  markStale(): void {
    this.stale = true;
    this.emit();
  }

  /** Samples per second over the sliding window (server-side rate limit applies). */
  topicRate(topic: string, now = Date.now()): number {
    const times = this.sampleTimes.get(topic) ?? [];
    const recent = times.filter((t) => t >= now - RATE_WINDOW_MS);
    return recent.length / (RATE_WINDOW_MS / 1000);
  }
}

// --- view derivation ---------------------------------------------------------

export type EdgeKind = "pub" | "sub" | "alias";

export interface ViewEdge {
  from: string; // node:<name> | topic:<name>
  to: string;
  kind: EdgeKind;
}

export interface ViewNode {
  name: string;
  role: "node" | "wrapper" | "base";
  wrappedBy?: string;
  internalTopics: string[];
}

export interface ViewGraph {
  nodes: ViewNode[];
  topics: { name: string; schema: string | null; internal: boolean }[];
  edges: ViewEdge[];
}

/** Pure projection of the mirrored graph into drawable structure: who wraps
 * whom (from the alias table), which topics are wrap internals, and every
 * pub/sub/alias edge. */
export function deriveView(graph: Graph): ViewGraph {
  const wrapperOf = new Map<string, string>(); // base node -> wrapper name
  for (const alias of graph.aliases) {
    const rest = alias.internal.slice(WRAP_PREFIX.length);
    const wrapper = rest.split("/")[0];
    if (wrapper) wrapperOf.set(alias.node, wrapper);
  }
  const wrapperNames = new Set(wrapperOf.values());

  const nodes: ViewNode[] = graph.nodes.map((node) => {
    const role = wrapperOf.has(node.name)
      ? "base"
      : wrapperNames.has(node.name)
        ? "wrapper"
        : "node";
    return {
      name: node.name,
      role,
      wrappedBy: wrapperOf.get(node.name),
      internalTopics: [
        ...node.publications.map((p) => p.topic),
        ...node.subscriptions.map((s) => s.topic),
      ].filter((t) => t.startsWith(WRAP_PREFIX)),
    };
  });

  const topics = graph.topics.map((topic) => ({
    name: topic.name,
    schema: topic.schema,
    internal: topic.name.startsWith(WRAP_PREFIX),
  }));

  const edges: ViewEdge[] = [];
  for (const topic of graph.topics) {
    for (const publisher of topic.publishers) {
      edges.push({ from: `node:${publisher}`, to: `topic:${topic.name}`, kind: "pub" });
    }
    for (const subscriber of topic.subscribers) {
      edges.push({ from: `topic:${topic.name}`, to: `node:${subscriber}`, kind: "sub" });
    }
  }
  for (const alias of graph.aliases) {
    edges.push({ from: `topic:${alias.external}`, to: `topic:${alias.internal}`, kind: "alias" });
  }
  return { nodes, topics, edges };
}
