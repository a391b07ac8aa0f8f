import { describe, expect, it } from "vitest";

import { ConsoleGraphModel, deriveView, Graph } from "../src/model";

const KOBUKI_GRAPH: Graph = {
  nodes: [
    {
      name: "move_base",
      publications: [{ topic: "/__wrap/experimental_move_base/cmd_vel", schema: "Twist" }],
      subscriptions: [{ topic: "/__wrap/experimental_move_base/tf", schema: "TFMessage" }],
    },
    {
      name: "experimental_move_base",
      publications: [
        { topic: "/cmd_vel", schema: "Twist" },
        { topic: "/mobile_base/commands/velocity", schema: "Twist" },
      ],
      subscriptions: [
        { topic: "/__wrap/experimental_move_base/cmd_vel", schema: "raw" },
        { topic: "/cmd_vel", schema: "Twist" },
      ],
    },
  ],
  topics: [
    {
      name: "/__wrap/experimental_move_base/cmd_vel",
      schema: "Twist",
      publishers: ["move_base"],
      subscribers: ["experimental_move_base"],
    },
    {
      name: "/cmd_vel",
      schema: "Twist",
      publishers: ["experimental_move_base"],
      subscribers: ["experimental_move_base"],
    },
  ],
  aliases: [
    {
      node: "move_base",
      external: "/cmd_vel",
      internal: "/__wrap/experimental_move_base/cmd_vel",
    },
  ],
};

describe("ConsoleGraphModel", () => {
  it("mirrors graph-changed events and clears the stale flag", () => {
    const model = new ConsoleGraphModel();
    expect(model.stale).toBe(true);
    model.apply({ event: "graph-changed", graph: KOBUKI_GRAPH });
    expect(model.stale).toBe(false);
    expect(model.graph.nodes.length).toBe(2);
  });

  it("keeps the last state but flags stale on disconnect", () => {
    const model = new ConsoleGraphModel();
    model.apply({ event: "graph-changed", graph: KOBUKI_GRAPH });
    model.markStale();
    expect(model.stale).toBe(true);
    expect(model.graph.nodes.length).toBe(2, );
  });

  it("tracks parameters with versions", () => {
    const model = new ConsoleGraphModel();
    model.apply({ event: "param-changed", name: "speed", value: 4.5, version: 1 });
    model.apply({ event: "param-changed", name: "speed", value: 6, version: 2 });
    expect(model.params.get("speed")).toEqual({ value: 6, version: 2 });
  });

  it("caches last samples and computes topic rates over the window", () => {
    const model = new ConsoleGraphModel();
    const t0 = 1_000_000;
    for (let i = 0; i < 30; i++) {
      model.apply(
        { event: "message-sample", sub: 1, topic: "/cmd_vel", schema: "Twist",
          seq: i + 1, ts: i, value: { linear: { x: i } } },
        t0 + i * 100,
      );
    }
    expect(model.lastSamples.get("/cmd_vel")?.seq).toBe(30);
    const rate = model.topicRate("/cmd_vel", t0 + 3000);
    expect(rate).toBeGreaterThan(8);
    expect(rate).toBeLessThanOrEqual(10.5);
  });

  it("records process exits", () => {
    const model = new ConsoleGraphModel();
    model.apply({ event: "process-exited", node: "move_base", returncode: 0 });
    expect(model.exits).toEqual([{ node: "move_base", returncode: 0 }]);
  });

  it("notifies change listeners exactly on applied events", () => {
    const model = new ConsoleGraphModel();
    let calls = 0;
    model.onChange(() => calls++);
    model.apply({ event: "graph-changed", graph: KOBUKI_GRAPH });
    model.apply({ event: "unknown-event" });
    expect(calls).toBe(1);
  });
});

describe("deriveView", () => {
  it("is empty for an empty broker", () => {
    const view = deriveView({ nodes: [], topics: [], aliases: [] });
    expect(view.nodes).toEqual([]);
    expect(view.topics).toEqual([]);
    expect(view.edges).toEqual([]);
  });

  it("classifies wrapper and base from the alias table", () => {
    const view = deriveView(KOBUKI_GRAPH);
    const base = view.nodes.find((n) => n.name === "move_base");
    const wrapper = view.nodes.find((n) => n.name === "experimental_move_base");
    expect(base?.role).toBe("base");
    expect(base?.wrappedBy).toBe("experimental_move_base");
    expect(wrapper?.role).toBe("wrapper");
  });

  it("marks wrap-internal topics and emits alias edges", () => {
    const view = deriveView(KOBUKI_GRAPH);
    const internal = view.topics.find((t) => t.name.startsWith("/__wrap/"));
    expect(internal?.internal).toBe(true);
    expect(view.edges).toContainEqual({
      from: "topic:/cmd_vel",
      to: "topic:/__wrap/experimental_move_base/cmd_vel",
      kind: "alias",
    });
  });

  it("emits pub and sub edges matching the topic lists", () => {
    const view = deriveView(KOBUKI_GRAPH);
    expect(view.edges).toContainEqual({
      from: "node:move_base",
      to: "topic:/__wrap/experimental_move_base/cmd_vel",
      kind: "pub",
    });
    expect(view.edges).toContainEqual({
      from: "topic:/cmd_vel",
      to: "node:experimental_move_base",
      kind: "sub",
    });
  });
});
