/**
 * Edit actions: each user gesture issues exactly one control-API command and
 * resolves with the server's reply (or rejects with its error). No local
 * state is touched here — the model updates when the server's events arrive.
 */

import { ApiError, ControlClient } from "./protocol";

export interface ActionResult {
  ok: boolean;
  detail: string;
  /** caret-style diagnostic for inline display (pipeline edits) */
  diagnostic?: string;
}

function describeError(err: unknown): ActionResult {
  if (err instanceof ApiError) {
    const result: ActionResult = { ok: false, detail: err.payload.message };
    if (err.payload.name === "ParseError" || err.payload.name === "UnknownStageKind") {
      result.diagnostic = err.payload.message;
    }
    return result;
  }
  return { ok: false, detail: String(err) };
}

export class Actions {
  constructor(private client: ControlClient) {}

  async setParam(name: string, value: number): Promise<ActionResult> {
    try {
      const reply = await this.client.request<{ version: number }>("param.set", { name, value });
      return { ok: true, detail: `${name} = ${value} (version ${reply.version})` };
    } catch (err) {
      return describeError(err);
    }
  }

  async definePipeline(text: string): Promise<ActionResult> {
    try {
      const reply = await this.client.request<{ name: string }>("pipeline.define", { text });
      return { ok: true, detail: `pipeline ${reply.name} updated` };
    } catch (err) {
      return describeError(err);
    }
  }

  async fetchPipeline(name: string): Promise<string> {
    const reply = await this.client.request<{ text: string }>("pipeline.get", { name });
    return reply.text;
  }

  async addEndpoint(node: string, set: "reuse" | "new", direction: "publish" | "subscribe",
                    topic: string, schema: string | null, pipeline?: string): Promise<ActionResult> {
    try {
      const args: Record<string, unknown> = { node, set, direction, topic, schema };
      if (pipeline) args.pipeline = pipeline;
      await this.client.request("node.endpoint.add", args);
      return { ok: true, detail: `${set} ${direction} ${topic}` };
    } catch (err) {
      return describeError(err);
    }
  }

  async removeEndpoint(node: string, set: string, direction: string,
                       topic: string): Promise<ActionResult> {
    try {
      await this.client.request("node.endpoint.remove", { node, set, direction, topic });
      return { ok: true, detail: `removed ${direction} ${topic}` };
    } catch (err) {
      return describeError(err);
    }
  }

  async unwrap(node: string): Promise<ActionResult> {
    try {
      await this.client.request("node.unwrap", { node });
      return { ok: true, detail: `${node} unwrapped` };
    } catch (err) {
      return describeError(err);
    }
  }

  async stopNode(node: string): Promise<ActionResult> {
    try {
      await this.client.request("node.stop", { node });
      return { ok: true, detail: `${node} stopped` };
    } catch (err) {
      return describeError(err);
    }
  }

  async watchTopic(topic: string, rate: number | null = 10): Promise<number> {
    const reply = await this.client.request<{ sub: number }>("topic.subscribe", { topic, rate });
    return reply.sub;
  }

  async unwatchTopic(sub: number): Promise<void> {
    await this.client.request("topic.unsubscribe", { sub });
  }

  /** Pull the current graph (server-sourced; caller feeds it to the model). */
  async refreshGraph(): Promise<import("./model").Graph> {
    const reply = await this.client.request<{ graph: import("./model").Graph }>("graph.get", {});
    return reply.graph;
  }
}
