import { afterEach, beforeEach, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ApiError, ControlClient, WebSocketFactory } from "../src/protocol";
import { MockHub } from "./mockHub";

const nodeFactory: WebSocketFactory = (uri) => new WebSocket(uri) as never;

let hub: MockHub;
let client: ControlClient;

beforeEach(async () => {
  hub = new MockHub();
  await hub.ready();
  client = new ControlClient(nodeFactory);
  await client.connect(hub.uri);
});

afterEach(() => {
  client.disconnect();
  hub.close();
});

describe("ControlClient", () => {
  it("correlates replies by request id", async () => {
    const results = await Promise.all([
      client.request<{ version: number }>("param.set", { name: "a", value: 1 }),
      client.request<{ version: number }>("param.set", { name: "b", value: 2 }),
      client.request<{ version: number }>("param.set", { name: "a", value: 3 }),
    ]);
    expect(results.map((r) => r.version)).toEqual([1, 1, 2]);
  });

  it("rejects with ApiError on server error frames", async () => {
    await expect(client.request("no.such.op")).rejects.toBeInstanceOf(ApiError);
    try {
      await client.request("pipeline.get", { name: "ghost" });
    } catch (err) {
      expect((err as ApiError).payload.name).toBe("UnknownPipeline");
      expect((err as ApiError).payload.code).toBe(43);
    }
  });

  it("dispatches events to listeners", async () => {
    const events: string[] = [];
    client.onEvent((e) => events.push(e.event));
    await client.request("param.set", { name: "speed", value: 4.5 });
    await new Promise((r) => setTimeout(r, 50));
    expect(events).toContain("param-changed");
  });

  it("rejects pending requests and reports status when the server goes away", async () => {
    const statuses: boolean[] = [];
    client.onStatus((connected) => statuses.push(connected));
    const pending = client.request("graph.get");
    hub.close();
    await expect(pending).rejects.toThrow();
    await new Promise((r) => setTimeout(r, 50));
    expect(statuses).toContain(false);
  });

  it("refuses requests while disconnected", async () => {
    client.disconnect();
    await expect(client.request("graph.get")).rejects.toThrow("not connected");
  });
});
