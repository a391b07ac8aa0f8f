/**
 * Control-API client: JSON frames over one WebSocket.
 *
 * Requests are {op, args, id} answered by exactly one {id, ok|error} frame;
 * everything else the server sends is an event ({event: ...}). The client
 * never fabricates state: callers render only from replies and events.
 */

export interface ApiErrorPayload {
  code: number;
  name: string;
  message: string;
}

export class ApiError extends Error {
  readonly payload: ApiErrorPayload;
  constructor(op: string, payload: ApiErrorPayload) {
    super(`${op}: ${payload.message}`);
    this.payload = payload;
  }
}

export type EventFrame = {
  event: string;
  [key: string]: unknown;
};

type Pending = {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
  op: string;
};

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type WebSocketFactory = (uri: string) => WebSocketLike;

const defaultFactory: WebSocketFactory = (uri) =>
  new WebSocket(uri) as unknown as WebSocketLike;

export class ControlClient {
  private ws: WebSocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private eventListeners = new Set<(event: EventFrame) => void>();
  private statusListeners = new Set<(connected: boolean) => void>();
  connected = false;

  constructor(private factory: WebSocketFactory = defaultFactory) {}

  connect(uri: string, timeoutMs = 5000): Promise<void> {
    this.disconnect();
    return new Promise((resolve, reject) => {
      const ws = this.factory(uri);
      this.ws = ws;
      const timer = setTimeout(() => {
        ws.close();
        reject(new Error(`timed out connecting to ${uri}`));
      }, timeoutMs);
      ws.onopen = () => {
        clearTimeout(timer);
        this.connected = true;
        this.notifyStatus(true);
        resolve();
      };
      ws.onerror = () => {
        clearTimeout(timer);
        if (!this.connected) reject(new Error(`cannot reach ${uri}`));
      };
      ws.onclose = () => {
        clearTimeout(timer);
        this.connected = false;
        for (const p of this.pending.values()) p.reject(new Error("connection closed"));
        this.pending.clear();
        this.notifyStatus(false);
      };
      ws.onmessage = (ev) => this.onFrame(String(ev.data));
    });
  }

  disconnect(): void {
    if (this.ws) {
      const ws = this.ws;
      this.ws = null;
      ws.close();
    }
    this.connected = false;
  }

  private onFrame(raw: string): void {
    let frame: Record<string, unknown>;
    try {
      frame = JSON.parse(raw) as Record<string, unknown>;
    } catch {
      return; // a frame we cannot parse is not ours to invent meaning for
    }
    if (typeof frame.event === "string") {
      for (const listener of this.eventListeners) listener(frame as EventFrame);
      return;
    }
    const id = frame.id as number;
    const pending = this.pending.get(id);
    if (!pending) return;
    this.pending.delete(id);
    if ("error" in frame) {
      pending.reject(new ApiError(pending.op, frame.error as ApiErrorPayload));
    } else {
      pending.resolve(frame.ok);
    }
  }

  request<T = Record<string, unknown>>(op: string, args: Record<string, unknown> = {}): Promise<T> {
    const ws = this.ws;
    if (!ws || !this.connected) return Promise.reject(new Error("not connected"));
    const id = this.nextId++;
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject, op });
      ws.send(JSON.stringify({ op, args, id }));
    });
  }

  onEvent(listener: (event: EventFrame) => void): () => void {
    this.eventListeners.add(listener);
    return () => this.eventListeners.delete(listener);
  }

  onStatus(listener: (connected: boolean) => void): () => void {
    this.statusListeners.add(listener);
    return () => this.statusListeners.delete(listener);
  }

  private notifyStatus(connected: boolean): void {
    for (const listener of this.statusListeners) listener(connected);
  }
}
