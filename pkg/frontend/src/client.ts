// Session client: one WebSocket, one simulation session.  Reconnecting
// always creates a fresh session; the canvas owner clears on connect.

import {
  CommandFields,
  Frame,
  ServerMessage,
  closeMessage,
  commandMessage,
  createMessage,
  parseServerMessage,
} from "./protocol.js";

export type ConnectionState = "idle" | "connecting" | "connected" | "error" | "closed";

/** The subset of the WebSocket API the client needs; satisfied by the
 * browser WebSocket and by the `ws` package in tests. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface ClientEvents {
  onState?: (state: ConnectionState, detail?: string) => void;
  onFrame?: (frame: Frame) => void;
  onAck?: (appliesAtS?: number) => void;
  onRejected?: (message: string) => void;
  onSessionClosed?: () => void;
}

export class SessionClient {
  private ws: WsLike | null = null;
  private session: string | null = null;
  state: ConnectionState = "idle";

  constructor(
    private readonly wsFactory: WsFactory,
    private readonly events: ClientEvents,
  ) {}

  get sessionId(): string | null {
    return this.session;
  }

  /** Open a connection and create a session with the given config preset. */
  connect(address: string, config: object): void {
    this.disconnect();
    this.setState("connecting");
    let ws: WsLike;
    try {
      ws = this.wsFactory(`ws://${address}`);
    } catch (err) {
      this.setState("error", String(err));
      return;
    }
    this.ws = ws;
    ws.onopen = () => ws.send(createMessage(config));
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onerror = () => this.setState("error", "connection failed");
    ws.onclose = () => {
      if (this.state !== "error") this.setState("closed");
      this.session = null;
    };
  }

  disconnect(): void {
    if (this.ws) {
      const ws = this.ws;
      this.ws = null;
      ws.onopen = ws.onmessage = ws.onerror = ws.onclose = null;
      try {
        if (this.session) ws.send(closeMessage(this.session));
        ws.close();
      } catch {
        // already gone
      }
    }
    this.session = null;
  }

  sendCommand(fields: CommandFields): boolean {
    if (!this.ws || !this.session) return false;
    this.ws.send(commandMessage(this.session, fields));
    return true;
  }

  private handleMessage(text: string): void {
    const msg: ServerMessage | null = parseServerMessage(text);
    if (msg === null) {
      console.warn("dropping malformed message", text.slice(0, 200));
      return;
    }
    switch (msg.type) {
      case "ack":
        if (this.session === null) {
          this.session = msg.session;
          this.setState("connected");
        } else {
          this.events.onAck?.(msg.applies_at_s);
        }
        break;
      case "frame":
        if (msg.session === this.session) this.events.onFrame?.(msg);
        break;
      case "error":
        if (this.session === null) {
          this.setState("error", msg.message);
        } else {
          this.events.onRejected?.(msg.message);
        }
        break;
      case "close":
        if (msg.session === this.session) {
          this.session = null;
          this.events.onSessionClosed?.();
        }
        break;
    }
  }

  private setState(state: ConnectionState, detail?: string): void {
    this.state = state;
    this.events.onState?.(state, detail);
  }
}
