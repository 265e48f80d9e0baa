/**
 * One WebSocket per panel, speaking gateway envelopes.
 *
 * The client owns the outbound seq counter (strictly increasing per
 * connection, reset on reconnect) and the introduction handshake: every
 * time the socket opens it re-sends hello, so a dropped connection heals
 * without operator help. Inbound frames are parsed and handed to the
 * panel layer untouched.
 */

import type { ClientMessage, DeviceKind, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";

export interface GatewayHandlers {
  onStatus(status: "Connecting" | "Live" | "Lost"): void;
  onMessage(msg: ServerMessage): void;
}

const RETRY_MS = 3000;

export class GatewayClient {
  private socket: WebSocket | null = null;
  private seq = 0;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly deviceId: string,
    private readonly kind: DeviceKind,
    private readonly handlers: GatewayHandlers,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.socket = null;
  }

  get live(): boolean {
    return this.socket !== null && this.socket.readyState === WebSocket.OPEN;
  }

  private open(): void {
    this.handlers.onStatus("Connecting");
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.seq = 0;
      this.sendHello();
      this.handlers.onStatus("Live");
    };
    socket.onmessage = (event) => {
      if (typeof event.data !== "string") return;
      const parsed = parseServerMessage(event.data);
      if ("error" in parsed) {
        console.warn(`${this.deviceId}: dropping bad frame (${parsed.error})`);
        return;
      }
      this.handlers.onMessage(parsed);
    };
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.handlers.onStatus("Lost");
      if (!this.closed) {
        this.retryTimer = setTimeout(() => this.open(), RETRY_MS);
      }
    };
    socket.onerror = () => {
      // close always follows; the handler above owns recovery
    };
  }

  private send(type: ClientMessage["type"], sessionId: string | null, payload: Record<string, unknown>): boolean {
    if (!this.live) return false;
    this.seq += 1;
    const envelope: ClientMessage = {
      type,
      session_id: sessionId,
      device_id: this.deviceId,
      seq: this.seq,
      payload,
    };
    this.socket!.send(JSON.stringify(envelope));
    return true;
  }

  sendHello(): boolean {
    return this.send("hello", null, { kind: this.kind });
  }

  startSession(sessionId: string, meta?: Record<string, string>): boolean {
    return this.send("start_session", sessionId, meta ? { meta } : {});
  }

  sendUtterance(sessionId: string, text: string): boolean {
    return this.send("ptt_utterance", sessionId, { text, lang: "en" });
  }
}

/** Socket URL for the page's own host, honoring an ?addr= override. */
export function gatewayUrl(loc: Location): string {
  const params = new URLSearchParams(loc.search);
  const override = params.get("addr");
  const scheme = loc.protocol === "https:" ? "wss" : "ws";
  const host = override !== null && override !== "" ? override : loc.host;
  return `${scheme}://${host}/ws`;
}
