import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { GatewayClient, gatewayUrl } from "../src/connection.js";
import type { ServerMessage } from "../src/protocol.js";

/** Hand-cranked WebSocket: the test script opens, feeds, and closes it. */
class FakeWebSocket {
  static instances: FakeWebSocket[] = [];
  static OPEN = 1;
  static CLOSED = 3;

  readyState = 0;
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(readonly url: string) {
    FakeWebSocket.instances.push(this);
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.scriptClose();
  }

  scriptOpen(): void {
    this.readyState = FakeWebSocket.OPEN;
    this.onopen?.();
  }

  scriptMessage(data: unknown): void {
    this.onmessage?.({ data });
  }

  scriptClose(): void {
    if (this.readyState === FakeWebSocket.CLOSED) return;
    this.readyState = FakeWebSocket.CLOSED;
    this.onclose?.();
  }
}

const latest = () => FakeWebSocket.instances.at(-1)!;

let statuses: string[];
let inbox: ServerMessage[];
let client: GatewayClient;

beforeEach(() => {
  vi.useFakeTimers();
  vi.stubGlobal("WebSocket", FakeWebSocket);
  FakeWebSocket.instances = [];
  statuses = [];
  inbox = [];
  client = new GatewayClient("ws://test/ws", "robot1", "Stationary", {
    onStatus: (s) => statuses.push(s),
    onMessage: (m) => inbox.push(m),
  });
});

afterEach(() => {
  client.close();
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe("GatewayClient", () => {
  it("introduces itself as soon as the socket opens", () => {
    client.connect();
    expect(statuses).toEqual(["Connecting"]);
    latest().scriptOpen();
    expect(statuses).toEqual(["Connecting", "Live"]);
    const hello = JSON.parse(latest().sent[0]!);
    expect(hello).toEqual({
      type: "hello",
      session_id: null,
      device_id: "robot1",
      seq: 1,
      payload: { kind: "Stationary" },
    });
  });

  it("numbers outbound messages strictly increasing", () => {
    client.connect();
    latest().scriptOpen();
    client.startSession("lab-1");
    client.sendUtterance("lab-1", "where is the cafe");
    const seqs = latest().sent.map((raw) => JSON.parse(raw).seq);
    expect(seqs).toEqual([1, 2, 3]);
    const ptt = JSON.parse(latest().sent[2]!);
    expect(ptt.payload).toEqual({ text: "where is the cafe", lang: "en" });
    expect(ptt.session_id).toBe("lab-1");
  });

  it("hands parsed frames to the panel and drops junk", () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    client.connect();
    latest().scriptOpen();
    latest().scriptMessage(
      JSON.stringify({ type: "hello_ack", session_id: null, device_id: "robot1", seq: 1, payload: {} }),
    );
    latest().scriptMessage("{broken");
    latest().scriptMessage(JSON.stringify({ type: "x" }));
    expect(inbox.map((m) => m.type)).toEqual(["hello_ack"]);
    expect(warn).toHaveBeenCalledTimes(2);
    warn.mockRestore();
  });

  it("reports the drop, retries, and restarts the seq counter", () => {
    client.connect();
    latest().scriptOpen();
    client.startSession("lab-1");
    expect(JSON.parse(latest().sent.at(-1)!).seq).toBe(2);

    latest().scriptClose();
    expect(statuses.at(-1)).toBe("Lost");
    expect(client.live).toBe(false);

    vi.advanceTimersByTime(3000);
    expect(FakeWebSocket.instances).toHaveLength(2);
    latest().scriptOpen();
    expect(statuses.at(-1)).toBe("Live");
    const hello = JSON.parse(latest().sent[0]!);
    expect(hello.type).toBe("hello");
    expect(hello.seq).toBe(1);
  });

  it("refuses to send while down instead of throwing", () => {
    client.connect();
    expect(client.sendUtterance("lab-1", "hello")).toBe(false);
    latest().scriptOpen();
    expect(client.sendUtterance("lab-1", "hello")).toBe(true);
  });

  it("stops retrying once closed", () => {
    client.connect();
    latest().scriptOpen();
    latest().scriptClose();
    client.close();
    vi.advanceTimersByTime(10000);
    expect(FakeWebSocket.instances).toHaveLength(1);
  });
});

describe("gatewayUrl", () => {
  const loc = (host: string, search = "", protocol = "http:") =>
    ({ host, search, protocol }) as Location;

  it("targets the page's own host by default", () => {
    expect(gatewayUrl(loc("127.0.0.1:8787"))).toBe("ws://127.0.0.1:8787/ws");
  });

  it("upgrades to wss on https pages", () => {
    expect(gatewayUrl(loc("example.test", "", "https:"))).toBe("wss://example.test/ws");
  });

  it("honors the addr override", () => {
    expect(gatewayUrl(loc("127.0.0.1:9999", "?addr=127.0.0.1:8787"))).toBe(
      "ws://127.0.0.1:8787/ws",
    );
  });
});
