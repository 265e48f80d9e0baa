/**
 * Lab view: both device emulators side by side, one operator.
 *
 * Each panel owns a socket, a PanelState, and its DOM; a small toolbar
 * owns the session id so the watch can keep talking after the hand-off.
 * The speak button latches: click (or touch) to press, type the
 * utterance, click again or hit Enter to release and send.
 */

import { GatewayClient, gatewayUrl } from "./connection.js";
import {
  applyServerMessage,
  clearToast,
  connectionChanged,
  initialPanel,
  pttPressed,
  pttReleased,
  sessionReset,
  type PanelState,
} from "./panel.js";
import { asAssistantSay, type DeviceKind, type ServerMessage } from "./protocol.js";
import { buildPanelDom, renderPanel, type PanelDom, type ViewOptions } from "./render.js";
import { speakIfEnabled } from "./speech.js";

interface Lab {
  sessionId: string | null;
  announce(text: string): void;
}

class PanelController {
  state: PanelState;
  readonly view: ViewOptions = { showHistory: false, soundEnabled: false };
  readonly client: GatewayClient;
  private readonly dom: PanelDom;

  constructor(
    host: HTMLElement,
    title: string,
    readonly deviceId: string,
    kind: DeviceKind,
    url: string,
    private readonly lab: Lab,
    private readonly onLive: (panel: PanelController) => void,
  ) {
    this.state = initialPanel(deviceId, kind);
    this.dom = buildPanelDom(host, title, deviceId, kind);
    this.client = new GatewayClient(url, deviceId, kind, {
      onStatus: (status) => {
        this.state = connectionChanged(this.state, status);
        this.render();
        if (status === "Live") this.onLive(this);
      },
      onMessage: (msg) => this.handle(msg),
    });
    this.wire();
    this.render();
    this.client.connect();
  }

  private wire(): void {
    this.dom.button.addEventListener("click", () => {
      if (this.state.ptt_active) {
        this.release();
      } else {
        this.state = pttPressed(this.state);
        this.render();
        this.dom.input.focus();
      }
    });
    this.dom.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter" && this.state.ptt_active) {
        event.preventDefault();
        this.release();
      } else if (event.key === "Escape" && this.state.ptt_active) {
        this.state = { ...this.state, ptt_active: false };
        this.render();
      }
    });
    this.dom.soundToggle.addEventListener("change", () => {
      this.view.soundEnabled = this.dom.soundToggle.checked;
    });
    this.dom.historyToggle.addEventListener("change", () => {
      this.view.showHistory = this.dom.historyToggle.checked;
      this.render();
    });
  }

  private release(): void {
    const [next, text] = pttReleased(this.state, this.dom.input.value);
    this.state = next;
    if (text !== null) {
      const session = this.lab.sessionId;
      if (session === null) {
        this.state = { ...this.state, awaiting_reply: false, toast: "no session started yet" };
      } else if (!this.client.sendUtterance(session, text)) {
        this.state = { ...this.state, awaiting_reply: false, toast: "connection is down" };
      } else {
        this.dom.input.value = "";
      }
    }
    this.render();
  }

  private handle(msg: ServerMessage): void {
    this.state = applyServerMessage(this.state, msg);
    if (msg.type === "assistant_say") {
      const say = asAssistantSay(msg.payload);
      if (say !== null) speakIfEnabled(this.view.soundEnabled, say.text, 1.0);
    }
    if (msg.type === "session_started" && msg.session_id !== null) {
      this.lab.announce(`session ${msg.session_id} started on ${this.deviceId}`);
    }
    this.render();
  }

  resetTo(sessionId: string): void {
    this.state = sessionReset(this.state, sessionId);
    this.view.showHistory = false;
    this.render();
  }

  dismissToast(): void {
    this.state = clearToast(this.state);
    this.render();
  }

  private render(): void {
    renderPanel(this.dom, this.state, this.view);
  }
}

function main(): void {
  const host = document.getElementById("lab");
  if (host === null) throw new Error("missing #lab container");
  const url = gatewayUrl(window.location);

  const toolbar = document.createElement("div");
  toolbar.className = "toolbar";
  const newSession = document.createElement("button");
  newSession.className = "new-session";
  newSession.textContent = "New session";
  const banner = document.createElement("span");
  banner.className = "banner";
  toolbar.append(newSession, banner);

  const panels = document.createElement("div");
  panels.className = "panels";
  host.append(toolbar, panels);

  let counter = 0;
  const lab: Lab = {
    sessionId: null,
    announce(text: string) {
      banner.textContent = text;
    },
  };

  let robot: PanelController | null = null;
  let watch: PanelController | null = null;

  const startSession = () => {
    if (robot === null || !robot.client.live) {
      lab.announce("robot is not connected yet");
      return;
    }
    counter += 1;
    const id = `lab-${Date.now().toString(36)}-${counter}`;
    lab.sessionId = id;
    robot.client.startSession(id);
    robot.resetTo(id);
    watch?.resetTo(id);
  };

  const onLive = (panel: PanelController) => {
    // First time the robot comes up, open a session so the walkthrough
    // starts without an extra click.
    if (panel === robot && lab.sessionId === null) startSession();
  };

  robot = new PanelController(panels, "Robot tablet", "robot1", "Stationary", url, lab, onLive);
  watch = new PanelController(panels, "Watch", "watch1", "Wearable", url, lab, onLive);
  newSession.addEventListener("click", startSession);

  document.addEventListener("click", (event) => {
    if (event.target instanceof HTMLElement && event.target.classList.contains("toast")) {
      robot?.dismissToast();
      watch?.dismissToast();
    }
  });
}

main();
