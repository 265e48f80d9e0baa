/**
 * Panel state and the fold that drives it.
 *
 * A panel is a pure value: every inbound server message maps the current
 * state to the next one, so replaying a captured stream reconstructs the
 * exact panel a live run showed. No dialogue text is ever minted here;
 * the only strings a panel displays arrived inside a server payload.
 */

import type { Bubble, DeviceKind, DisplayDirective, ServerMessage } from "./protocol.js";
import { asAssistantSay, asDisplayDirective, asError } from "./protocol.js";

export type ConnectionStatus = "Connecting" | "Live" | "Lost";

export interface PanelState {
  readonly device_id: string;
  readonly kind: DeviceKind;
  /** Whole transcript on a stationary panel; at most one pair on a wearable. */
  readonly bubbles: readonly Bubble[];
  readonly ptt_active: boolean;
  readonly watch_icon_shown: boolean;
  readonly connection: ConnectionStatus;
  readonly session_id: string | null;
  readonly voice_id: string | null;
  /** True between a released utterance and its reply; the button stays disabled. */
  readonly awaiting_reply: boolean;
  readonly toast: string | null;
  readonly last_seq: number | null;
}

export function initialPanel(deviceId: string, kind: DeviceKind): PanelState {
  return {
    device_id: deviceId,
    kind,
    bubbles: [],
    ptt_active: false,
    watch_icon_shown: false,
    connection: "Connecting",
    session_id: null,
    voice_id: null,
    awaiting_reply: false,
    toast: null,
    last_seq: null,
  };
}

/**
 * Apply one display directive addressed to `deviceId`.
 *
 * A directive for another device is a routing mistake, not a crash: the
 * state is returned unchanged and the mismatch goes to the console.
 */
export function applyDisplayUpdate(
  state: PanelState,
  deviceId: string | null,
  directive: DisplayDirective,
): PanelState {
  if (deviceId !== state.device_id) {
    console.warn(
      `panel ${state.device_id}: ignoring ${directive.directive} addressed to ${String(deviceId)}`,
    );
    return state;
  }
  switch (directive.directive) {
    case "append_bubble":
      return { ...state, bubbles: [...state.bubbles, ...directive.bubbles] };
    case "show_transcript":
      return { ...state, bubbles: [...directive.bubbles] };
    case "show_last_turn": {
      const pair: Bubble[] = [];
      if (directive.user_text !== null) {
        pair.push({ speaker: "User", text: directive.user_text });
      }
      pair.push({ speaker: "Assistant", text: directive.assistant_text });
      return { ...state, bubbles: pair };
    }
    case "show_watch_icon":
      // The chat area is visually replaced by the icon but the transcript
      // is retained behind the history toggle, so bubbles stay put.
      return { ...state, watch_icon_shown: true };
  }
}

/** Fold one inbound envelope into the panel. */
export function applyServerMessage(state: PanelState, msg: ServerMessage): PanelState {
  if (state.last_seq !== null && msg.seq <= state.last_seq) {
    console.warn(
      `panel ${state.device_id}: out-of-order seq ${msg.seq} after ${state.last_seq}, ignored`,
    );
    return state;
  }
  const next = { ...state, last_seq: msg.seq };
  switch (msg.type) {
    case "hello_ack":
      return next;
    case "session_started": {
      const session = msg.payload["session"];
      let voice: string | null = null;
      if (typeof session === "object" && session !== null) {
        const v = (session as Record<string, unknown>)["voice"];
        if (typeof v === "object" && v !== null) {
          const id = (v as Record<string, unknown>)["voice_id"];
          if (typeof id === "string") voice = id;
        }
      }
      // A new session starts from a blank slate: the icon and transcript
      // belong to the previous one.
      return {
        ...next,
        session_id: msg.session_id,
        voice_id: voice,
        bubbles: [],
        watch_icon_shown: false,
        awaiting_reply: false,
        toast: null,
      };
    }
    case "assistant_say": {
      const say = asAssistantSay(msg.payload);
      if (say === null) {
        console.warn(`panel ${state.device_id}: malformed assistant_say`, msg.payload);
        return next;
      }
      return { ...next, awaiting_reply: false, voice_id: say.voice_id };
    }
    case "display_update": {
      const directive = asDisplayDirective(msg.payload);
      if (directive === null) {
        console.warn(`panel ${state.device_id}: malformed display_update`, msg.payload);
        return next;
      }
      return applyDisplayUpdate(next, msg.device_id, directive);
    }
    case "error": {
      const err = asError(msg.payload);
      return { ...next, awaiting_reply: false, toast: `${err.code}: ${err.detail}` };
    }
    case "proximity_ack":
      return next;
    default:
      console.warn(`panel ${state.device_id}: unknown message type ${msg.type}`);
      return next;
  }
}

/** Replay a captured stream from scratch; the last state is the panel. */
export function replay(
  deviceId: string,
  kind: DeviceKind,
  stream: readonly ServerMessage[],
): PanelState {
  let state = initialPanel(deviceId, kind);
  for (const msg of stream) state = applyServerMessage(state, msg);
  return state;
}

// -- local transitions (operator input, not server messages) ----------------

export function connectionChanged(state: PanelState, status: ConnectionStatus): PanelState {
  // A reconnect starts a fresh outbound seq on the server side too.
  return status === "Live"
    ? { ...state, connection: status, last_seq: null, toast: null }
    : { ...state, connection: status, ptt_active: false };
}

export function pttPressed(state: PanelState): PanelState {
  if (state.connection !== "Live" || state.awaiting_reply || state.watch_icon_shown) {
    return state;
  }
  return { ...state, ptt_active: true, toast: null };
}

/**
 * Release the speak button. Returns the next state plus the utterance to
 * send, or null when nothing should go out (empty text, not holding).
 */
export function pttReleased(state: PanelState, typedText: string): [PanelState, string | null] {
  if (!state.ptt_active) return [state, null];
  const text = typedText.trim();
  if (text.length === 0) return [{ ...state, ptt_active: false }, null];
  return [{ ...state, ptt_active: false, awaiting_reply: true }, text];
}

export function sessionReset(state: PanelState, sessionId: string): PanelState {
  return {
    ...state,
    session_id: sessionId,
    bubbles: [],
    watch_icon_shown: false,
    ptt_active: false,
    awaiting_reply: false,
    toast: null,
  };
}

export function clearToast(state: PanelState): PanelState {
  return state.toast === null ? state : { ...state, toast: null };
}
