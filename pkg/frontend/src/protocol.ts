/**
 * Wire envelope types for the gateway socket, plus a defensive parser.
 *
 * Every message in either direction is one JSON object with the same five
 * fields; the payload shape depends on the type. The parser only narrows
 * what the panels consume — unknown outbound types are kept as-is so the
 * UI can log them instead of crashing.
 */

export type DeviceKind = "Stationary" | "Wearable";
export type SpeakerName = "User" | "Assistant";

export interface Bubble {
  readonly speaker: SpeakerName;
  readonly text: string;
}

export type DisplayDirective =
  | { readonly directive: "append_bubble"; readonly bubbles: readonly Bubble[] }
  | { readonly directive: "show_transcript"; readonly bubbles: readonly Bubble[] }
  | {
      readonly directive: "show_last_turn";
      readonly user_text: string | null;
      readonly assistant_text: string;
    }
  | { readonly directive: "show_watch_icon" };

export interface AssistantSayPayload {
  readonly text: string;
  readonly voice_id: string;
  readonly audio_ref: string;
  readonly duration_ms: number;
  readonly in_reply_to: number | null;
}

export interface ErrorPayload {
  readonly code: string;
  readonly detail: string;
  readonly in_reply_to: number | null;
}

export interface ServerMessage {
  readonly type: string;
  readonly session_id: string | null;
  readonly device_id: string | null;
  readonly seq: number;
  readonly payload: Record<string, unknown>;
}

export interface ClientMessage {
  readonly type: "hello" | "start_session" | "ptt_utterance" | "proximity_event";
  readonly session_id: string | null;
  readonly device_id: string;
  readonly seq: number;
  readonly payload: Record<string, unknown>;
}

const isRecord = (v: unknown): v is Record<string, unknown> =>
  typeof v === "object" && v !== null && !Array.isArray(v);

/** Parse one raw socket frame into an envelope, or explain why not. */
export function parseServerMessage(raw: string): ServerMessage | { error: string } {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return { error: "frame is not valid JSON" };
  }
  if (!isRecord(data)) return { error: "frame is not a JSON object" };
  const { type, session_id, device_id, seq, payload } = data;
  if (typeof type !== "string" || type.length === 0) {
    return { error: "missing type" };
  }
  if (typeof seq !== "number" || !Number.isInteger(seq)) {
    return { error: "missing integer seq" };
  }
  if (session_id !== null && typeof session_id !== "string") {
    return { error: "session_id must be null or a string" };
  }
  if (device_id !== null && typeof device_id !== "string") {
    return { error: "device_id must be null or a string" };
  }
  if (!isRecord(payload)) return { error: "payload must be an object" };
  return { type, session_id, device_id, seq, payload };
}

function asBubbles(value: unknown): readonly Bubble[] | null {
  if (!Array.isArray(value)) return null;
  const out: Bubble[] = [];
  for (const item of value) {
    if (!isRecord(item)) return null;
    const { speaker, text } = item;
    if ((speaker !== "User" && speaker !== "Assistant") || typeof text !== "string") {
      return null;
    }
    out.push({ speaker, text });
  }
  return out;
}

/** Narrow a display_update payload; null means it was malformed. */
export function asDisplayDirective(payload: Record<string, unknown>): DisplayDirective | null {
  switch (payload["directive"]) {
    case "append_bubble":
    case "show_transcript": {
      const bubbles = asBubbles(payload["bubbles"]);
      if (bubbles === null) return null;
      return payload["directive"] === "append_bubble"
        ? { directive: "append_bubble", bubbles }
        : { directive: "show_transcript", bubbles };
    }
    case "show_last_turn": {
      const user = payload["user_text"];
      const assistant = payload["assistant_text"];
      if (user !== null && typeof user !== "string") return null;
      if (typeof assistant !== "string") return null;
      return { directive: "show_last_turn", user_text: user ?? null, assistant_text: assistant };
    }
    case "show_watch_icon":
      return { directive: "show_watch_icon" };
    default:
      return null;
  }
}

export function asAssistantSay(payload: Record<string, unknown>): AssistantSayPayload | null {
  const { text, voice_id, audio_ref, duration_ms, in_reply_to } = payload;
  if (typeof text !== "string" || typeof voice_id !== "string") return null;
  return {
    text,
    voice_id,
    audio_ref: typeof audio_ref === "string" ? audio_ref : "",
    duration_ms: typeof duration_ms === "number" ? duration_ms : 0,
    in_reply_to: typeof in_reply_to === "number" ? in_reply_to : null,
  };
}

export function asError(payload: Record<string, unknown>): ErrorPayload {
  const { code, detail, in_reply_to } = payload;
  return {
    code: typeof code === "string" ? code : "unknown",
    detail: typeof detail === "string" ? detail : "",
    in_reply_to: typeof in_reply_to === "number" ? in_reply_to : null,
  };
}
