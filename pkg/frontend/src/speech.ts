/**
 * Browser speech output, strictly optional.
 *
 * The authoritative voice identity is the server's voice_id badge; this
 * module only adds audible playback via the SpeechSynthesis API when the
 * operator flips the panel's sound toggle. Speech *capture* stays behind
 * a build-time flag and is not wired up: typed text stands in for audio.
 */

export const SPEECH_CAPTURE_ENABLED = false;

/** Placeholder for a microphone capture hook; intentionally inert. */
export function captureSpeech(): Promise<string> {
  return Promise.reject(
    new Error("speech capture is stubbed out; type while holding the button instead"),
  );
}

export function speakIfEnabled(enabled: boolean, text: string, rate: number): void {
  if (!enabled) return;
  const synth = globalThis.speechSynthesis;
  if (synth === undefined) return;
  const utterance = new SpeechSynthesisUtterance(text);
  utterance.rate = Math.min(4, Math.max(0.25, rate));
  synth.speak(utterance);
}
