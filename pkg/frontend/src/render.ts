/**
 * DOM layer: build each panel's skeleton once, then repaint the dynamic
 * parts from PanelState after every fold step.
 *
 * All text lands via textContent, and the only strings minted here are
 * interface chrome (button labels, status words); everything inside a
 * chat bubble came from a server payload.
 */

import type { PanelState } from "./panel.js";
import type { DeviceKind } from "./protocol.js";

export interface ViewOptions {
  showHistory: boolean;
  soundEnabled: boolean;
}

export interface PanelDom {
  readonly root: HTMLElement;
  readonly status: HTMLElement;
  readonly voice: HTMLElement;
  readonly screen: HTMLElement;
  readonly input: HTMLInputElement;
  readonly button: HTMLButtonElement;
  readonly toast: HTMLElement;
  readonly soundToggle: HTMLInputElement;
  readonly historyToggle: HTMLInputElement;
  readonly historyWrap: HTMLElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function toggle(labelText: string, className: string): [HTMLElement, HTMLInputElement] {
  const wrap = el("label", `toggle ${className}`);
  const box = document.createElement("input");
  box.type = "checkbox";
  wrap.append(box, document.createTextNode(` ${labelText}`));
  return [wrap, box];
}

export function buildPanelDom(
  host: HTMLElement,
  title: string,
  deviceId: string,
  kind: DeviceKind,
): PanelDom {
  const shape = kind === "Wearable" ? "panel-watch" : "panel-tablet";
  const root = el("section", `panel ${shape}`);

  const header = el("header", "panel-header");
  header.append(
    el("span", "panel-title", title),
    el("span", "panel-device", `${deviceId} · ${kind}`),
  );
  const status = el("span", "status status-connecting", "Connecting");
  const voice = el("span", "voice-badge", "");
  header.append(status, voice);

  const screen = el("div", "screen");
  const toast = el("div", "toast toast-hidden");

  const controls = el("div", "controls");
  const input = document.createElement("input");
  input.type = "text";
  input.className = "ptt-text";
  input.placeholder = "type while holding, then release";
  input.disabled = true;
  const button = document.createElement("button");
  button.className = "ptt-button";
  button.textContent = "Hold to speak";
  controls.append(input, button);

  const footer = el("div", "panel-footer");
  const [soundWrap, soundToggle] = toggle("speak replies aloud", "toggle-sound");
  const [historyWrap, historyToggle] = toggle("history", "toggle-history");
  historyWrap.classList.add("toggle-hidden");
  footer.append(soundWrap, historyWrap);

  root.append(header, screen, toast, controls, footer);
  host.append(root);
  return { root, status, voice, screen, input, button, toast, soundToggle, historyToggle, historyWrap };
}

function paintBubbles(screen: HTMLElement, state: PanelState): void {
  const list = el("div", "bubbles");
  for (const bubble of state.bubbles) {
    const cls = bubble.speaker === "User" ? "bubble bubble-user" : "bubble bubble-assistant";
    list.append(el("div", cls, bubble.text));
  }
  screen.replaceChildren(list);
  screen.scrollTop = screen.scrollHeight;
}

function paintWatchIcon(screen: HTMLElement): void {
  const wrap = el("div", "watch-icon-wrap");
  wrap.append(el("div", "watch-icon", "⌚"), el("div", "watch-icon-caption", "continued on the watch"));
  screen.replaceChildren(wrap);
}

export function renderPanel(dom: PanelDom, state: PanelState, view: ViewOptions): void {
  dom.status.textContent = state.connection;
  dom.status.className = `status status-${state.connection.toLowerCase()}`;

  dom.voice.textContent = state.voice_id === null ? "" : `voice ${state.voice_id}`;

  const iconMode = state.watch_icon_shown && !view.showHistory;
  if (iconMode) {
    paintWatchIcon(dom.screen);
  } else {
    paintBubbles(dom.screen, state);
  }

  dom.historyWrap.classList.toggle("toggle-hidden", !state.watch_icon_shown);
  dom.historyToggle.checked = view.showHistory;

  const inputUsable =
    state.connection === "Live" && !state.awaiting_reply && !state.watch_icon_shown;
  dom.button.disabled = !inputUsable;
  dom.button.classList.toggle("ptt-active", state.ptt_active);
  if (state.watch_icon_shown) {
    dom.button.textContent = "moved to the watch";
  } else if (state.awaiting_reply) {
    dom.button.textContent = "waiting for reply…";
  } else if (state.ptt_active) {
    dom.button.textContent = "Release to send";
  } else if (state.connection !== "Live") {
    dom.button.textContent = "offline";
  } else {
    dom.button.textContent = "Hold to speak";
  }
  dom.input.disabled = !(inputUsable && state.ptt_active);

  if (state.toast === null) {
    dom.toast.classList.add("toast-hidden");
    dom.toast.textContent = "";
  } else {
    dom.toast.classList.remove("toast-hidden");
    dom.toast.textContent = state.toast;
  }
}
