// SessionView: a pure projection of the latest server message plus the
// connection state. Rendering reads this and nothing else.

import type { ServerMessage, ServerState, SessionEvent } from "./wire.js";

export type ConnectionState = "connecting" | "open" | "closed" | "error";

export interface Toast {
  text: string;
  frame: number;
}

export interface SessionView {
  connection: ConnectionState;
  state: ServerState | null;
  lastError: string | null;
  toasts: Toast[];
  reacquiring: boolean;
}

export function initialView(): SessionView {
  return { connection: "connecting", state: null, lastError: null, toasts: [], reacquiring: false };
}

const TOAST_LIMIT = 5;

function toastFor(event: SessionEvent): Toast | null {
  if (event.kind === "click") {
    return { text: `${event.button} click`, frame: event.frame };
  }
  if (event.kind === "blink" && event.voluntary) {
    return { text: `${event.side} blink`, frame: event.frame };
  }
  return null;
}

export function applyMessage(view: SessionView, message: ServerMessage | null): SessionView {
  if (message === null) {
    return view;
  }
  if (message.type === "error") {
    return { ...view, lastError: `${message.error.error}: ${message.error.detail ?? ""}` };
  }
  if (message.type === "ack") {
    return view;
  }
  const state = message.state;
  const toasts = [...view.toasts];
  let reacquiring = view.reacquiring;
  for (const event of state.events) {
    const toast = toastFor(event);
    if (toast) {
      toasts.push(toast);
    }
    if (event.kind === "reinit") {
      reacquiring = true;
    }
  }
  if (state.locked && state.events.every((e) => e.kind !== "reinit")) {
    reacquiring = false;
  }
  return {
    ...view,
    state,
    toasts: toasts.slice(-TOAST_LIMIT),
    reacquiring,
    lastError: null,
  };
}

export function setConnection(view: SessionView, connection: ConnectionState): SessionView {
  return { ...view, connection };
}

/** Cursor in canvas pixels, or null while uncalibrated. */
export function cursorOnCanvas(
  view: SessionView,
  canvasW: number,
  canvasH: number,
): { x: number; y: number } | null {
  const state = view.state;
  if (!state || !state.calibrated || !state.pointer) {
    return null;
  }
  return {
    x: (state.pointer.x / state.pointer.screen_w) * canvasW,
    y: (state.pointer.y / state.pointer.screen_h) * canvasH,
  };
}
