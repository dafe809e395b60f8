// Wire protocol shared with the session service. All integers little-endian.
// Binary frame message: "FRM1" + u16 width + u16 height + u8 format + payload.

export const FRAME_MAGIC = "FRM1";
export const FORMAT_GRAY8 = 0;

export interface FaceState {
  bte: [number, number];
  left_eye: [number, number];
  right_eye: [number, number];
}

export interface NoseState {
  tip: [number, number];
  confidence: number;
}

export interface PointerState {
  x: number;
  y: number;
  screen_w: number;
  screen_h: number;
}

export interface SessionEvent {
  kind: string;
  frame: number;
  [key: string]: unknown;
}

export interface ServerState {
  v: number;
  frame: number;
  calibrated: boolean;
  locked: boolean;
  fps: number | null;
  face: FaceState | null;
  nose: NoseState | null;
  pointer: PointerState | null;
  events: SessionEvent[];
}

export interface ErrorReply {
  error: string;
  detail?: string;
}

export type ServerMessage =
  | { type: "state"; state: ServerState }
  | { type: "error"; error: ErrorReply }
  | { type: "ack"; ok: string };

export function encodeFrameMessage(gray: Uint8Array, width: number, height: number): ArrayBuffer {
  if (gray.length !== width * height) {
    throw new Error(`payload is ${gray.length} bytes, expected ${width * height}`);
  }
  const buffer = new ArrayBuffer(9 + gray.length);
  const view = new DataView(buffer);
  for (let i = 0; i < 4; i++) {
    view.setUint8(i, FRAME_MAGIC.charCodeAt(i));
  }
  view.setUint16(4, width, true);
  view.setUint16(6, height, true);
  view.setUint8(8, FORMAT_GRAY8);
  new Uint8Array(buffer, 9).set(gray);
  return buffer;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: Record<string, unknown>;
  try {
    data = JSON.parse(raw);
  } catch {
    console.warn("wire: ignoring non-JSON message", raw.slice(0, 80));
    return null;
  }
  if (typeof data !== "object" || data === null) {
    console.warn("wire: ignoring non-object message");
    return null;
  }
  if (typeof data.error === "string") {
    return { type: "error", error: data as unknown as ErrorReply };
  }
  if (typeof data.ok === "string") {
    return { type: "ack", ok: data.ok };
  }
  if (data.v === 1 && typeof data.frame === "number") {
    return { type: "state", state: data as unknown as ServerState };
  }
  console.warn("wire: ignoring message with unknown shape");
  return null;
}

export function resetCommand(): string {
  return JSON.stringify({ cmd: "reset" });
}

export function configCommand(set: Record<string, unknown>): string {
  return JSON.stringify({ cmd: "config", set });
}
