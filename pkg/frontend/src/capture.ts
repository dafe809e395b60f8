// Webcam capture: downscale to the wire frame size, grayscale, rate-limit.
// Frames are dropped, never queued, when the socket is back-pressured.

import { FRAME_HEIGHT, FRAME_WIDTH, rgbaToGray } from "./gray.js";
import { encodeFrameMessage } from "./wire.js";

export const MAX_SEND_FPS = 30;
const BACKPRESSURE_BYTES = 2 * (FRAME_WIDTH * FRAME_HEIGHT + 9);

export interface CaptureStats {
  sent: number;
  dropped: number;
}

export class FrameSender {
  readonly stats: CaptureStats = { sent: 0, dropped: 0 };
  private lastSent = -Infinity;

  constructor(private socket: WebSocket, private mirror: boolean = true) {}

  setMirror(mirror: boolean): void {
    this.mirror = mirror;
  }

  /** Send one frame if the rate limit and socket allow it. */
  maybeSend(video: HTMLVideoElement, scratch: HTMLCanvasElement, now: number): boolean {
    if (now - this.lastSent < 1000 / MAX_SEND_FPS) {
      return false;
    }
    if (this.socket.readyState !== WebSocket.OPEN || this.socket.bufferedAmount > BACKPRESSURE_BYTES) {
      this.stats.dropped += 1;
      return false;
    }
    scratch.width = FRAME_WIDTH;
    scratch.height = FRAME_HEIGHT;
    const ctx = scratch.getContext("2d", { willReadFrequently: true })!;
    ctx.save();
    if (this.mirror) {
      ctx.translate(FRAME_WIDTH, 0);
      ctx.scale(-1, 1);
    }
    ctx.drawImage(video, 0, 0, FRAME_WIDTH, FRAME_HEIGHT);
    ctx.restore();
    const rgba = ctx.getImageData(0, 0, FRAME_WIDTH, FRAME_HEIGHT).data;
    const gray = rgbaToGray(rgba, FRAME_WIDTH, FRAME_HEIGHT);
    this.socket.send(encodeFrameMessage(gray, FRAME_WIDTH, FRAME_HEIGHT));
    this.lastSent = now;
    this.stats.sent += 1;
    return true;
  }
}

export async function openCamera(): Promise<MediaStream> {
  return navigator.mediaDevices.getUserMedia({
    video: { width: { ideal: 640 }, height: { ideal: 480 }, frameRate: { ideal: 30 } },
    audio: false,
  });
}
