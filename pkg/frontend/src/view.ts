// Canvas rendering of the session view: video underlay, detection overlay,
// virtual cursor, target game, toasts and status badges.

import type { TargetGame } from "./game.js";
import { cursorOnCanvas, type SessionView } from "./session.js";
import { FRAME_HEIGHT, FRAME_WIDTH } from "./gray.js";

export function renderView(
  canvas: HTMLCanvasElement,
  video: HTMLVideoElement | null,
  view: SessionView,
  game: TargetGame | null,
  mirror: boolean,
): void {
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (video && video.readyState >= 2) {
    ctx.save();
    if (mirror) {
      ctx.translate(canvas.width, 0);
      ctx.scale(-1, 1);
    }
    ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
    ctx.restore();
  } else {
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }

  const scaleX = canvas.width / FRAME_WIDTH;
  const scaleY = canvas.height / FRAME_HEIGHT;
  const state = view.state;

  if (state?.face) {
    ctx.strokeStyle = "#29d3ff";
    ctx.lineWidth = 2;
    for (const eye of [state.face.left_eye, state.face.right_eye]) {
      ctx.strokeRect(eye[0] * scaleX - 12, eye[1] * scaleY - 12, 24, 24);
    }
    ctx.strokeStyle = "#ffdc00";
    const [bx, by] = state.face.bte;
    crossAt(ctx, bx * scaleX, by * scaleY, 8);
  }
  if (state?.nose) {
    ctx.strokeStyle = "#ff4040";
    crossAt(ctx, state.nose.tip[0] * scaleX, state.nose.tip[1] * scaleY, 10);
  }

  if (game) {
    ctx.strokeStyle = "#7CFC00";
    ctx.lineWidth = 2;
    const tx = (game.target.x / game.screenW) * canvas.width;
    const ty = (game.target.y / game.screenH) * canvas.height;
    const tr = (game.target.radius / game.screenW) * canvas.width;
    ctx.beginPath();
    ctx.arc(tx, ty, tr, 0, Math.PI * 2);
    ctx.stroke();
    crossAt(ctx, tx, ty, 6);
  }

  const cursor = cursorOnCanvas(view, canvas.width, canvas.height);
  if (cursor) {
    ctx.strokeStyle = "#ee82ee";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(cursor.x, cursor.y, 9, 0, Math.PI * 2);
    ctx.stroke();
    crossAt(ctx, cursor.x, cursor.y, 14);
  }

  ctx.font = "14px system-ui, sans-serif";
  ctx.fillStyle = "#fff";
  const badges: string[] = [view.connection];
  if (state) {
    badges.push(state.calibrated ? "calibrated" : "uncalibrated");
    if (state.fps !== null) {
      badges.push(`${state.fps.toFixed(1)} fps`);
    }
  }
  if (view.reacquiring) {
    badges.push("reacquiring");
  }
  ctx.fillText(badges.join(" · "), 10, 20);
  if (game) {
    ctx.fillText(`hits ${game.hits} · misses ${game.misses}`, 10, 40);
  }
  if (view.lastError) {
    ctx.fillStyle = "#ff6666";
    ctx.fillText(view.lastError, 10, canvas.height - 12);
  }
  view.toasts.slice(-3).forEach((toast, i) => {
    ctx.fillStyle = "#ffd166";
    ctx.fillText(toast.text, canvas.width - 120, 24 + i * 18);
  });
}

function crossAt(ctx: CanvasRenderingContext2D, x: number, y: number, size: number): void {
  ctx.beginPath();
  ctx.moveTo(x - size, y);
  ctx.lineTo(x + size, y);
  ctx.moveTo(x, y - size);
  ctx.lineTo(x, y + size);
  ctx.stroke();
}
