// Browser entry point: camera -> wire -> service, state -> canvas + game.

import { FrameSender, openCamera } from "./capture.js";
import { TargetGame, targetGameStep } from "./game.js";
import { applyMessage, initialView, setConnection, type SessionView } from "./session.js";
import { renderView } from "./view.js";
import { configCommand, parseServerMessage, resetCommand } from "./wire.js";

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function serviceUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/session`;
}

async function start(): Promise<void> {
  const canvas = byId<HTMLCanvasElement>("stage");
  const banner = byId<HTMLDivElement>("banner");
  const video = document.createElement("video");
  video.muted = true;
  const scratch = document.createElement("canvas");

  let view: SessionView = initialView();
  let game: TargetGame | null = null;
  let mirror = true;

  let stream: MediaStream;
  try {
    stream = await openCamera();
  } catch {
    banner.textContent = "Camera permission denied — the session needs webcam frames.";
    banner.hidden = false;
    return;
  }
  video.srcObject = stream;
  await video.play();

  const socket = new WebSocket(serviceUrl());
  socket.binaryType = "arraybuffer";
  const sender = new FrameSender(socket, mirror);

  socket.onopen = () => {
    view = setConnection(view, "open");
    socket.send(configCommand({ pointer: { mirror_x: false } }));
  };
  socket.onclose = () => {
    view = setConnection(view, "closed");
    banner.textContent = "Connection closed — reload to reconnect.";
    banner.hidden = false;
  };
  socket.onerror = () => {
    view = setConnection(view, "error");
  };
  socket.onmessage = (msg) => {
    if (typeof msg.data !== "string") {
      return;
    }
    const parsed = parseServerMessage(msg.data);
    view = applyMessage(view, parsed);
    if (game && parsed?.type === "state") {
      targetGameStep(game, parsed.state);
    }
  };

  byId<HTMLButtonElement>("reset").onclick = () => {
    socket.send(resetCommand());
    game = null;
  };
  byId<HTMLButtonElement>("game").onclick = () => {
    game = new TargetGame(1280, 720, Date.now() >>> 0);
  };
  const mirrorBox = byId<HTMLInputElement>("mirror");
  mirrorBox.checked = mirror;
  mirrorBox.onchange = () => {
    mirror = mirrorBox.checked;
    sender.setMirror(mirror);
  };

  const loop = (now: number) => {
    sender.maybeSend(video, scratch, now);
    renderView(canvas, video, view, game, mirror);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

start();
