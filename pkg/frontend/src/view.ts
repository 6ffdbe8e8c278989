// Camera-view rendering. Everything drawn comes from a received state
// message; the client keeps no physics of its own. Normalized image
// coordinates in [-1, 1]^2 map onto a square canvas with v pointing down.

import type { ProbeResultMsg, StateMsg, Vec2, ViewPoints } from "./protocol.js";

export const COLOR_CONTROLLED = "#3b82f6"; // blue
export const COLOR_TARGET = "#22c55e"; // green
export const COLOR_LINE_POINT = "#eab308"; // yellow
export const COLOR_TARGET_LINE = "#9ca3af";
export const COLOR_PROBE = "#f472b6";

/** Minimal slice of CanvasRenderingContext2D the renderer needs (stubbed in tests). */
export interface Draw2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
}

/** Map normalized [-1,1]^2 coordinates to pixels; (1,1) is bottom-right. */
export function toPixel(uv: Vec2, size: number): Vec2 {
  return [((uv[0] + 1) / 2) * size, ((uv[1] + 1) / 2) * size];
}

function dot(ctx: Draw2D, uv: Vec2, size: number, color: string, radius = 6): void {
  const [x, y] = toPixel(uv, size);
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(x, y, radius, 0, 2 * Math.PI);
  ctx.fill();
}

function lineThrough(ctx: Draw2D, p: Vec2, q: Vec2, size: number, color: string): void {
  // Extend the segment p-q across the whole [-1,1] square.
  const dx = q[0] - p[0];
  const dy = q[1] - p[1];
  const norm = Math.hypot(dx, dy);
  if (norm < 1e-9) return;
  const span = 4 / norm; // covers the square from any interior point
  const a: Vec2 = [p[0] - dx * span, p[1] - dy * span];
  const b: Vec2 = [p[0] + dx * span, p[1] + dy * span];
  const [x0, y0] = toPixel(a, size);
  const [x1, y1] = toPixel(b, size);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

function arrow(ctx: Draw2D, from: Vec2, delta: Vec2, size: number, scale: number): void {
  const tip: Vec2 = [from[0] + delta[0] * scale, from[1] + delta[1] * scale];
  const [x0, y0] = toPixel(from, size);
  const [x1, y1] = toPixel(tip, size);
  ctx.strokeStyle = COLOR_PROBE;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
}

export interface ViewOptions {
  showProbe: boolean;
  probe?: ProbeResultMsg | null;
  dimmed?: boolean;
  probeScale?: number; // visual magnification of the probe displacements
}

export function renderView(
  ctx: Draw2D,
  size: number,
  side: "left" | "right",
  points: ViewPoints,
  hImg: Vec2,
  opts: ViewOptions,
): void {
  ctx.globalAlpha = 1;
  ctx.clearRect(0, 0, size, size);
  ctx.fillStyle = "#111827";
  ctx.fillRect(0, 0, size, size);
  if (opts.dimmed) ctx.globalAlpha = 0.35;
  lineThrough(ctx, points.b, points.aux, size, COLOR_TARGET_LINE);
  dot(ctx, points.aux, size, COLOR_LINE_POINT, 5);
  dot(ctx, points.b, size, COLOR_TARGET, 6);
  dot(ctx, points.a, size, COLOR_CONTROLLED, 6);
  if (opts.showProbe && opts.probe) {
    const scale = opts.probeScale ?? 8;
    const v1 = side === "left" ? opts.probe.v_l1 : opts.probe.v_r1;
    const v2 = side === "left" ? opts.probe.v_l2 : opts.probe.v_r2;
    arrow(ctx, points.a, v1, size, scale);
    arrow(ctx, points.a, v2, size, scale);
  }
  ctx.globalAlpha = 1;
}

export function renderFrame(
  state: StateMsg,
  left: Draw2D,
  right: Draw2D,
  size: number,
  opts: ViewOptions,
): void {
  renderView(left, size, "left", state.points.left, state.h_img.left, opts);
  renderView(right, size, "right", state.points.right, state.h_img.right, opts);
}
