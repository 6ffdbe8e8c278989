// Wire protocol shared with the play server. The schema is duplicated as a
// checked JSON fixture (fixtures/wire-schema.json) that both test suites pin.

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];

export interface ViewPoints {
  a: Vec2; // controlled point (blue)
  b: Vec2; // target point (green)
  aux: Vec2; // extra point on the target line (yellow)
}

export interface StateMsg {
  v: number;
  type: "state";
  step: number;
  points: { left: ViewPoints; right: ViewPoints };
  h_img: { left: Vec2; right: Vec2 };
  done: boolean;
  status: string;
}

export interface ProbeResultMsg {
  v: number;
  type: "probe_result";
  v_l1: Vec2;
  v_l2: Vec2;
  v_r1: Vec2;
  v_r2: Vec2;
}

export interface ResultMsg {
  v: number;
  type: "result";
  success: boolean;
  steps: number;
}

export interface TallyMsg {
  v: number;
  type: "tally";
  successes: number;
  attempts: number;
}

export interface ErrorMsg {
  v: number;
  type: "error";
  code: "bad_state" | "bad_message";
  message: string;
}

export type ServerMsg = StateMsg | ProbeResultMsg | ResultMsg | TallyMsg | ErrorMsg;

export interface StartMsg {
  v: number;
  type: "start";
  camera_mode: "fc" | "rc";
  seed?: number;
}

export interface ProbeMsg {
  v: number;
  type: "probe";
}

export interface ActionMsg {
  v: number;
  type: "action";
  ax: number;
  ay: number;
}

export interface ResetMsg {
  v: number;
  type: "reset";
}

export type ClientMsg = StartMsg | ProbeMsg | ActionMsg | ResetMsg;

export function startMsg(mode: "fc" | "rc", seed?: number): StartMsg {
  const msg: StartMsg = { v: PROTOCOL_VERSION, type: "start", camera_mode: mode };
  if (seed !== undefined) msg.seed = seed;
  return msg;
}

export function probeMsg(): ProbeMsg {
  return { v: PROTOCOL_VERSION, type: "probe" };
}

export function actionMsg(ax: number, ay: number): ActionMsg {
  return { v: PROTOCOL_VERSION, type: "action", ax, ay };
}

export function resetMsg(): ResetMsg {
  return { v: PROTOCOL_VERSION, type: "reset" };
}

function isVec2(x: unknown): x is Vec2 {
  return Array.isArray(x) && x.length === 2 && x.every((n) => typeof n === "number");
}

function validPoints(p: unknown): p is ViewPoints {
  if (typeof p !== "object" || p === null) return false;
  const q = p as Record<string, unknown>;
  return isVec2(q.a) && isVec2(q.b) && isVec2(q.aux);
}

/** Parse and structurally validate a server message; throws on anything off-schema. */
export function parseServerMsg(raw: string): ServerMsg {
  const msg = JSON.parse(raw) as Record<string, unknown>;
  if (typeof msg !== "object" || msg === null) throw new Error("not an object");
  switch (msg.type) {
    case "state": {
      const points = msg.points as Record<string, unknown>;
      const hImg = msg.h_img as Record<string, unknown>;
      if (
        typeof msg.step !== "number" ||
        typeof msg.done !== "boolean" ||
        typeof msg.status !== "string" ||
        !validPoints(points?.left) ||
        !validPoints(points?.right) ||
        !isVec2(hImg?.left) ||
        !isVec2(hImg?.right)
      ) {
        throw new Error("malformed state message");
      }
      return msg as unknown as StateMsg;
    }
    case "probe_result":
      for (const key of ["v_l1", "v_l2", "v_r1", "v_r2"]) {
        if (!isVec2(msg[key])) throw new Error("malformed probe_result");
      }
      return msg as unknown as ProbeResultMsg;
    case "result":
      if (typeof msg.success !== "boolean" || typeof msg.steps !== "number") {
        throw new Error("malformed result");
      }
      return msg as unknown as ResultMsg;
    case "tally":
      if (typeof msg.successes !== "number" || typeof msg.attempts !== "number") {
        throw new Error("malformed tally");
      }
      return msg as unknown as TallyMsg;
    case "error":
      if (typeof msg.code !== "string" || typeof msg.message !== "string") {
        throw new Error("malformed error");
      }
      return msg as unknown as ErrorMsg;
    default:
      throw new Error(`unknown server message type ${String(msg.type)}`);
  }
}
