// Keyboard-to-wire-message mapping. Keys act in the robot base frame, not
// image space; discovering the correspondence is the operator's problem,
// exactly as it is for the learning agent.

import { ActionMsg, ClientMsg, actionMsg, probeMsg, resetMsg, startMsg } from "./protocol.js";

export interface InputConfig {
  sensitivity: number; // action magnitude per keypress, in (0, 1]
  mode: "fc" | "rc";
  seed?: number;
}

export interface InputContext {
  hasState: boolean; // a state message has been received this episode
}

const ACTION_KEYS: Record<string, [number, number]> = {
  arrowright: [1, 0],
  arrowleft: [-1, 0],
  arrowup: [0, 1],
  arrowdown: [0, -1],
  d: [1, 0],
  a: [-1, 0],
  w: [0, 1],
  s: [0, -1],
};

/**
 * Translate one keypress into a wire message, or null for unbound keys.
 * Timing violations (probe after step 0, action after done) are the server's
 * call; it answers with an error the UI shows as a toast.
 */
export function keyToMessage(
  key: string,
  ctx: InputContext,
  cfg: InputConfig,
): ClientMsg | null {
  const k = key.toLowerCase();
  if (k === "n") {
    return startMsg(cfg.mode, cfg.seed);
  }
  if (k === "r") {
    return resetMsg();
  }
  if (!ctx.hasState) {
    return null; // nothing to act on yet
  }
  if (k === "p") {
    return probeMsg();
  }
  const dir = ACTION_KEYS[k];
  if (dir) {
    return actionMsg(dir[0] * cfg.sensitivity, dir[1] * cfg.sensitivity) as ActionMsg;
  }
  return null;
}
