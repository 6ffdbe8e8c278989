import { describe, expect, it } from "vitest";
import { keyToMessage } from "../src/input.js";

const CFG = { sensitivity: 0.5, mode: "fc" as const, seed: 7 };
const RUNNING = { hasState: true };
const FRESH = { hasState: false };

describe("keyToMessage", () => {
  it("maps ArrowRight at sensitivity 0.5 to action {ax: 0.5, ay: 0}", () => {
    expect(keyToMessage("ArrowRight", RUNNING, CFG)).toEqual({
      v: 1,
      type: "action",
      ax: 0.5,
      ay: 0,
    });
  });

  it("maps the full arrow/WASD set to signed axis actions", () => {
    const table: Array<[string, number, number]> = [
      ["ArrowLeft", -0.5, 0],
      ["ArrowUp", 0, 0.5],
      ["ArrowDown", 0, -0.5],
      ["d", 0.5, 0],
      ["a", -0.5, 0],
      ["w", 0, 0.5],
      ["s", 0, -0.5],
    ];
    for (const [key, ax, ay] of table) {
      expect(keyToMessage(key, RUNNING, CFG)).toEqual({ v: 1, type: "action", ax, ay });
    }
  });

  it("sends start with the configured mode and seed on N", () => {
    expect(keyToMessage("n", FRESH, CFG)).toEqual({
      v: 1,
      type: "start",
      camera_mode: "fc",
      seed: 7,
    });
    expect(keyToMessage("N", FRESH, { sensitivity: 1, mode: "rc" })).toEqual({
      v: 1,
      type: "start",
      camera_mode: "rc",
    });
  });

  it("sends probe on P whenever a state exists (server arbitrates timing)", () => {
    expect(keyToMessage("p", RUNNING, CFG)).toEqual({ v: 1, type: "probe" });
    expect(keyToMessage("p", FRESH, CFG)).toBeNull();
  });

  it("ignores movement keys before any state arrives", () => {
    expect(keyToMessage("ArrowRight", FRESH, CFG)).toBeNull();
  });

  it("returns exactly one message for every bound key in a running episode", () => {
    const bound = ["ArrowRight", "ArrowLeft", "ArrowUp", "ArrowDown", "w", "a", "s", "d", "p", "n", "r"];
    for (const key of bound) {
      const msg = keyToMessage(key, RUNNING, CFG);
      expect(msg).not.toBeNull();
      expect(typeof msg!.type).toBe("string");
    }
  });

  it("ignores unbound keys", () => {
    for (const key of ["x", "Escape", "Enter", "1"]) {
      expect(keyToMessage(key, RUNNING, CFG)).toBeNull();
    }
  });

  it("clamps nothing itself: sensitivity defines the magnitude", () => {
    const msg = keyToMessage("ArrowUp", RUNNING, { sensitivity: 0.25, mode: "fc" });
    expect(msg).toEqual({ v: 1, type: "action", ax: 0, ay: 0.25 });
  });
});
