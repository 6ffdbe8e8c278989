import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { Cockpit } from "../src/client.js";
import { keyToMessage } from "../src/input.js";
import { parseServerMsg, type ClientMsg, type StateMsg } from "../src/protocol.js";
import { toPixel } from "../src/view.js";

const transcript = JSON.parse(
  readFileSync(new URL("../fixtures/golden-transcript.json", import.meta.url), "utf8"),
);
const schema = JSON.parse(
  readFileSync(new URL("../fixtures/wire-schema.json", import.meta.url), "utf8"),
);

interface GoldenStep {
  key?: string;
  auto?: string;
  send: Record<string, unknown> | null;
  replies: Array<Record<string, unknown>>;
}

class MockTransport {
  sent: string[] = [];
  send(data: string): void {
    this.sent.push(data);
  }
}

describe("golden transcript replay", () => {
  it("every permitted input yields the exact expected wire message", () => {
    const transport = new MockTransport();
    const cockpit = new Cockpit({ onChange: () => {} });
    cockpit.attach(transport);
    const cfg = {
      sensitivity: transcript.config.sensitivity,
      mode: transcript.config.mode,
      seed: transcript.config.seed,
    };
    let cursor = 0;

    for (const step of transcript.steps as GoldenStep[]) {
      if (step.key !== undefined) {
        const msg = keyToMessage(step.key, { hasState: cockpit.vm.state !== null }, cfg);
        if (step.send === null) {
          expect(msg).toBeNull();
          expect(transport.sent.length).toBe(cursor);
          continue;
        }
        expect(msg).not.toBeNull();
        cockpit.dispatch(msg as ClientMsg);
      }
      // Queued dispatch (or the automatic post-result reset) must have hit the wire.
      expect(transport.sent.length).toBe(cursor + 1);
      expect(JSON.parse(transport.sent[cursor])).toEqual(step.send);
      cursor += 1;
      for (const reply of step.replies) {
        cockpit.receive(JSON.stringify(reply));
      }
    }
    // The session log ends with the tally the server reported.
    const lastTally = (transcript.steps as GoldenStep[])
      .flatMap((s) => s.replies)
      .filter((r) => r.type === "tally")
      .pop();
    expect(cockpit.vm.tally.attempts).toBe(lastTally!.attempts);
    expect(cockpit.vm.tally.successes).toBe(lastTally!.successes);
  });

  it("every state reply renders with corner-mapping invariants intact", () => {
    const size = 400;
    for (const step of transcript.steps as GoldenStep[]) {
      for (const reply of step.replies) {
        if (reply.type !== "state") continue;
        const state = parseServerMsg(JSON.stringify(reply)) as StateMsg;
        for (const side of ["left", "right"] as const) {
          for (const name of ["a", "b", "aux"] as const) {
            const [x, y] = toPixel(state.points[side][name], size);
            expect(x).toBeGreaterThanOrEqual(0);
            expect(x).toBeLessThanOrEqual(size);
            expect(y).toBeGreaterThanOrEqual(0);
            expect(y).toBeLessThanOrEqual(size);
          }
        }
      }
    }
    expect(toPixel([0, 0], size)).toEqual([size / 2, size / 2]);
    expect(toPixel([1, 1], size)).toEqual([size, size]);
  });

  it("server replies conform to the shared wire schema fixture", () => {
    for (const step of transcript.steps as GoldenStep[]) {
      for (const reply of step.replies) {
        const kind = reply.type as string;
        expect(Object.keys(schema)).toContain(kind);
        expect(Object.keys(reply).sort()).toEqual(schema[kind]);
        parseServerMsg(JSON.stringify(reply)); // structural validation
      }
    }
  });

  it("probe misuse surfaces as a bad_state toast, not a crash", () => {
    const transport = new MockTransport();
    const cockpit = new Cockpit({ onChange: () => {} });
    cockpit.attach(transport);
    const errorReply = (transcript.steps as GoldenStep[])
      .flatMap((s) => s.replies)
      .find((r) => r.type === "error");
    expect(errorReply).toBeDefined();
    cockpit.receive(JSON.stringify(errorReply));
    expect(cockpit.vm.toast).toContain("bad_state");
  });
});

describe("parseServerMsg", () => {
  it("rejects unknown types and malformed payloads", () => {
    expect(() => parseServerMsg(JSON.stringify({ type: "telemetry" }))).toThrow();
    expect(() => parseServerMsg(JSON.stringify({ type: "state", step: "x" }))).toThrow();
    expect(() => parseServerMsg("{not json")).toThrow();
  });
});

describe("request queueing", () => {
  it("queues inputs during an in-flight request instead of dropping them", () => {
    const transport = new MockTransport();
    const cockpit = new Cockpit({ onChange: () => {} });
    cockpit.attach(transport);
    cockpit.dispatch({ v: 1, type: "action", ax: 0.5, ay: 0 });
    cockpit.dispatch({ v: 1, type: "action", ax: -0.5, ay: 0 });
    cockpit.dispatch({ v: 1, type: "probe" });
    expect(transport.sent.length).toBe(1); // one in flight, two queued
    const state = (transcript.steps as GoldenStep[])
      .flatMap((s) => s.replies)
      .find((r) => r.type === "state" && r.done === false);
    cockpit.receive(JSON.stringify(state));
    expect(transport.sent.length).toBe(2);
    cockpit.receive(JSON.stringify(state));
    expect(transport.sent.length).toBe(3);
    expect(JSON.parse(transport.sent[2]).type).toBe("probe");
  });
});
