// Session client: owns the view model, serializes requests (inputs during an
// in-flight request are queued, never dropped), and applies server messages.
// Transport is injected so tests can drive it without a real socket.

import {
  ClientMsg,
  ProbeResultMsg,
  ResultMsg,
  ServerMsg,
  StateMsg,
  TallyMsg,
  parseServerMsg,
  resetMsg,
} from "./protocol.js";

export interface Transport {
  send(data: string): void;
}

export interface ViewModel {
  connected: boolean;
  state: StateMsg | null;
  probe: ProbeResultMsg | null;
  tally: TallyMsg;
  lastResult: ResultMsg | null;
  toast: string | null;
  showProbe: boolean;
}

export interface CockpitHooks {
  onChange(vm: ViewModel): void;
}

export class Cockpit {
  vm: ViewModel = {
    connected: false,
    state: null,
    probe: null,
    tally: { v: 1, type: "tally", successes: 0, attempts: 0 },
    lastResult: null,
    toast: null,
    showProbe: false,
  };

  private queue: ClientMsg[] = [];
  private inflight = false;
  private transport: Transport | null = null;

  constructor(private hooks: CockpitHooks) {}

  attach(transport: Transport): void {
    this.transport = transport;
    this.vm.connected = true;
    this.hooks.onChange(this.vm);
  }

  detach(): void {
    this.transport = null;
    this.vm.connected = false;
    this.inflight = false;
    this.queue = [];
    this.hooks.onChange(this.vm);
  }

  /** Queue a message; sends immediately when no request is in flight. */
  dispatch(msg: ClientMsg): void {
    if (!this.transport) return;
    this.queue.push(msg);
    this.pump();
  }

  private pump(): void {
    if (this.inflight || !this.transport) return;
    const next = this.queue.shift();
    if (!next) return;
    this.inflight = true;
    if (next.type === "start") {
      this.vm.probe = null;
      this.vm.lastResult = null;
    }
    this.transport.send(JSON.stringify(next));
  }

  /** Apply one raw server payload to the view model. */
  receive(raw: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMsg(raw);
    } catch (err) {
      this.vm.toast = `bad server message: ${String(err)}`;
      this.hooks.onChange(this.vm);
      return;
    }
    switch (msg.type) {
      case "state":
        this.vm.state = msg;
        this.vm.toast = null;
        // A done-state precedes its result push; keep the request in flight.
        if (!msg.done) this.inflight = false;
        break;
      case "probe_result":
        this.vm.probe = msg;
        this.inflight = false;
        break;
      case "result":
        this.vm.lastResult = msg;
        this.inflight = false;
        // Fetch the updated tally right away.
        this.queue.unshift(resetMsg());
        break;
      case "tally":
        this.vm.tally = msg;
        this.inflight = false;
        break;
      case "error":
        this.vm.toast = `${msg.code}: ${msg.message}`;
        this.inflight = false;
        break;
    }
    this.hooks.onChange(this.vm);
    this.pump();
  }
}
