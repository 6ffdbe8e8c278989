// Browser entry point: wires the socket, keyboard, canvases, and panel.
// Configuration via query parameters: ?host=...&port=...&mode=fc&seed=7
//   &sensitivity=0.5&budget=60

import { Cockpit, ViewModel } from "./client.js";
import { InputConfig, keyToMessage } from "./input.js";
import { renderPanel } from "./panel.js";
import { renderFrame, Draw2D } from "./view.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8765";
const mode = (params.get("mode") ?? "fc") as "fc" | "rc";
const seedParam = params.get("seed");
const budget = Number(params.get("budget") ?? "20");

const inputCfg: InputConfig = {
  sensitivity: Number(params.get("sensitivity") ?? "1.0"),
  mode,
  seed: seedParam === null ? undefined : Number(seedParam),
};

const leftCanvas = document.getElementById("left") as HTMLCanvasElement;
const rightCanvas = document.getElementById("right") as HTMLCanvasElement;
const panelEl = document.getElementById("panel") as HTMLPreElement;
const bannerEl = document.getElementById("banner") as HTMLDivElement;
const toastEl = document.getElementById("toast") as HTMLDivElement;
const probeToggle = document.getElementById("show-probe") as HTMLInputElement;
const sensitivityInput = document.getElementById("sensitivity") as HTMLInputElement;
sensitivityInput.value = String(inputCfg.sensitivity);

function canvasSize(): number {
  const size = Math.min(
    Math.floor((window.innerWidth - 60) / 2),
    Math.floor(window.innerHeight - 180),
  );
  return Math.max(200, size);
}

function render(vm: ViewModel): void {
  const size = canvasSize();
  for (const canvas of [leftCanvas, rightCanvas]) {
    canvas.width = size;
    canvas.height = size;
  }
  bannerEl.style.display = vm.connected ? "none" : "block";
  toastEl.textContent = vm.toast ?? "";
  toastEl.style.display = vm.toast ? "block" : "none";
  if (vm.state) {
    const left = leftCanvas.getContext("2d") as unknown as Draw2D;
    const right = rightCanvas.getContext("2d") as unknown as Draw2D;
    renderFrame(vm.state, left, right, size, {
      showProbe: vm.showProbe,
      probe: vm.probe,
      dimmed: !vm.connected,
    });
  }
  panelEl.textContent = renderPanel({
    successes: vm.tally.successes,
    attempts: vm.tally.attempts,
    stepsUsed: vm.state?.step ?? 0,
    stepBudget: budget,
    lastResult: vm.lastResult,
  });
}

const cockpit = new Cockpit({ onChange: render });

function connect(): void {
  const socket = new WebSocket(`ws://${host}:${port}/`);
  socket.onopen = () => cockpit.attach({ send: (data) => socket.send(data) });
  socket.onmessage = (ev) => cockpit.receive(String(ev.data));
  socket.onclose = () => {
    cockpit.detach();
    setTimeout(connect, 1500);
  };
  socket.onerror = () => socket.close();
}

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  inputCfg.sensitivity = Number(sensitivityInput.value) || inputCfg.sensitivity;
  const msg = keyToMessage(ev.key, { hasState: cockpit.vm.state !== null }, inputCfg);
  if (msg) {
    ev.preventDefault();
    cockpit.dispatch(msg);
  }
});

probeToggle.addEventListener("change", () => {
  cockpit.vm.showProbe = probeToggle.checked;
  render(cockpit.vm);
});

window.addEventListener("resize", () => render(cockpit.vm));

connect();
render(cockpit.vm);
