// Steering console wiring: connection banner, command panel, live canvas.

import { SessionClient } from "./client.js";
import { Point, fitTransform } from "./geometry.js";
import {
  MAX_SPEED_MM_S,
  MAX_SUPPLY_KPA,
  Mode,
  PanelState,
  ackApplied,
  initialPanel,
  rejected,
  toCommandFields,
  userSet,
} from "./panel.js";
import { Frame, PRESETS } from "./protocol.js";
import { Scene, renderScene, worldBox } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d")!;
const banner = $<HTMLDivElement>("banner");
const toast = $<HTMLDivElement>("toast");
const warningsEl = $<HTMLUListElement>("warnings");
const statusEl = $<HTMLDivElement>("status");

const addrInput = $<HTMLInputElement>("addr");
const presetSelect = $<HTMLSelectElement>("preset");
const connectBtn = $<HTMLButtonElement>("connect");
const leftSlider = $<HTMLInputElement>("supply-left");
const rightSlider = $<HTMLInputElement>("supply-right");
const speedSlider = $<HTMLInputElement>("speed");
const leftLabel = $<HTMLSpanElement>("supply-left-value");
const rightLabel = $<HTMLSpanElement>("supply-right-value");
const speedLabel = $<HTMLSpanElement>("speed-value");
const clearObstaclesBtn = $<HTMLButtonElement>("clear-obstacles");

for (const slider of [leftSlider, rightSlider]) {
  slider.min = "0";
  slider.max = String(MAX_SUPPLY_KPA); // the UI cannot exceed the system maximum
  slider.step = "0.5";
}
speedSlider.min = "0";
speedSlider.max = String(MAX_SPEED_MM_S);
speedSlider.step = "1";

for (const name of Object.keys(PRESETS)) {
  const opt = document.createElement("option");
  opt.value = name;
  opt.textContent = name;
  presetSelect.appendChild(opt);
}

const params = new URLSearchParams(window.location.search);
addrInput.value = params.get("addr") ?? "127.0.0.1:8765";

let panel: PanelState = initialPanel();
let robotLengthMm = 320;
const scene: Scene = { frame: null, obstacles: [], draft: [] };

function refreshPanel(): void {
  leftSlider.value = String(panel.current.supplyLeftKpa);
  rightSlider.value = String(panel.current.supplyRightKpa);
  speedSlider.value = String(panel.current.speedMmS);
  leftLabel.textContent = `${panel.current.supplyLeftKpa.toFixed(1)} kPa`;
  rightLabel.textContent = `${panel.current.supplyRightKpa.toFixed(1)} kPa`;
  speedLabel.textContent = `${panel.current.speedMmS.toFixed(0)} mm/s`;
  for (const mode of ["grow", "hold", "retract"] as Mode[]) {
    $(`mode-${mode}`).classList.toggle("active", panel.current.mode === mode);
  }
}

function redraw(): void {
  renderScene(ctx, scene, canvas.width, canvas.height, robotLengthMm);
}

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  setTimeout(() => toast.classList.remove("visible"), 2500);
}

// debounced command sending: rapid slider moves coalesce into one message
let sendTimer: ReturnType<typeof setTimeout> | null = null;
function queueCommand(): void {
  if (sendTimer !== null) clearTimeout(sendTimer);
  sendTimer = setTimeout(() => {
    sendTimer = null;
    client.sendCommand(toCommandFields(panel.current));
  }, 120);
}

const client = new SessionClient((url) => new WebSocket(url) as never, {
  onState: (state, detail) => {
    banner.className = `banner ${state}`;
    banner.textContent =
      state === "connected"
        ? `connected (session ${client.sessionId?.slice(0, 8)})`
        : state === "connecting"
          ? "connecting..."
          : state === "error"
            ? `connection error: ${detail ?? "unreachable"} - press connect to retry`
            : "disconnected";
  },
  onFrame: (frame: Frame) => {
    scene.frame = frame;
    statusEl.textContent =
      `t=${frame.t_s.toFixed(2)} s  everted=${frame.everted_mm.toFixed(1)} mm  ` +
      `mode=${frame.mode}  L=${frame.supply_left_kpa.toFixed(1)} kPa  ` +
      `R=${frame.supply_right_kpa.toFixed(1)} kPa`;
    warningsEl.replaceChildren(
      ...frame.warnings.map((w) => {
        const li = document.createElement("li");
        li.textContent = w;
        return li;
      }),
    );
    redraw();
  },
  onAck: () => {
    panel = ackApplied(panel);
    refreshPanel();
  },
  onRejected: (message) => {
    panel = rejected(panel);
    refreshPanel();
    showToast(`command rejected: ${message}`);
  },
  onSessionClosed: () => {
    banner.className = "banner closed";
    banner.textContent = "session closed";
  },
});

function edit(values: Parameters<typeof userSet>[1]): void {
  panel = userSet(panel, values);
  refreshPanel();
  queueCommand();
}

leftSlider.oninput = () => edit({ supplyLeftKpa: Number(leftSlider.value) });
rightSlider.oninput = () => edit({ supplyRightKpa: Number(rightSlider.value) });
speedSlider.oninput = () => edit({ speedMmS: Number(speedSlider.value) });
$("mode-grow").onclick = () => edit({ mode: "grow" });
$("mode-hold").onclick = () => edit({ mode: "hold" });
$("mode-retract").onclick = () => edit({ mode: "retract" });

connectBtn.onclick = () => {
  const preset = PRESETS[presetSelect.value] ?? {};
  const geom = (preset as { geometry?: { cells_per_side?: number } }).geometry;
  robotLengthMm = 40 * (geom?.cells_per_side ?? 8);
  panel = initialPanel();
  refreshPanel();
  scene.frame = null; // cleared canvas until the new session's first frame
  redraw();
  client.connect(addrInput.value, preset);
};

// obstacle overlay: click to add vertices, double-click to close the polygon
canvas.onclick = (ev) => {
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const py = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  const t = fitTransform(worldBox(robotLengthMm), canvas.width, canvas.height);
  const world: Point = [(px - t.ox) / t.scale, (t.oy - py) / t.scale];
  scene.draft.push(world);
  redraw();
};

canvas.ondblclick = () => {
  if (scene.draft.length >= 3) scene.obstacles.push([...scene.draft]);
  scene.draft = [];
  redraw();
};

clearObstaclesBtn.onclick = () => {
  scene.obstacles = [];
  scene.draft = [];
  redraw();
};

refreshPanel();
redraw();
