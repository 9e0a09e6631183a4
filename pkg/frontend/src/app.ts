/**
 * DOM entry point: a participant view (start form + response buttons) and a
 * live dashboard (entropy trace, posterior-mean curve, trial log).  State
 * updates arrive via the SSE stream with a 500 ms polling fallback.
 */

import { ServiceClient } from "./api.js";
import { ParticipantController } from "./controller.js";
import {
  curvePoints,
  dashboardSummary,
  formatEntropy,
  initialEntropy,
} from "./viewmodel.js";

const POLL_MS = 500;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function drawPolyline(
  canvas: HTMLCanvasElement,
  points: Array<[number, number]>,
  xMax: number,
  yMax: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || points.length === 0) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    const px = (x / xMax) * canvas.width;
    const py = canvas.height - (y / yMax) * canvas.height;
    if (i === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  });
  ctx.strokeStyle = "#2a6fb0";
  ctx.lineWidth = 2;
  ctx.stroke();
}

class ConsoleApp {
  private readonly client = new ServiceClient("..");
  private controller: ParticipantController | null = null;
  private unsubscribe: (() => void) | null = null;
  private pollTimer: number | null = null;

  constructor(private readonly root: HTMLElement) {
    this.renderStartForm();
  }

  private renderStartForm(): void {
    this.root.replaceChildren();
    const form = el("form", { class: "start-form" });
    const tsid = el("input", { placeholder: "participant id (TSID)", required: "" });
    const task = el("select");
    for (const t of ["VT2PD", "VT2POD", "VT2PD_BIDIRECTIONAL"]) {
      task.append(el("option", { value: t }, t));
    }
    const seed = el("input", { type: "number", value: "0" });
    const start = el("button", { type: "submit" }, "start session");
    form.append(tsid, task, seed, start);
    form.addEventListener("submit", async (evt) => {
      evt.preventDefault();
      this.controller = await ParticipantController.create(this.client, {
        tsid: tsid.value || "ANON",
        task: task.value,
        seed: Number(seed.value) || 0,
      });
      this.startUpdates();
      this.render();
    });
    this.root.append(el("h1", {}, "vibropsi console"), form);
  }

  private startUpdates(): void {
    const controller = this.controller;
    if (!controller) {
      return;
    }
    this.unsubscribe = this.client.subscribe(controller.sessionId, () => {
      void controller.refresh().then(() => this.render());
    });
    this.pollTimer = window.setInterval(() => {
      void controller.refresh().then(() => this.render());
    }, POLL_MS);
  }

  private stopUpdates(): void {
    this.unsubscribe?.();
    if (this.pollTimer !== null) {
      window.clearInterval(this.pollTimer);
    }
  }

  private render(): void {
    const controller = this.controller;
    if (!controller) {
      return;
    }
    const live = controller.live;
    const summary = dashboardSummary(live);
    this.root.replaceChildren();

    const participant = el("section", { class: "participant" });
    participant.append(el("h2", {}, summary.progress));
    if (controller.awaitingResponse) {
      const layout = controller.layout();
      const group = el("div", {
        class: `buttons ${layout.axis}`,
        style: `flex-direction: ${layout.axis}`,
      });
      for (const spec of layout.buttons) {
        const button = el("button", { class: "response" },
          `${spec.label} [${spec.hotkey}]`);
        button.addEventListener("click", () => {
          void controller.press(spec.option).then(() => this.render());
        });
        group.append(button);
      }
      participant.append(group);
    } else if (live.phase === "BETWEEN_TRIALS") {
      participant.append(el("p", {}, "preparing next trial…"));
    } else {
      participant.append(el("p", {}, `session ${live.phase.toLowerCase()}`));
      this.stopUpdates();
    }

    const dashboard = el("section", { class: "dashboard" });
    dashboard.append(
      el("h2", {}, "estimation dashboard"),
      el("p", {},
        `entropy ${summary.entropy} (started at ` +
        `${formatEntropy(initialEntropy(live))}) · ` +
        `threshold estimate ${summary.thresholdEstimateMm} mm · ` +
        `accuracy ${summary.accuracyPercent}%`),
    );
    if (summary.biasFlags.length > 0) {
      dashboard.append(
        el("p", { class: "warning" }, `bias flags: ${summary.biasFlags.join(", ")}`));
    }
    const curve = el("canvas", { width: "451", height: "120" });
    drawPolyline(curve, curvePoints(live), 45, 1);
    const trace = el("canvas", { width: "451", height: "120" });
    drawPolyline(
      trace,
      live.entropy_trace.map((h, i) => [i, h] as [number, number]),
      Math.max(1, live.entropy_trace.length - 1),
      Math.max(...live.entropy_trace, 1),
    );
    dashboard.append(
      el("h3", {}, "posterior-mean recognition curve"), curve,
      el("h3", {}, "entropy trace"), trace,
    );

    this.root.append(participant, dashboard);
  }
}

const mount = document.getElementById("app");
if (mount) {
  new ConsoleApp(mount);
}
