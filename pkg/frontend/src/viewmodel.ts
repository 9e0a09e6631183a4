/**
 * Pure presentation logic: how a live session document turns into buttons,
 * progress text, and dashboard readouts.  Keeping this free of DOM access
 * makes the mapping testable, including the bidirectional axis swap.
 */

import type { LiveDoc } from "./api.js";

export interface ButtonSpec {
  option: string; // what gets POSTed
  label: string; // what the participant reads
  hotkey: string;
}

export interface ButtonLayout {
  /** flex direction of the response button group in the participant view */
  axis: "row" | "column";
  buttons: ButtonSpec[];
}

/**
 * Response buttons for the current trial.
 *
 * Order tasks ask "which side buzzed first", so the buttons mirror the
 * physical tip axis: side by side while the tips are horizontal, stacked
 * after the rig rotates to vertical (block 2 of a bidirectional session).
 * The orientation task always asks horizontal-vs-vertical.
 */
export function buttonLayout(
  task: string,
  orientation: "HORIZONTAL" | "VERTICAL",
  options: string[],
): ButtonLayout {
  if (task === "VT2POD") {
    return {
      axis: "row",
      buttons: [
        { option: options[0], label: "Horizontal line", hotkey: "1" },
        { option: options[1], label: "Vertical line", hotkey: "2" },
      ],
    };
  }
  if (orientation === "HORIZONTAL") {
    return {
      axis: "row",
      buttons: [
        { option: options[0], label: "Left buzzed first", hotkey: "1" },
        { option: options[1], label: "Right buzzed first", hotkey: "2" },
      ],
    };
  }
  // vertical tip axis: first tip sits below the second
  return {
    axis: "column",
    buttons: [
      { option: options[1], label: "Upper buzzed first", hotkey: "2" },
      { option: options[0], label: "Lower buzzed first", hotkey: "1" },
    ],
  };
}

export function progressText(live: LiveDoc): string {
  const trial = Math.min(live.trial_counter + 1, live.total_trials);
  const block =
    live.task === "VT2PD_BIDIRECTIONAL" ? ` (block ${live.block}/2)` : "";
  if (isFinished(live.phase)) {
    return `session ${live.phase.toLowerCase()} after ${live.trial_counter} trials`;
  }
  return `trial ${trial} of ${live.total_trials}${block}`;
}

export function isFinished(phase: string): boolean {
  return phase === "COMPLETE" || phase === "EXCLUDED" || phase === "ABORTED";
}

export function formatEntropy(nats: number): string {
  return `${nats.toFixed(3)} nats`;
}

/** Entropy of the flat starting posterior, read off the live trace. */
export function initialEntropy(live: Pick<LiveDoc, "entropy_trace">): number {
  if (live.entropy_trace.length === 0) {
    throw new Error("live document carries an empty entropy trace");
  }
  return live.entropy_trace[0];
}

export interface DashboardSummary {
  phase: string;
  progress: string;
  entropy: string;
  thresholdEstimateMm: string;
  accuracyPercent: string;
  biasFlags: string[];
}

export function dashboardSummary(live: LiveDoc): DashboardSummary {
  const n = live.trials.length;
  const correct = live.trials.filter((t) => t.correct).length;
  return {
    phase: live.phase,
    progress: progressText(live),
    entropy: formatEntropy(live.entropy),
    thresholdEstimateMm: live.postmean.params_expectation.a.toFixed(1),
    accuracyPercent: n === 0 ? "–" : ((100 * correct) / n).toFixed(0),
    biasFlags: live.bias.flags,
  };
}

/** (x, y) pairs for the posterior-mean sparkline, y clamped to [0, 1]. */
export function curvePoints(live: LiveDoc): Array<[number, number]> {
  const { x_mm, y } = live.postmean.curve_samples;
  return x_mm.map((x, i) => [x, Math.min(1, Math.max(0, y[i]))]);
}
