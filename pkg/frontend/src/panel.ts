// Session statistics panel: attempts, successes, rate with a 95% score
// interval, plus the step budget for the running episode. All counts come
// from server tally messages.

export interface PanelData {
  successes: number;
  attempts: number;
  stepsUsed: number;
  stepBudget: number;
  lastResult: { success: boolean; steps: number } | null;
}

const Z95 = 1.959963984540054;

/** 95% Wilson score interval for a success count. */
export function wilson(successes: number, trials: number): [number, number] {
  if (trials < 1) return [0, 1];
  const p = successes / trials;
  const z2 = Z95 * Z95;
  const denom = 1 + z2 / trials;
  const center = (p + z2 / (2 * trials)) / denom;
  const half = (Z95 * Math.sqrt((p * (1 - p)) / trials + z2 / (4 * trials * trials))) / denom;
  // The score bound hits the endpoint exactly at p-hat of 0 or 1.
  const lo = successes === 0 ? 0 : Math.max(0, center - half);
  const hi = successes === trials ? 1 : Math.min(1, center + half);
  return [lo, hi];
}

function pct(x: number): string {
  return `${Math.round(x * 100)}%`;
}

export function renderPanel(data: PanelData): string {
  const lines: string[] = [];
  if (data.attempts === 0) {
    lines.push("success rate: —");
  } else {
    const [lo, hi] = wilson(data.successes, data.attempts);
    lines.push(
      `success rate: ${pct(data.successes / data.attempts)} ` +
        `(${data.successes}/${data.attempts}, 95% CI ${pct(lo)}–${pct(hi)})`,
    );
  }
  lines.push(`steps: ${data.stepsUsed}/${data.stepBudget}`);
  if (data.lastResult) {
    lines.push(
      data.lastResult.success
        ? `last episode: success in ${data.lastResult.steps} steps`
        : `last episode: failed after ${data.lastResult.steps} steps`,
    );
  }
  return lines.join("\n");
}
