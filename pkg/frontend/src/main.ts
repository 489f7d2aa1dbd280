/**
 * Browser entry point: wires the session flow to a minimal DOM view.
 *
 * Served as a static bundle by the study service; all data flows through
 * the service's HTTP API on the same origin.
 */

import { StudyApiClient } from "./api.js";
import { SessionFlow } from "./session.js";
import { ViewportGuard } from "./viewport.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function currentViewport() {
  return { width: window.innerWidth, height: window.innerHeight };
}

function show(id: string, visible: boolean): void {
  el(id).style.display = visible ? "" : "none";
}

export function boot(): void {
  const client = new StudyApiClient("");
  const guard = new ViewportGuard(currentViewport());
  const flow = new SessionFlow(client, guard);

  const leftImg = el<HTMLImageElement>("left-image");
  const rightImg = el<HTMLImageElement>("right-image");
  const progress = el<HTMLElement>("progress");
  const overlay = el<HTMLElement>("viewport-overlay");
  const promptText = el<HTMLElement>("prompt-text");
  const reasoningInput = el<HTMLTextAreaElement>("reasoning-input");

  function render(): void {
    overlay.style.display = guard.blocked ? "" : "none";
    show("screen-instructions", flow.state === "instructions");
    show("screen-trial", flow.state === "trial");
    show("screen-questionnaire", flow.state === "questionnaire");
    show("screen-done", flow.state === "done");
    show("screen-rejected", flow.state === "rejected");

    const trial = flow.currentTrial;
    if (flow.state === "trial" && trial) {
      progress.textContent = `Trial ${trial.index + 1} of ${trial.total}`;
      let loaded = 0;
      const onLoad = () => {
        loaded += 1;
        if (loaded === 2) {
          flow.markImagesLoaded();
        }
      };
      leftImg.onload = onLoad;
      rightImg.onload = onLoad;
      leftImg.src = client.imageUrl(trial.left.url);
      rightImg.src = client.imageUrl(trial.right.url);
    }
    if (flow.state === "questionnaire") {
      const prompt = flow.questionnairePrompts[flow.reasoning.length];
      if (prompt) {
        promptText.textContent =
          `For trial ${prompt.trialIndex + 1} you picked ` +
          `"${prompt.choice}". In a sentence, why?`;
        reasoningInput.value = "";
      }
    }
  }

  async function choose(side: "left" | "right"): Promise<void> {
    try {
      await flow.choose(side);
    } catch {
      return; // not ready (images loading, blocked, or already in flight)
    }
    render();
  }

  window.addEventListener("resize", () => {
    guard.resize(currentViewport());
    render();
  });

  el("start-button").addEventListener("click", () => {
    const raterId = el<HTMLInputElement>("rater-id").value.trim();
    if (!raterId) {
      return;
    }
    flow
      .begin(raterId)
      .then(render)
      .catch((err) => {
        el("start-error").textContent = String(err);
      });
  });

  el("left-pick").addEventListener("click", () => void choose("left"));
  el("right-pick").addEventListener("click", () => void choose("right"));
  el("reasoning-submit").addEventListener("click", () => {
    try {
      flow.submitReasoning(reasoningInput.value);
    } catch {
      return;
    }
    render();
  });

  render();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
