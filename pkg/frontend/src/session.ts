/**
 * Session flow state machine.
 *
 * The flow is strictly forward: instructions -> trials -> a short
 * post-session questionnaire (free-text reasoning for two randomly chosen
 * earlier trials) -> done. Completed trials can never be revisited or
 * resubmitted. The flow renders nothing itself; the view layer observes its
 * state.
 */

import type { StudyApi, SubmitResult } from "./api.js";
import { presentTrial, seededRng, TrialTimer } from "./trial.js";
import type { Clock, PresentedTrial, Rng } from "./trial.js";
import type { ViewportGuard } from "./viewport.js";

export type FlowState =
  | "instructions"
  | "trial"
  | "questionnaire"
  | "done"
  | "rejected";

export type Side = "left" | "right";

export interface CompletedTrial {
  index: number;
  token: string;
  pair: { left: string; right: string };
  choice: string;
  side: Side;
  latencyMs: number;
}

export interface QuestionnairePrompt {
  trialIndex: number;
  pair: { left: string; right: string };
  choice: string;
}

export interface ReasoningEntry extends QuestionnairePrompt {
  text: string;
}

export const QUESTIONNAIRE_PROMPT_COUNT = 2;

export class FlowError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "FlowError";
  }
}

export interface FlowOptions {
  rng?: Rng;
  clock?: Clock;
}

export class SessionFlow {
  private flowState: FlowState = "instructions";
  private sessionId: string | null = null;
  private presentation: PresentedTrial | null = null;
  private readonly timer: TrialTimer;
  private readonly rng: Rng;
  private inFlight = false;
  private readonly history: CompletedTrial[] = [];
  private prompts: QuestionnairePrompt[] = [];
  private readonly answers: ReasoningEntry[] = [];

  constructor(
    private readonly client: StudyApi,
    private readonly guard: ViewportGuard,
    options: FlowOptions = {},
  ) {
    this.rng = options.rng ?? seededRng((Date.now() & 0xffffffff) >>> 0);
    this.timer = new TrialTimer(options.clock);
  }

  get state(): FlowState {
    return this.flowState;
  }

  get id(): string | null {
    return this.sessionId;
  }

  get blocked(): boolean {
    return this.guard.blocked;
  }

  get currentTrial(): PresentedTrial | null {
    return this.presentation;
  }

  get completedTrials(): readonly CompletedTrial[] {
    return this.history;
  }

  get questionnairePrompts(): readonly QuestionnairePrompt[] {
    return this.prompts;
  }

  get reasoning(): readonly ReasoningEntry[] {
    return this.answers;
  }

  /** Leave the instructions screen and start the session. */
  async begin(raterId: string): Promise<void> {
    if (this.flowState !== "instructions") {
      throw new FlowError(`cannot begin from state ${this.flowState}`);
    }
    if (this.guard.blocked) {
      throw new FlowError("viewport is below the study minimum");
    }
    const info = await this.client.createSession(raterId, this.guard.size);
    this.sessionId = info.session_id;
    this.flowState = "trial";
    await this.advance();
  }

  /** The view calls this once both stimulus images have rendered. */
  markImagesLoaded(): void {
    if (this.flowState === "trial" && this.presentation !== null) {
      this.timer.markImagesLoaded();
    }
  }

  /**
   * Record the viewer's choice for the current trial. Refused while the
   * viewport is blocked, before both images have loaded, or while a previous
   * submission is still in flight.
   */
  async choose(side: Side): Promise<void> {
    if (this.flowState !== "trial" || this.presentation === null) {
      throw new FlowError(`no trial to answer in state ${this.flowState}`);
    }
    if (this.guard.blocked) {
      throw new FlowError("viewport is below the study minimum");
    }
    if (this.inFlight) {
      throw new FlowError("a submission is already in flight");
    }
    const latency = this.timer.elapsedMs();
    if (latency === null) {
      throw new FlowError("stimuli have not finished loading");
    }
    const trial = this.presentation;
    const choice = trial[side].image_id;
    this.inFlight = true;
    let result: SubmitResult;
    try {
      result = await this.client.submitResponse(this.requireSession(), {
        token: trial.token,
        choice,
        latency,
      });
    } finally {
      this.inFlight = false;
    }
    this.history.push({
      index: trial.index,
      token: trial.token,
      pair: { left: trial.left.image_id, right: trial.right.image_id },
      choice,
      side,
      latencyMs: latency,
    });
    this.presentation = null;
    if (result.session_status === "rejected") {
      this.flowState = "rejected";
      return;
    }
    await this.advance();
  }

  /** Answer the next questionnaire prompt with free-text reasoning. */
  submitReasoning(text: string): void {
    if (this.flowState !== "questionnaire") {
      throw new FlowError(`no questionnaire in state ${this.flowState}`);
    }
    const trimmed = text.trim();
    if (!trimmed) {
      throw new FlowError("reasoning text must not be empty");
    }
    const prompt = this.prompts[this.answers.length];
    if (prompt === undefined) {
      throw new FlowError("all prompts are already answered");
    }
    this.answers.push({ ...prompt, text: trimmed });
    if (this.answers.length === this.prompts.length) {
      this.flowState = "done";
    }
  }

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new FlowError("no session");
    }
    return this.sessionId;
  }

  private async advance(): Promise<void> {
    const view = await this.client.nextTrial(this.requireSession());
    if (view.done) {
      if (view.status === "rejected") {
        this.flowState = "rejected";
        return;
      }
      this.enterQuestionnaire();
      return;
    }
    this.timer.reset();
    this.presentation = presentTrial(view, this.rng);
  }

  private enterQuestionnaire(): void {
    this.prompts = this.samplePrompts();
    this.flowState = this.prompts.length > 0 ? "questionnaire" : "done";
  }

  private samplePrompts(): QuestionnairePrompt[] {
    const count = Math.min(QUESTIONNAIRE_PROMPT_COUNT, this.history.length);
    const indices = new Set<number>();
    while (indices.size < count) {
      indices.add(Math.floor(this.rng() * this.history.length));
    }
    return [...indices]
      .sort((a, b) => a - b)
      .map((i) => {
        const trial = this.history[i]!;
        return { trialIndex: trial.index, pair: trial.pair, choice: trial.choice };
      });
  }
}
