/** Session view state machine.
 *
 * The controller never fabricates a pair: everything shown comes from the
 * service, and an answer is only ever submitted for the pair the service
 * issued. Conflicts (stale pair, double submit) resolve by refetching the
 * pending query; network failures queue a retry of the same answer, which
 * the server's single-pending-query contract makes safe to repeat.
 */

import { ApiError, RankEntry, SessionClient } from "./api.js";

export type Phase = "loading" | "pair" | "submitting" | "retrying" | "exhausted" | "error";

export interface ViewState {
  phase: Phase;
  step: number | null;
  pair: [number, number] | null;
  payloads: [string, string] | null;
  answered: number;
  ranking: RankEntry[] | null;
  error: string | null;
}

export type Side = "left" | "right";

const RETRY_DELAY_MS = 500;
const MAX_RETRIES = 20;

export class SessionController {
  state: ViewState = {
    phase: "loading",
    step: null,
    pair: null,
    payloads: null,
    answered: 0,
    ranking: null,
    error: null,
  };

  private listeners: Array<(state: ViewState) => void> = [];

  constructor(
    readonly client: SessionClient,
    readonly sessionId: string,
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  /** Fetch the pending pair (idempotent server-side); returns the new phase. */
  async refresh(): Promise<Phase> {
    this.update({ phase: "loading", error: null });
    const next = await this.client.nextPair(this.sessionId);
    if (next.status === "exhausted") {
      await this.refreshRanking();
      this.update({ phase: "exhausted", pair: null, payloads: null, step: null });
      return "exhausted";
    }
    this.update({
      phase: "pair",
      pair: next.pair,
      payloads: next.payloads,
      step: next.step,
      answered: next.step !== null ? next.step - 1 : this.state.answered,
    });
    return "pair";
  }

  async refreshRanking(): Promise<void> {
    const ranking = await this.client.ranking(this.sessionId);
    this.update({ ranking: ranking.items });
  }

  /** Submit the visible pair; left means the first item was preferred. */
  async choose(side: Side): Promise<void> {
    if (this.state.phase !== "pair" || this.state.pair === null) {
      return;
    }
    const [i, j] = this.state.pair;
    const choice: 0 | 1 = side === "left" ? 1 : 0;
    this.update({ phase: "submitting" });
    let attempt = 0;
    for (;;) {
      try {
        const answer = await this.client.submitAnswer(this.sessionId, i, j, choice);
        this.update({ answered: answer.step, ranking: answer.ranking_preview ?? this.state.ranking });
        break;
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          // someone (or a duplicate of us) already answered; adopt server state
          break;
        }
        if (error instanceof ApiError) {
          this.update({ phase: "error", error: error.message });
          return;
        }
        attempt += 1; // network failure: retry the same answer, never a new one
        if (attempt > MAX_RETRIES) {
          this.update({ phase: "error", error: "network unreachable" });
          return;
        }
        this.update({ phase: "retrying" });
        await this.sleep(RETRY_DELAY_MS);
      }
    }
    const phase = await this.refresh();
    if (phase !== "exhausted") {
      await this.refreshRanking();
    }
  }
}
