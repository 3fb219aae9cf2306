/** Client-side session state: a SessionView plus transient UI flags.
 *
 * The server owns all recall logic; this module only tracks what the client
 * has seen and derives display facts (pending cue, terminal summary) from it.
 */

import type { SessionView, TurnView } from "./types.js";

export interface AppState {
  session: SessionView | null;
  /** True while a request is in flight; input is disabled. */
  busy: boolean;
  /** Last client-side or HTTP error, shown inline. */
  errorMessage: string | null;
}

export function initialState(): AppState {
  return { session: null, busy: false, errorMessage: null };
}

export function withSession(_state: AppState, session: SessionView): AppState {
  return { session, busy: false, errorMessage: null };
}

export function withBusy(state: AppState): AppState {
  return { ...state, busy: true, errorMessage: null };
}

export function withError(state: AppState, message: string): AppState {
  return { ...state, busy: false, errorMessage: message };
}

/** The cue currently awaiting an answer, if any. */
export function pendingTurn(session: SessionView): TurnView | null {
  if (session.status !== "Active" || session.turns.length === 0) return null;
  const last = session.turns[session.turns.length - 1];
  return last.answer === null ? last : null;
}

/** True when the user can still type an answer or declare recall. */
export function canAnswer(state: AppState): boolean {
  return (
    !state.busy &&
    state.session !== null &&
    state.session.status === "Active"
  );
}

/** One-line wrap-up shown when the session ends. */
export function terminalSummary(session: SessionView): string | null {
  if (session.status === "Success") {
    const declared = session.turns.some((t) => t.declared_recalled);
    return declared
      ? `Recalled after ${session.turn_count} cue${session.turn_count === 1 ? "" : "s"}.`
      : `Recall succeeded on turn ${session.turn_count}.`;
  }
  if (session.status === "Failure") {
    return `No recall after ${session.turn_count} cues — session closed.`;
  }
  return null;
}
