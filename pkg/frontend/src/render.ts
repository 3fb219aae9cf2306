/** Pure HTML-string rendering; main.ts assigns the result to innerHTML.
 * Keeping render free of DOM reads makes reload reconstruction trivial:
 * the same SessionView always produces the same markup. */

import { pendingTurn, terminalSummary, type AppState } from "./state.js";
import type { SessionView, TurnView } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderBadge(turn: TurnView): string {
  const scenario = escapeHtml(turn.scenario);
  const name = escapeHtml(turn.strategy_name);
  return (
    `<span class="badge badge-${scenario.toLowerCase()}" ` +
    `title="${name}">${scenario}</span>`
  );
}

function renderTurn(turn: TurnView): string {
  const parts = [
    `<div class="turn" data-turn="${turn.turn}">`,
    `<div class="cue">${renderBadge(turn)} ${escapeHtml(turn.cue)}</div>`,
  ];
  if (turn.declared_recalled) {
    parts.push(`<div class="answer recalled">I remember now!</div>`);
  } else if (turn.answer !== null) {
    parts.push(`<div class="answer">${escapeHtml(turn.answer)}</div>`);
  }
  parts.push("</div>");
  return parts.join("");
}

export function renderTranscript(session: SessionView): string {
  const header =
    `<div class="query"><span class="badge badge-query">` +
    `${escapeHtml(session.scenario)}</span> ${escapeHtml(session.query)}</div>`;
  return header + session.turns.map(renderTurn).join("");
}

export function renderStatus(session: SessionView): string {
  const summary = terminalSummary(session);
  if (summary !== null) {
    const cls = session.status === "Success" ? "success" : "failure";
    return `<div class="summary summary-${cls}">${escapeHtml(summary)}</div>`;
  }
  return pendingTurn(session) !== null
    ? `<div class="status">Waiting for your answer…</div>`
    : `<div class="status">Working…</div>`;
}

export function renderApp(state: AppState): string {
  const parts: string[] = [];
  if (state.errorMessage !== null) {
    parts.push(`<div class="error">${escapeHtml(state.errorMessage)}</div>`);
  }
  if (state.session === null) {
    parts.push(`<div class="status">Ask about a memory to begin.</div>`);
    return parts.join("");
  }
  parts.push(renderTranscript(state.session));
  if (state.session.error) {
    parts.push(
      `<div class="error">${escapeHtml(state.session.error)}</div>`,
    );
  }
  parts.push(renderStatus(state.session));
  return parts.join("");
}
