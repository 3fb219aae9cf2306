/** DOM wiring: start form, answer box, "recalled it" button, and reload
 * recovery. The active session id lives in sessionStorage so refreshing the
 * page reconstructs the transcript from GET /sessions/{id}. */

import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import {
  canAnswer,
  initialState,
  withBusy,
  withError,
  withSession,
  type AppState,
} from "./state.js";

const SESSION_KEY = "recall-router-session-id";

export function setupApp(root: Document, api: ApiClient): void {
  const transcript = root.getElementById("transcript")!;
  const startForm = root.getElementById("start-form") as HTMLFormElement;
  const queryInput = root.getElementById("query-input") as HTMLInputElement;
  const bankInput = root.getElementById("bank-input") as HTMLInputElement;
  const answerForm = root.getElementById("answer-form") as HTMLFormElement;
  const answerInput = root.getElementById("answer-input") as HTMLInputElement;
  const recalledButton = root.getElementById("recalled-button") as HTMLButtonElement;

  let state: AppState = initialState();

  function paint(): void {
    transcript.innerHTML = renderApp(state);
    const active = canAnswer(state);
    answerInput.disabled = !active;
    recalledButton.disabled = !active;
    transcript.scrollTop = transcript.scrollHeight;
  }

  async function mutate(action: () => Promise<void>): Promise<void> {
    state = withBusy(state);
    paint();
    try {
      await action();
    } catch (err) {
      state = withError(state, err instanceof Error ? err.message : String(err));
    }
    paint();
  }

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const query = queryInput.value.trim();
    if (!query) return;
    void mutate(async () => {
      const session = await api.startSession({
        query,
        bank_id: bankInput.value.trim() || undefined,
      });
      window.sessionStorage.setItem(SESSION_KEY, session.session_id);
      state = withSession(state, session);
    });
  });

  answerForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = answerInput.value.trim();
    if (!text || state.session === null) return;
    const sessionId = state.session.session_id;
    answerInput.value = "";
    void mutate(async () => {
      state = withSession(state, await api.answer(sessionId, { text }));
    });
  });

  recalledButton.addEventListener("click", () => {
    if (state.session === null) return;
    const sessionId = state.session.session_id;
    void mutate(async () => {
      state = withSession(state, await api.answer(sessionId, { recalled: true }));
    });
  });

  // Reload recovery: rebuild the transcript for the stored session, if any.
  const saved = window.sessionStorage.getItem(SESSION_KEY);
  if (saved) {
    void mutate(async () => {
      state = withSession(state, await api.getSession(saved));
    });
  } else {
    paint();
  }
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  setupApp(document, new ApiClient(""));
}
