"""Live recall sessions over HTTP: a human replaces the simulated user.

Each session classifies the query, then serves cue queries one turn at a
time, choosing strategies by UCT over live per-strategy statistics. The
action space starts as the classified scenario's three strategies and widens
to all fifteen once each has been tried. Sessions persist in an append-only
JSON Lines event log so the service can restart without losing state.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from recall_router import text as textutil
from recall_router.config import RunConfig
from recall_router.memory_bank import MemoryBank, MemoryFragment
from recall_router.oracles import OracleError, Oracles
from recall_router.reward import Terminal, composite_reward, evaluate_turn, recall_depth
from recall_router.scenario_map import (FiveWScenario, classify, get_strategy,
                                        strategies_for, strategy_pool)

logger = logging.getLogger(__name__)


@dataclass
class SessionTurn:
    turn: int
    strategy_id: str
    cue_text: str
    answer_text: Optional[str] = None
    composite: Optional[float] = None
    declared_recalled: bool = False


@dataclass
class SessionState:
    session_id: str
    bank_id: str
    q_u: str
    scenario: FiveWScenario
    gold_answer: Optional[str]
    status: str = "Active"  # Active | Success | Failure
    turns: list[SessionTurn] = field(default_factory=list)
    stats: dict[str, dict] = field(default_factory=dict)  # sid -> {q_total, visits}
    pending_error: Optional[str] = None

    def to_view(self) -> dict:
        def badge(sid):
            s = get_strategy(sid)
            return {"strategy_id": sid, "strategy_name": s.name, "scenario": s.scenario.value}

        return {
            "session_id": self.session_id,
            "bank_id": self.bank_id,
            "query": self.q_u,
            "scenario": self.scenario.value,
            "status": self.status,
            "turns": [
                {"turn": t.turn, "cue": t.cue_text, **badge(t.strategy_id),
                 "answer": t.answer_text, "composite": t.composite,
                 "declared_recalled": t.declared_recalled}
                for t in self.turns
            ],
            "turn_count": len(self.turns),
            **({"error": self.pending_error} if self.pending_error else {}),
        }

    def snapshot(self) -> dict:
        obj = self.to_view()
        obj["gold_answer"] = self.gold_answer
        obj["stats"] = self.stats
        return obj

    @classmethod
    def from_snapshot(cls, obj: dict) -> "SessionState":
        state = cls(
            session_id=obj["session_id"], bank_id=obj["bank_id"], q_u=obj["query"],
            scenario=FiveWScenario.parse(obj["scenario"]), gold_answer=obj.get("gold_answer"),
            status=obj["status"], stats=obj.get("stats", {}),
        )
        for t in obj["turns"]:
            state.turns.append(SessionTurn(
                turn=t["turn"], strategy_id=t["strategy_id"], cue_text=t["cue"],
                answer_text=t.get("answer"), composite=t.get("composite"),
                declared_recalled=t.get("declared_recalled", False),
            ))
        return state


class SessionService:
    """Holds banks, live sessions, and the append-only event log."""

    def __init__(self, config: RunConfig, banks: dict[str, MemoryBank],
                 event_log_path: Optional[str] = None,
                 oracles: Optional[Oracles] = None):
        self.config = config
        self.banks = dict(banks)
        self.oracles = oracles or Oracles(config.oracle)
        self.sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global_lock = threading.Lock()
        self._event_log = Path(event_log_path) if event_log_path else None
        if self._event_log and self._event_log.exists():
            self._replay_events()

    # -- persistence ----------------------------------------------------------

    def _replay_events(self) -> None:
        for line in self._event_log.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            state = SessionState.from_snapshot(event["session"])
            self.sessions[state.session_id] = state
        logger.info("restored %d sessions from %s", len(self.sessions), self._event_log)

    def _record(self, event_type: str, state: SessionState) -> None:
        if self._event_log is None:
            return
        with self._global_lock:
            with self._event_log.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"type": event_type, "session": state.snapshot()},
                    sort_keys=True, ensure_ascii=False) + "\n")

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._global_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- strategy selection -----------------------------------------------------

    def _candidate_ids(self, state: SessionState) -> list[str]:
        scenario_ids = [s.strategy_id for s in strategies_for(state.scenario)]
        untried = [sid for sid in scenario_ids if state.stats.get(sid, {}).get("visits", 0) == 0]
        if untried:
            return scenario_ids
        return [s.strategy_id for s in strategy_pool()]

    def _select_strategy(self, state: SessionState) -> str:
        candidates = self._candidate_ids(state)
        parent_visits = sum(state.stats.get(sid, {}).get("visits", 0) for sid in candidates)
        c = self.config.search.exploration_c
        best_sid, best_score = None, -math.inf
        for sid in candidates:
            entry = state.stats.get(sid, {"q_total": 0.0, "visits": 0})
            if entry["visits"] == 0:
                score = math.inf
            else:
                score = entry["q_total"] / entry["visits"] + c * math.sqrt(
                    math.log(max(parent_visits, 1)) / entry["visits"])
            if score > best_score:
                best_sid, best_score = sid, score
        return best_sid

    def _issue_cue(self, state: SessionState, bank: MemoryBank) -> None:
        from recall_router.sgr_mcts import DialogueState
        from recall_router.memory_bank import retrieve

        sid = self._select_strategy(state)
        history = tuple(
            (t.strategy_id, t.cue_text, t.answer_text or "") for t in state.turns
            if t.answer_text is not None or t.declared_recalled
        )
        query = " ".join([state.q_u] + [h[2] for h in history])
        dialogue = DialogueState(
            q_u=state.q_u, history=history, turn=len(history),
            retrieved=tuple(retrieve(bank, query, self.config.search.retrieval_j)),
        )
        try:
            cue = self.oracles.generate_cue(dialogue, get_strategy(sid))
        except OracleError as exc:
            state.pending_error = f"cue generation failed (retryable): {exc}"
            return
        state.pending_error = None
        state.turns.append(SessionTurn(turn=len(state.turns) + 1,
                                       strategy_id=sid, cue_text=cue.text))

    # -- public operations ---------------------------------------------------------

    def start(self, q_u: str, bank_id: Optional[str] = None,
              inline_bank: Optional[list[dict]] = None,
              gold_answer: Optional[str] = None) -> SessionState:
        if not q_u or not q_u.strip():
            raise ValueError("query must be non-empty")
        if inline_bank is not None:
            fragments = tuple(
                MemoryFragment(
                    fragment_id=str(obj.get("fragment_id", f"f{i}")),
                    bank_id="inline", text=str(obj["text"]),
                    element_tags=frozenset(obj.get("element_tags", ())),
                    timestamp=obj.get("timestamp"),
                )
                for i, obj in enumerate(inline_bank)
            )
            bank = MemoryBank(bank_id="inline", fragments=fragments)
            self.banks.setdefault("inline", bank)
            bank_id = "inline"
        elif bank_id in self.banks:
            bank = self.banks[bank_id]
        else:
            raise KeyError(f"unknown bank_id {bank_id!r}")

        state = SessionState(
            session_id=uuid.uuid4().hex, bank_id=bank_id, q_u=q_u,
            scenario=classify(q_u), gold_answer=gold_answer,
        )
        self._issue_cue(state, bank)
        self.sessions[state.session_id] = state
        self._record("start", state)
        return state

    def get(self, session_id: str) -> SessionState:
        if session_id not in self.sessions:
            raise KeyError(f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def answer(self, session_id: str, text: Optional[str] = None,
               recalled: bool = False) -> SessionState:
        state = self.get(session_id)
        with self._lock_for(session_id):
            if state.status != "Active":
                raise RuntimeError(f"session {session_id} is already {state.status}")
            if not state.turns or state.turns[-1].answer_text is not None:
                if state.pending_error:
                    # retry the failed cue before accepting an answer
                    self._issue_cue(state, self.banks[state.bank_id])
                    self._record("cue", state)
                    return state
            current = state.turns[-1]
            if recalled:
                current.declared_recalled = True
                current.answer_text = text or ""
                state.status = "Success"
                self._record("terminal", state)
                return state
            if text is None:
                raise ValueError("answer requires text or recalled=true")
            current.answer_text = text

            reward_cfg = self.config.reward
            if state.gold_answer:
                breakdown = evaluate_turn(text, state.gold_answer, current.turn,
                                          reward_cfg, self.oracles)
                current.composite = breakdown.composite
                terminal = breakdown.terminal
            else:
                # No gold answer: accuracy is unknowable, so score focus against
                # the original query plus element richness; success is only ever
                # human-declared.
                r_rf = textutil.jaccard(text, state.q_u)
                r_rd = recall_depth(text, self.oracles)
                current.composite = composite_reward(0.0, r_rf, r_rd, reward_cfg)
                terminal = (Terminal.FAILURE if current.turn >= reward_cfg.max_turns
                            else Terminal.NOT_TERMINAL)

            entry = state.stats.setdefault(current.strategy_id, {"q_total": 0.0, "visits": 0})
            entry["q_total"] += current.composite
            entry["visits"] += 1

            if terminal is Terminal.SUCCESS:
                state.status = "Success"
                self._record("terminal", state)
            elif terminal is Terminal.FAILURE:
                state.status = "Failure"
                self._record("terminal", state)
            else:
                self._issue_cue(state, self.banks[state.bank_id])
                self._record("answer", state)
            return state


# --- HTTP layer -------------------------------------------------------------------


class StartRequest(BaseModel):
    query: str
    bank_id: Optional[str] = None
    inline_bank: Optional[list[dict]] = None
    gold_answer: Optional[str] = None


class AnswerRequest(BaseModel):
    text: Optional[str] = None
    recalled: bool = False


class ClassifyRequest(BaseModel):
    query: str


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="recall-router", version="0.1.0")

    @app.post("/sessions", status_code=201)
    def start_session(req: StartRequest):
        try:
            state = service.start(req.query, bank_id=req.bank_id,
                                  inline_bank=req.inline_bank,
                                  gold_answer=req.gold_answer)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return state.to_view()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return service.get(session_id).to_view()
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/sessions/{session_id}/answer")
    def answer_session(session_id: str, req: AnswerRequest):
        try:
            return service.answer(session_id, text=req.text, recalled=req.recalled).to_view()
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/strategies")
    def list_strategies():
        return [
            {"strategy_id": s.strategy_id, "scenario": s.scenario.value,
             "name": s.name, "description": s.description}
            for s in strategy_pool()
        ]

    @app.post("/classify")
    def classify_query(req: ClassifyRequest):
        try:
            return {"scenario": classify(req.query).value}
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    return app
