"""Pluggable model-facing roles used by the search.

Four roles: cue-query generation, simulated user response, semantic
similarity, and memory-element detection. Every role has a deterministic
offline backend (scripted fixtures or rules) so the whole engine runs with
zero network access; remote backends speak a chat-completions-style HTTP
protocol with an embeddings endpoint and a record/replay transcript cache.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import httpx

from recall_router import text as textutil
from recall_router.memory_bank import ELEMENT_NAMES, MemoryBank
from recall_router.scenario_map import RecallStrategy, get_strategy

logger = logging.getLogger(__name__)

ENV_BASE_URL = "RECALL_LLM_BASE_URL"
ENV_API_KEY = "RECALL_LLM_API_KEY"
ENV_MODEL = "RECALL_LLM_MODEL"
ENV_EMBED_MODEL = "RECALL_EMBED_MODEL"


class OracleError(RuntimeError):
    """A backend failed to produce a usable result."""


class FixtureError(OracleError):
    """A scripted backend was asked for a key it does not have."""


@dataclass(frozen=True)
class CueQuery:
    text: str
    strategy_id: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("cue text is empty")
        get_strategy(self.strategy_id)  # raises on unknown id


@dataclass(frozen=True)
class UserResponse:
    text: str
    turn_index: int

    def __post_init__(self):
        if self.turn_index < 0:
            raise ValueError("turn_index must be >= 0")


@dataclass
class OracleConfig:
    cue_backend: str = "rule"            # scripted | rule | remote
    user_backend: str = "rule"           # scripted | rule | remote
    similarity_backend: str = "offline"  # offline | remote
    element_backend: str = "rule"        # rule | remote
    base_url: Optional[str] = None
    api_key: Optional[str] = None
    model: Optional[str] = None
    embed_model: Optional[str] = None
    timeout: float = 30.0
    temperature: float = 0.0
    candidate_count: int = 3
    cache_path: Optional[str] = None
    fixture_path: Optional[str] = None

    def __post_init__(self):
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        self.base_url = self.base_url or os.environ.get(ENV_BASE_URL)
        self.api_key = self.api_key or os.environ.get(ENV_API_KEY)
        self.model = self.model or os.environ.get(ENV_MODEL)
        self.embed_model = self.embed_model or os.environ.get(ENV_EMBED_MODEL)
        remote_roles = [
            k for k, v in (
                ("cue", self.cue_backend), ("user", self.user_backend),
                ("similarity", self.similarity_backend), ("element", self.element_backend),
            ) if v == "remote"
        ]
        if remote_roles and not (self.base_url and self.model):
            raise ValueError(
                f"remote backends {remote_roles} require base_url and model "
                f"(or {ENV_BASE_URL}/{ENV_MODEL})"
            )


class TranscriptCache:
    """JSONL record/replay cache: {request_sha256, role, response_text}.

    Concurrent reads are free; writes are serialized behind a lock.
    """

    def __init__(self, path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self._path.exists():
            for line in self._path.read_text("utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._entries[obj["request_sha256"]] = obj["response_text"]

    @staticmethod
    def key(payload: dict) -> str:
        canon = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Optional[str]:
        return self._entries.get(key)

    def put(self, key: str, role: str, response_text: str) -> None:
        with self._lock:
            self._entries[key] = response_text
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"request_sha256": key, "role": role, "response_text": response_text},
                    ensure_ascii=False) + "\n")


class ChatClient:
    """Minimal chat-completions + embeddings HTTP client."""

    def __init__(self, config: OracleConfig):
        self._config = config
        self._cache = TranscriptCache(config.cache_path) if config.cache_path else None
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(
            base_url=config.base_url or "", headers=headers, timeout=config.timeout
        )

    def complete(self, prompt: str, role: str = "chat", seed: Optional[int] = None) -> str:
        payload = {
            "model": self._config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self._config.temperature,
        }
        if seed is not None:
            payload["seed"] = seed
        key = TranscriptCache.key(payload)
        if self._cache is not None:
            cached = self._cache.get(key)
            if cached is not None:
                return cached
        try:
            resp = self._client.post("/chat/completions", json=payload)
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise OracleError(f"chat completion failed: {exc}") from exc
        if self._cache is not None:
            self._cache.put(key, role, text)
        return text

    def embed(self, text: str) -> list[float]:
        payload = {"model": self._config.embed_model or self._config.model, "input": text}
        key = TranscriptCache.key(payload)
        if self._cache is not None:
            cached = self._cache.get(key)
            if cached is not None:
                return json.loads(cached)
        try:
            resp = self._client.post("/embeddings", json=payload)
            resp.raise_for_status()
            vector = resp.json()["data"][0]["embedding"]
        except Exception as exc:
            raise OracleError(f"embedding request failed: {exc}") from exc
        if self._cache is not None:
            self._cache.put(key, "embed", json.dumps(vector))
        return vector


# --- scripted fixtures ------------------------------------------------------

@dataclass
class ScriptedFixtures:
    """Fixture tables for the scripted backends.

    cues: (query_text, strategy_id, turn) -> cue text
    responses_by_cue: cue text -> user response text
    responses_by_turn: turn index -> user response text (fallback)
    """

    cues: dict[tuple[str, str, int], str] = field(default_factory=dict)
    responses_by_cue: dict[str, str] = field(default_factory=dict)
    responses_by_turn: dict[int, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "ScriptedFixtures":
        obj = json.loads(Path(path).read_text("utf-8"))
        fixtures = cls()
        for entry in obj.get("cues", []):
            fixtures.cues[(entry["query"], entry["strategy"], int(entry["turn"]))] = entry["text"]
        for entry in obj.get("responses", []):
            if "cue" in entry:
                fixtures.responses_by_cue[entry["cue"]] = entry["text"]
            else:
                fixtures.responses_by_turn[int(entry["turn"])] = entry["text"]
        return fixtures


# --- element detection lexicons ----------------------------------------------

_TEMPORAL_WORDS = frozenset("""
monday tuesday wednesday thursday friday saturday sunday
january february march april may june july august september october november december
yesterday today tomorrow tonight morning afternoon evening night noon midnight
usually always daily weekly weekend o'clock
""".split())

_TIME_RE = re.compile(r"\b\d{1,2}:\d{2}\b|\b\d{1,2}\s?(?:am|pm)\b")

_LOCATION_WORDS = frozenset("""
park clinic office home house kitchen garage school hospital store shop market
restaurant cafe station airport beach farm library gym garden bedroom bathroom
street downtown upstairs outside room hotel city village
""".split())

_PERSON_WORDS = frozenset("""
dr mr mrs ms prof professor doctor nurse friend mother father mom dad sister
brother aunt uncle cousin coworker colleague teacher neighbor wife husband son
daughter boss grandma grandpa grandmother grandfather
""".split())

_EVENT_WORDS = frozenset("""
went visited bought attended traveled played cooked watched walked drove flew
celebrated hosted joined moved painted cleaned lost dropped broke forgot
party meeting wedding trip concert dinner lunch festival picnic game
""".split())

_DECISION_WORDS = frozenset("""
because decided decide chose choose reason therefore preferred opted
""".split())

_LEXICONS = {
    "Event": _EVENT_WORDS,
    "Person": _PERSON_WORDS,
    "Location": _LOCATION_WORDS,
    "Temporal": _TEMPORAL_WORDS,
    "Decision": _DECISION_WORDS,
}


def detect_elements_rule(text: str) -> set[str]:
    """Lexicon-based element tagging over lowercased word tokens."""
    tokens = set(textutil.tokenize(text))
    found = {name for name, lexicon in _LEXICONS.items() if tokens & lexicon}
    if "Temporal" not in found and _TIME_RE.search(text.lower()):
        found.add("Temporal")
    return found


# --- rule cue templates -------------------------------------------------------

_CUE_TEMPLATES = {
    "scenario_reconstruction": "Try to picture the scene around {topic}. What was happening nearby?",
    "interpersonal_interaction": "Was anyone with you around {topic}? What did you talk about?",
    "sensory_activation": "Do any sights, sounds, or smells come back when you think of {topic}?",
    "appearance_clues": "How did they look, regarding {topic}? Any detail of face or clothing?",
    "role_connection": "How do you know this person connected to {topic}? Work, family, or elsewhere?",
    "emotion_trigger": "How did you feel about {topic}? Any strong emotion attached?",
    "multiple_associations": "Did you do anything unusual connected with {topic}? What else was going on?",
    "immersive_recall": "Walk yourself back to the place of {topic}. What do you pass on the way?",
    "spatial_cues": "Where exactly were things placed around {topic}? Which room or shelf?",
    "timeline_rewind": "Step back through your day around {topic}. What happened just before?",
    "key_milestones": "Was {topic} before or after any notable event you remember?",
    "routine_pattern": "What do you usually do around {topic}? Could this time have followed the routine?",
    "background_motivation": "What mattered most to you about {topic} at the time?",
    "option_comparison": "What other options did you weigh regarding {topic}?",
    "experience_support": "Have you handled something like {topic} before? What did you do then?",
}


def _topic(q_u: str) -> str:
    words = textutil.content_tokens(q_u)
    return " ".join(words) if words else q_u.strip().rstrip("?")


class Oracles:
    """Facade bundling the four roles behind one configured object.

    Stateless apart from the optional transcript cache; safe to share across
    concurrent search iterations.
    """

    def __init__(self, config: Optional[OracleConfig] = None,
                 fixtures: Optional[ScriptedFixtures] = None,
                 chat_client: Optional[ChatClient] = None):
        self.config = config or OracleConfig()
        if fixtures is None and self.config.fixture_path:
            fixtures = ScriptedFixtures.load(self.config.fixture_path)
        self.fixtures = fixtures
        needs_remote = "remote" in (
            self.config.cue_backend, self.config.user_backend,
            self.config.similarity_backend, self.config.element_backend,
        )
        self._chat = chat_client or (ChatClient(self.config) if needs_remote else None)

    # -- cue generation ------------------------------------------------------

    def generate_cue(self, state, strategy: RecallStrategy) -> CueQuery:
        """Produce a cue query for the chosen strategy; never echoes q_u."""
        backend = self.config.cue_backend
        if backend == "scripted":
            key = (state.q_u, strategy.strategy_id, state.turn)
            if self.fixtures is None or key not in self.fixtures.cues:
                raise FixtureError(f"no scripted cue for {key!r}")
            text = self.fixtures.cues[key]
        elif backend == "rule":
            text = _CUE_TEMPLATES[strategy.strategy_id].format(topic=_topic(state.q_u))
        elif backend == "remote":
            text = self._remote_cue(state, strategy)
        else:
            raise ValueError(f"unknown cue backend {backend!r}")
        if text.strip() == state.q_u.strip():
            raise OracleError("cue generator returned the original query verbatim")
        return CueQuery(text=text, strategy_id=strategy.strategy_id)

    def _remote_cue(self, state, strategy: RecallStrategy) -> str:
        memory_hint = " ".join(f.text for f in state.retrieved[:3])
        history_lines = "\n".join(
            f"- strategy={s}; cue={c}; user={r}" for s, c, r in state.history
        ) or "(no turns yet)"
        prompt = (
            "You help a person recall a memory by asking one short cue question.\n"
            f"Original question: {state.q_u}\n"
            f"Dialogue so far:\n{history_lines}\n"
            f"Recall strategy to apply: {strategy.name}. {strategy.description}\n"
            "Write exactly one cue question. Do not repeat the original question."
        )
        context = state.q_u + " " + memory_hint
        best_text, best_score = None, -math.inf
        for i in range(self.config.candidate_count):
            candidate = self._chat.complete(prompt, role="cue", seed=i).strip()
            if not candidate:
                continue
            penalty = 1.0 if candidate.strip() == state.q_u.strip() else 0.0
            score = self.similarity(candidate, context) - penalty
            if score > best_score:
                best_text, best_score = candidate, score
        if best_text is None:
            raise OracleError("remote cue generation produced no candidates")
        return best_text

    # -- simulated user -------------------------------------------------------

    def simulate_user(self, bank: MemoryBank, cue: CueQuery, history: Sequence) -> UserResponse:
        turn_index = len(history)
        backend = self.config.user_backend
        if backend == "scripted":
            if self.fixtures is not None:
                if cue.text in self.fixtures.responses_by_cue:
                    return UserResponse(self.fixtures.responses_by_cue[cue.text], turn_index)
                if turn_index in self.fixtures.responses_by_turn:
                    return UserResponse(self.fixtures.responses_by_turn[turn_index], turn_index)
            raise FixtureError(f"no scripted user response for cue {cue.text!r} (turn {turn_index})")
        if backend == "rule":
            best_text, best_score = "", 0.0
            for frag in bank.fragments:
                score = textutil.overlap_score(cue.text, frag.text)
                if score > best_score:
                    best_text, best_score = frag.text, score
            return UserResponse(best_text, turn_index)
        if backend == "remote":
            persona = bank.persona or "an ordinary person"
            fragments = "\n".join(f"- {f.text}" for f in bank.fragments)
            prompt = (
                f"Role-play {persona} answering a memory question. You may only use "
                f"facts from these memories:\n{fragments}\n\nQuestion: {cue.text}\n"
                "Answer in one or two sentences. If the memories say nothing, say so."
            )
            return UserResponse(self._chat.complete(prompt, role="user").strip(), turn_index)
        raise ValueError(f"unknown user backend {backend!r}")

    # -- similarity ------------------------------------------------------------

    def similarity(self, a: str, b: str) -> float:
        if self.config.similarity_backend == "offline":
            return textutil.token_f1(a, b)
        if self.config.similarity_backend == "remote":
            va, vb = self._chat.embed(a), self._chat.embed(b)
            dot = sum(x * y for x, y in zip(va, vb))
            na = math.sqrt(sum(x * x for x in va))
            nb = math.sqrt(sum(x * x for x in vb))
            if na == 0 or nb == 0:
                return 0.0
            return (1.0 + dot / (na * nb)) / 2.0
        raise ValueError(f"unknown similarity backend {self.config.similarity_backend!r}")

    # -- element detection -------------------------------------------------------

    def detect_elements(self, text: str) -> set[str]:
        if self.config.element_backend == "rule":
            return detect_elements_rule(text)
        if self.config.element_backend == "remote":
            found = set()
            for name in ELEMENT_NAMES:
                prompt = (
                    f"Does the following text mention a {name.lower()}-type memory "
                    f"element? Answer yes or no.\n\nText: {text}"
                )
                answer = self._chat.complete(prompt, role="element").strip().lower()
                if answer.startswith("yes"):
                    found.add(name)
                elif not answer.startswith("no"):
                    raise OracleError(f"element detector returned invalid answer {answer!r}")
            return found
        raise ValueError(f"unknown element backend {self.config.element_backend!r}")
