"""The 5W recall map: scenario taxonomy, strategy pool, query classifier.

Forgetting queries fall into five scenarios (What/Who/Where/When/Why mapped
to Event/Person/Location/Temporal/Decision); each scenario owns exactly three
recall strategies. The classifier ships with a deterministic rule backend and
a remote chat-model backend behind the same interface.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "FiveWScenario",
    "RecallStrategy",
    "strategy_pool",
    "strategies_for",
    "get_strategy",
    "classify",
    "RuleClassifier",
    "RemoteClassifier",
    "ClassificationError",
]


class ClassificationError(RuntimeError):
    """Remote classifier failure or an out-of-set label."""


class FiveWScenario(str, enum.Enum):
    EVENT = "Event"
    PERSON = "Person"
    LOCATION = "Location"
    TEMPORAL = "Temporal"
    DECISION = "Decision"

    @classmethod
    def parse(cls, label: str) -> "FiveWScenario":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown scenario label {label!r}")


@dataclass(frozen=True)
class RecallStrategy:
    strategy_id: str
    scenario: FiveWScenario
    name: str
    description: str


# Embedded, versioned strategy table. Order: scenario order Event, Person,
# Location, Temporal, Decision; table order within each scenario.
_POOL: tuple[RecallStrategy, ...] = (
    RecallStrategy(
        "scenario_reconstruction", FiveWScenario.EVENT, "Scenario Reconstruction",
        "Walk the user back through the setting of the forgotten event, asking about "
        "surroundings, feelings, time of day, and other contextual details so the "
        "scene rebuilds itself piece by piece.",
    ),
    RecallStrategy(
        "interpersonal_interaction", FiveWScenario.EVENT, "Interpersonal Interaction",
        "Probe the user's exchanges with other people around the event, using who "
        "said or did what as the hook that pulls the rest of the episode back.",
    ),
    RecallStrategy(
        "sensory_activation", FiveWScenario.EVENT, "Sensory Activation",
        "Ask about sights, sounds, smells, and other sensations tied to the moment; "
        "sensory impressions often unlock an event memory that facts alone cannot.",
    ),
    RecallStrategy(
        "appearance_clues", FiveWScenario.PERSON, "Appearance Clues",
        "Draw out the person's outward traits, such as face, clothing, voice, or "
        "mannerisms, and use those observable features to surface who they are.",
    ),
    RecallStrategy(
        "role_connection", FiveWScenario.PERSON, "Role Connection",
        "Anchor the person through their relationship to the user, for example "
        "colleague, relative, teacher, or neighbor, and trace memories through "
        "that social role.",
    ),
    RecallStrategy(
        "emotion_trigger", FiveWScenario.PERSON, "Emotion Trigger",
        "Revisit the feelings the person evokes, such as joy, irritation, or "
        "surprise, and let the emotional tone lead back to concrete memories "
        "of them.",
    ),
    RecallStrategy(
        "multiple_associations", FiveWScenario.LOCATION, "Multiple Associations",
        "Chain together several nearby memory points, including objects handled, "
        "side activities, or unrelated happenings, so one association leads to the "
        "misplaced thing or place.",
    ),
    RecallStrategy(
        "immersive_recall", FiveWScenario.LOCATION, "Immersive Recall",
        "Have the user mentally re-enter the place, following landmarks, paths, and "
        "scene details as if walking through it again.",
    ),
    RecallStrategy(
        "spatial_cues", FiveWScenario.LOCATION, "Spatial Cues",
        "Use layout information such as directions, distances, which shelf or room, "
        "and notable landmarks to pin down where something happened or was left.",
    ),
    RecallStrategy(
        "timeline_rewind", FiveWScenario.TEMPORAL, "Timeline Rewind",
        "Replay events in order, stepping backward or forward through the sequence "
        "of the day until the sought moment falls into place.",
    ),
    RecallStrategy(
        "key_milestones", FiveWScenario.TEMPORAL, "Key Milestones",
        "Anchor on standout events such as a holiday, appointment, or turning point "
        "and locate the forgotten time relative to those anchors.",
    ),
    RecallStrategy(
        "routine_pattern", FiveWScenario.TEMPORAL, "Routine Pattern",
        "Lean on habits and regular schedules, asking what the user usually does at "
        "a given time or place, so the routine reveals the specific occasion.",
    ),
    RecallStrategy(
        "background_motivation", FiveWScenario.DECISION, "Background motivation",
        "Explore what was driving the user at the time, including needs, goals, "
        "values, or outside pressure, to recover why a choice was made.",
    ),
    RecallStrategy(
        "option_comparison", FiveWScenario.DECISION, "Option Comparison",
        "Reconstruct the alternatives that were on the table and their pros and "
        "cons; weighing them again brings back the reasoning.",
    ),
    RecallStrategy(
        "experience_support", FiveWScenario.DECISION, "Experience Support",
        "Point the user at earlier, similar situations and how they turned out, "
        "using past experience to explain the present decision.",
    ),
)

_BY_ID = {s.strategy_id: s for s in _POOL}


def strategy_pool() -> list[RecallStrategy]:
    """All 15 strategies in stable order (3 per scenario)."""
    return list(_POOL)


def strategies_for(scenario: FiveWScenario) -> list[RecallStrategy]:
    return [s for s in _POOL if s.scenario is scenario]


def get_strategy(strategy_id: str) -> RecallStrategy:
    try:
        return _BY_ID[strategy_id]
    except KeyError:
        raise KeyError(f"unknown strategy_id {strategy_id!r}") from None


# --- classification ---------------------------------------------------------

# Ordered precedence: When before Where before Who before Why before What.
# Each entry is (scenario, compiled pattern over the lowercased query).
_RULES = (
    (FiveWScenario.TEMPORAL, re.compile(
        r"\bwhen\b|\bwhat time\b|\bwhat day\b|\bwhat year\b|\bhow long ago\b|\bhow often\b")),
    (FiveWScenario.LOCATION, re.compile(
        r"\bwhere\b|\bwhich place\b|\bwhat place\b|\blocation\b|\bwhereabouts\b")),
    (FiveWScenario.PERSON, re.compile(
        r"\bwho\b|\bwhom\b|\bwhose\b|\bwhich person\b|\bname of the (?:person|man|woman)\b")),
    (FiveWScenario.DECISION, re.compile(
        r"\bwhy\b|\breason\b|\bwhat made me\b|\bdecide\b|\bdecided\b|\bchoose\b|\bchose\b")),
    (FiveWScenario.EVENT, re.compile(
        r"\bwhat\b|\bwhich\b|\bhappened\b|\bdid i\b")),
)


class RuleClassifier:
    """Deterministic keyword/pattern classifier; default scenario is Event."""

    def classify(self, query_text: str) -> FiveWScenario:
        lowered = query_text.lower()
        for scenario, pattern in _RULES:
            if pattern.search(lowered):
                return scenario
        return FiveWScenario.EVENT


class RemoteClassifier:
    """Forwards classification to a chat endpoint and validates the label."""

    PROMPT = (
        "You route memory questions to one forgetting scenario. The scenarios "
        "are: Event (what happened), Person (who someone is), Location (where "
        "something is or took place), Temporal (when something happened), "
        "Decision (why a choice was made). Reply with exactly one scenario "
        "name and nothing else.\n\nQuestion: {query}"
    )

    def __init__(self, chat_client):
        self._chat = chat_client

    def classify(self, query_text: str) -> FiveWScenario:
        try:
            label = self._chat.complete(self.PROMPT.format(query=query_text)).strip()
        except Exception as exc:
            raise ClassificationError(f"remote classification failed: {exc}") from exc
        try:
            return FiveWScenario.parse(label)
        except ValueError:
            raise ClassificationError(f"remote backend returned invalid label {label!r}") from None


def classify(query_text: str, backend: Optional[object] = None) -> FiveWScenario:
    """Classify a forgetting query into exactly one of the five scenarios."""
    if not query_text or not query_text.strip():
        raise ValueError("query_text must be non-empty")
    backend = backend or RuleClassifier()
    return backend.classify(query_text)
