"""Memory-fragment storage, corpus adapters, and lexical retrieval.

A bank is an immutable, ordered list of short natural-language fragments.
Adapters ingest the three public-corpus shapes by sentence-splitting long
entries; retrieval ranks fragments by normalized token overlap so the search
engine stays deterministic and offline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from recall_router import text as textutil

logger = logging.getLogger(__name__)

ELEMENT_NAMES = ("Event", "Person", "Location", "Temporal", "Decision")

BANK_FORMATS = ("canonical", "perltqa-like", "locomo-like", "memorybank-like")


class BankFormatError(ValueError):
    """Raised when a bank or QA file does not parse under the named schema."""


@dataclass(frozen=True)
class MemoryFragment:
    fragment_id: str
    bank_id: str
    text: str
    element_tags: frozenset[str] = frozenset()
    timestamp: Optional[str] = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"fragment {self.fragment_id!r}: text is empty")
        bad = set(self.element_tags) - set(ELEMENT_NAMES)
        if bad:
            raise ValueError(f"fragment {self.fragment_id!r}: unknown element tags {sorted(bad)}")

    def to_json_obj(self) -> dict:
        obj = {"fragment_id": self.fragment_id, "bank_id": self.bank_id, "text": self.text}
        if self.element_tags:
            obj["element_tags"] = sorted(self.element_tags)
        if self.timestamp is not None:
            obj["timestamp"] = self.timestamp
        return obj


@dataclass(frozen=True)
class MemoryBank:
    bank_id: str
    fragments: tuple[MemoryFragment, ...]
    persona: Optional[str] = None

    def __len__(self) -> int:
        return len(self.fragments)


@dataclass(frozen=True)
class QaPair:
    query_id: str
    bank_id: str
    query_text: str
    answer_text: str
    gold_scenario: Optional[str] = None


def _check_unique_ids(fragments: Iterable[MemoryFragment]) -> None:
    seen: set[str] = set()
    for frag in fragments:
        if frag.fragment_id in seen:
            raise BankFormatError(f"duplicate fragment_id {frag.fragment_id!r}")
        seen.add(frag.fragment_id)


def _read_lines(path: Path) -> list[str]:
    raw = path.read_text("utf-8")
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise BankFormatError(f"{path}: file is empty")
    return lines


def _parse_json_line(path: Path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"{path}:{lineno}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise BankFormatError(f"{path}:{lineno}: expected a JSON object")
    return obj


def _load_canonical(path: Path) -> list[MemoryFragment]:
    fragments = []
    for lineno, line in enumerate(_read_lines(path), 1):
        obj = _parse_json_line(path, lineno, line)
        try:
            fragments.append(
                MemoryFragment(
                    fragment_id=str(obj["fragment_id"]),
                    bank_id=str(obj["bank_id"]),
                    text=str(obj["text"]),
                    element_tags=frozenset(obj.get("element_tags", ())),
                    timestamp=obj.get("timestamp"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise BankFormatError(f"{path}:{lineno}: {exc}") from None
    return fragments


def _split_entry(bank_id: str, entry_id: str, entry_text: str, timestamp=None) -> list[MemoryFragment]:
    sentences = textutil.split_sentences(entry_text)
    if not sentences:
        raise BankFormatError(f"entry {entry_id!r}: no sentence content")
    return [
        MemoryFragment(
            fragment_id=f"{entry_id}-s{i}" if len(sentences) > 1 else entry_id,
            bank_id=bank_id,
            text=sent,
            timestamp=timestamp,
        )
        for i, sent in enumerate(sentences)
    ]


def _load_perltqa_like(path: Path) -> list[MemoryFragment]:
    # One JSON object per line: {"id": ..., "memory": long text}. Long entries
    # become one fragment per sentence.
    fragments = []
    bank_id = path.stem
    for lineno, line in enumerate(_read_lines(path), 1):
        obj = _parse_json_line(path, lineno, line)
        if "memory" not in obj:
            raise BankFormatError(f"{path}:{lineno}: missing 'memory' field")
        entry_id = str(obj.get("id", f"e{lineno}"))
        fragments.extend(_split_entry(bank_id, entry_id, str(obj["memory"])))
    return fragments


def _load_locomo_like(path: Path) -> list[MemoryFragment]:
    # One JSON object per line: {"speaker": ..., "text": ..., "turn": n}.
    # Each conversation turn is sentence-split; speaker is kept in the text.
    fragments = []
    bank_id = path.stem
    for lineno, line in enumerate(_read_lines(path), 1):
        obj = _parse_json_line(path, lineno, line)
        if "speaker" not in obj or "text" not in obj:
            raise BankFormatError(f"{path}:{lineno}: missing 'speaker' or 'text' field")
        turn = obj.get("turn", lineno)
        entry = f"{obj['speaker']}: {obj['text']}"
        fragments.extend(_split_entry(bank_id, f"t{turn}", entry))
    return fragments


def _load_memorybank_like(path: Path) -> list[MemoryFragment]:
    # One JSON object per line: {"user": ..., "date": ..., "summary": text}.
    fragments = []
    bank_id = path.stem
    for lineno, line in enumerate(_read_lines(path), 1):
        obj = _parse_json_line(path, lineno, line)
        if "summary" not in obj:
            raise BankFormatError(f"{path}:{lineno}: missing 'summary' field")
        fragments.extend(
            _split_entry(bank_id, f"d{lineno}", str(obj["summary"]), timestamp=obj.get("date"))
        )
    return fragments


_LOADERS = {
    "canonical": _load_canonical,
    "perltqa-like": _load_perltqa_like,
    "locomo-like": _load_locomo_like,
    "memorybank-like": _load_memorybank_like,
}


def load_bank(path, format: str = "canonical") -> MemoryBank:
    """Load a memory bank from disk under one of the supported schemas."""
    if format not in _LOADERS:
        raise ValueError(f"unknown bank format {format!r}; expected one of {BANK_FORMATS}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    fragments = _LOADERS[format](path)
    _check_unique_ids(fragments)
    bank_ids = {f.bank_id for f in fragments}
    bank_id = fragments[0].bank_id if len(bank_ids) == 1 else path.stem
    logger.debug("loaded bank %s: %d fragments from %s", bank_id, len(fragments), path)
    return MemoryBank(bank_id=bank_id, fragments=tuple(fragments))


def save_bank(bank: MemoryBank, path) -> None:
    """Write a bank in canonical JSON Lines form (stable field order)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for frag in bank.fragments:
            fh.write(json.dumps(frag.to_json_obj(), ensure_ascii=False) + "\n")


def load_qa_pairs(path, known_banks: Optional[set[str]] = None) -> list[QaPair]:
    """Load a QA file; every bank_id must resolve when known_banks is given."""
    path = Path(path)
    pairs = []
    for lineno, line in enumerate(_read_lines(path), 1):
        obj = _parse_json_line(path, lineno, line)
        try:
            pair = QaPair(
                query_id=str(obj["query_id"]),
                bank_id=str(obj["bank_id"]),
                query_text=str(obj["query_text"]),
                answer_text=str(obj["answer_text"]),
                gold_scenario=obj.get("gold_scenario"),
            )
        except KeyError as exc:
            raise BankFormatError(f"{path}:{lineno}: missing field {exc}") from None
        if known_banks is not None and pair.bank_id not in known_banks:
            raise BankFormatError(f"{path}:{lineno}: unknown bank_id {pair.bank_id!r}")
        pairs.append(pair)
    return pairs


def retrieve(bank: MemoryBank, query_text: str, j: int) -> list[MemoryFragment]:
    """Top-j fragments by normalized token overlap; bank-order tie-break."""
    if j < 1:
        raise ValueError("j must be >= 1")
    scored = [
        (textutil.overlap_score(query_text, frag.text), idx)
        for idx, frag in enumerate(bank.fragments)
    ]
    # Stable sort keeps bank order among equal scores.
    scored.sort(key=lambda pair: -pair[0])
    return [bank.fragments[idx] for _, idx in scored[:j]]
