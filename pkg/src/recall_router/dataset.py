"""Instruction-tuning dataset construction from search results.

Harvests (original query, strategy, cue query) triples from top-k recall
paths, drops triples that failed to activate memory, formats them as
three-field instruction records, and writes seeded, scenario-stratified
train/test JSON Lines splits.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from recall_router.reward import Terminal
from recall_router.scenario_map import FiveWScenario, get_strategy, strategy_pool
from recall_router.sgr_mcts import RecallPath

HARVEST_POLICIES = ("first-step", "all-steps")
RECORD_LAYOUTS = ("main", "appendix")

_INSTRUCTION = (
    "You are a memory-recall assistant. Given a user's question about a "
    "forgotten memory, pick the single best recall strategy and rewrite the "
    "question as one cue-rich question that helps the user remember. "
    "Available strategies: "
    + "; ".join(f"{s.name} ({s.scenario.value}): {s.description.split('.')[0].lower()}"
                for s in strategy_pool())
    + "."
)


@dataclass(frozen=True)
class HarvestedTriple:
    q_u: str
    strategy_id: str
    cue_text: str
    terminal: Terminal
    response_text: str
    r_rd: int


@dataclass(frozen=True)
class MemoStrategyRecord:
    instruction: str
    input: str
    output: dict

    def validate(self, layout: str = "main") -> None:
        if not self.instruction.strip() or not self.input.strip():
            raise ValueError("instruction and input must be non-empty")
        cue = self.output.get("cue_query", "")
        if not cue.strip():
            raise ValueError("output.cue_query must be non-empty")
        if cue == self.input:
            raise ValueError("cue_query must differ from the input query")
        if layout == "main":
            names = {s.name for s in strategy_pool()}
            if self.output.get("strategy") not in names:
                raise ValueError(f"unknown strategy name {self.output.get('strategy')!r}")

    def to_json_obj(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def harvest(results: Sequence[tuple[str, Sequence[RecallPath]]],
            policy: str = "first-step") -> list[HarvestedTriple]:
    """Turn top-k paths into training triples; identical triples deduplicate."""
    if policy not in HARVEST_POLICIES:
        raise ValueError(f"unknown harvest policy {policy!r}")
    triples: list[HarvestedTriple] = []
    seen: set[tuple[str, str, str]] = set()
    for q_u, paths in results:
        for path in paths:
            steps = path.steps[:1] if policy == "first-step" else path.steps
            for strategy_id, cue_text, response_text, breakdown in steps:
                key = (q_u, strategy_id, cue_text)
                if key in seen:
                    continue
                seen.add(key)
                triples.append(HarvestedTriple(
                    q_u=q_u, strategy_id=strategy_id, cue_text=cue_text,
                    terminal=path.terminal, response_text=response_text,
                    r_rd=breakdown.r_rd,
                ))
    return triples


def filter_failures(triples: Iterable[HarvestedTriple]) -> list[HarvestedTriple]:
    """Keep only triples that actually activated memory.

    Drops failure-terminal paths and turns whose response carried no key
    information (empty text or zero detected memory elements).
    """
    kept = []
    for triple in triples:
        if triple.terminal is Terminal.FAILURE:
            continue
        if not triple.response_text.strip() or triple.r_rd == 0:
            continue
        kept.append(triple)
    return kept


def build_record(triple: HarvestedTriple, layout: str = "main") -> MemoStrategyRecord:
    strategy = get_strategy(triple.strategy_id)
    if layout == "main":
        record = MemoStrategyRecord(
            instruction=_INSTRUCTION,
            input=triple.q_u,
            output={"strategy": strategy.name, "cue_query": triple.cue_text},
        )
    elif layout == "appendix":
        record = MemoStrategyRecord(
            instruction=_INSTRUCTION,
            input=f"{triple.q_u}\nRecommended strategy: {strategy.name}",
            output={"cue_query": triple.cue_text},
        )
    else:
        raise ValueError(f"unknown record layout {layout!r}")
    record.validate(layout)
    return record


def _scenario_of(record: MemoStrategyRecord) -> FiveWScenario:
    by_name = {s.name: s.scenario for s in strategy_pool()}
    name = record.output.get("strategy")
    if name in by_name:
        return by_name[name]
    return FiveWScenario.EVENT  # appendix layout keeps strategy in the input


def split_records(records: Sequence[MemoStrategyRecord], split_ratio: float,
                  rng_seed: int) -> tuple[list[MemoStrategyRecord], list[MemoStrategyRecord]]:
    """Seeded, scenario-stratified split; overall counts are exact."""
    if not (0.0 < split_ratio < 1.0):
        raise ValueError("split_ratio must be in (0, 1)")
    rng = random.Random(rng_seed)
    groups: dict[FiveWScenario, list[MemoStrategyRecord]] = {s: [] for s in FiveWScenario}
    for record in records:
        groups[_scenario_of(record)].append(record)

    total_train = round(split_ratio * len(records))
    # Floor per group, then hand out the remainder by largest fraction.
    allocations = {}
    fractions = []
    for scenario in FiveWScenario:
        exact = split_ratio * len(groups[scenario])
        allocations[scenario] = int(exact)
        fractions.append((exact - int(exact), scenario))
    remainder = total_train - sum(allocations.values())
    fractions.sort(key=lambda pair: -pair[0])
    for _, scenario in fractions[:remainder]:
        allocations[scenario] += 1

    train, test = [], []
    for scenario in FiveWScenario:
        group = list(groups[scenario])
        rng.shuffle(group)
        n = allocations[scenario]
        train.extend(group[:n])
        test.extend(group[n:])
    rng.shuffle(train)
    rng.shuffle(test)
    return train, test


def write_records(records: Sequence[MemoStrategyRecord], path,
                  layout: str = "main") -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            record.validate(layout)
            fh.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")


def parse_records(path, layout: str = "main") -> list[MemoStrategyRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        if set(obj) != {"instruction", "input", "output"}:
            raise ValueError(f"{path}:{lineno}: records carry exactly three fields")
        record = MemoStrategyRecord(obj["instruction"], obj["input"], obj["output"])
        record.validate(layout)
        records.append(record)
    return records


def emit(triples: Sequence[HarvestedTriple], split_ratio: float, rng_seed: int,
         train_path, test_path, layout: str = "main") -> tuple[int, int]:
    """Format, split, and write the dataset; returns (train count, test count)."""
    records = [build_record(t, layout) for t in triples]
    train, test = split_records(records, split_ratio, rng_seed)
    write_records(train, train_path, layout)
    write_records(test, test_path, layout)
    return len(train), len(test)
