"""Balance-of-recall scoring: response accuracy penalized by cue-query overlap.

The score rewards responses close to the gold answer while penalizing cue
queries that merely restate the original question:
score = acc / (1 + alpha * sim).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from recall_router import text as textutil
from recall_router.oracles import Oracles

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.3


@dataclass(frozen=True)
class BrsRow:
    query_id: str
    acc: float
    sim: float
    brs: float
    scenario: Optional[str] = None
    error: Optional[str] = None


@dataclass
class BrsReport:
    rows: list[BrsRow]
    mean_brs: float
    per_scenario: dict[str, float]
    alpha: float
    error_count: int = 0

    def to_json_obj(self) -> dict:
        return {
            "alpha": self.alpha,
            "mean_brs": self.mean_brs,
            "mean_brs_x100": self.mean_brs * 100.0,
            "per_scenario": self.per_scenario,
            "error_count": self.error_count,
            "rows": [
                {"query_id": r.query_id, "acc": r.acc, "sim": r.sim, "brs": r.brs,
                 **({"scenario": r.scenario} if r.scenario else {}),
                 **({"error": r.error} if r.error else {})}
                for r in self.rows
            ],
        }


def brs(acc: float, sim: float, alpha: float = DEFAULT_ALPHA) -> float:
    """acc / (1 + alpha * sim); monotone up in acc, down in sim."""
    if not (0.0 <= acc <= 1.0):
        raise ValueError(f"acc must be in [0, 1], got {acc}")
    if not (0.0 <= sim <= 1.0):
        raise ValueError(f"sim must be in [0, 1], got {sim}")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    return acc / (1.0 + alpha * sim)


@dataclass(frozen=True)
class EvalTuple:
    query_id: str
    q_u: str
    q_c: str
    response: str
    answer: str
    scenario: Optional[str] = None


def load_eval_tuples(path) -> list[EvalTuple]:
    tuples = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        tuples.append(EvalTuple(
            query_id=str(obj["query_id"]), q_u=str(obj["q_u"]), q_c=str(obj["q_c"]),
            response=str(obj["response"]), answer=str(obj["answer"]),
            scenario=obj.get("scenario"),
        ))
    return tuples


def query_similarity(q_u: str, q_c: str, oracles: Optional[Oracles]) -> float:
    """Embedding cosine when a remote scorer is configured, else TF cosine."""
    if oracles is not None and oracles.config.similarity_backend == "remote":
        return oracles.similarity(q_u, q_c)
    return textutil.tf_cosine(q_u, q_c)


def evaluate_batch(tuples: Sequence[EvalTuple], alpha: float = DEFAULT_ALPHA,
                   oracles: Optional[Oracles] = None) -> BrsReport:
    """Score a batch; errored rows are excluded from aggregates but tallied."""
    if not tuples:
        raise ValueError("tuples must be non-empty")
    scorer = oracles or Oracles()
    rows: list[BrsRow] = []
    errors = 0
    for item in tuples:
        try:
            acc = scorer.similarity(item.response, item.answer)
            sim = query_similarity(item.q_u, item.q_c, oracles)
            rows.append(BrsRow(item.query_id, acc, sim, brs(acc, sim, alpha),
                               scenario=item.scenario))
        except Exception as exc:
            errors += 1
            logger.warning("scoring failed for %s: %s", item.query_id, exc)
            rows.append(BrsRow(item.query_id, 0.0, 0.0, 0.0,
                               scenario=item.scenario, error=str(exc)))
    scored = [r for r in rows if r.error is None]
    mean = sum(r.brs for r in scored) / len(scored) if scored else 0.0
    per_scenario: dict[str, float] = {}
    for scenario in sorted({r.scenario for r in scored if r.scenario}):
        group = [r.brs for r in scored if r.scenario == scenario]
        per_scenario[scenario] = sum(group) / len(group)
    return BrsReport(rows=rows, mean_brs=mean, per_scenario=per_scenario,
                     alpha=alpha, error_count=errors)


def write_report(report: BrsReport, json_path, csv_path=None) -> None:
    Path(json_path).write_text(
        json.dumps(report.to_json_obj(), indent=2, ensure_ascii=False) + "\n", "utf-8")
    if csv_path is not None:
        lines = ["query_id,acc,sim,brs,scenario,error"]
        for r in report.rows:
            lines.append(f"{r.query_id},{r.acc},{r.sim},{r.brs},"
                         f"{r.scenario or ''},{r.error or ''}")
        Path(csv_path).write_text("\n".join(lines) + "\n", "utf-8")
