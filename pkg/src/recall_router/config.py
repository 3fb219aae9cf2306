"""Run-configuration file loading and validation.

One JSON file carries the search, reward, and oracle settings so CLI runs
and the HTTP service are reproducible from a single artifact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from recall_router.oracles import OracleConfig
from recall_router.reward import RewardConfig
from recall_router.sgr_mcts import SearchConfig


@dataclass
class RunConfig:
    search: SearchConfig
    reward: RewardConfig
    oracle: OracleConfig

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(search=SearchConfig(), reward=RewardConfig(), oracle=OracleConfig())


def _build(dc_type, data: dict, section: str):
    known = {f.name for f in fields(dc_type)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in '{section}' section: {sorted(unknown)}")
    return dc_type(**data)


def load_run_config(path: Optional[str]) -> RunConfig:
    """Load and validate a run config; missing file path means all defaults."""
    if path is None:
        return RunConfig.default()
    obj = json.loads(Path(path).read_text("utf-8"))
    if not isinstance(obj, dict):
        raise ValueError("run config must be a JSON object")
    return RunConfig(
        search=_build(SearchConfig, obj.get("search", {}), "search"),
        reward=_build(RewardConfig, obj.get("reward", {}), "reward"),
        oracle=_build(OracleConfig, obj.get("oracle", {}), "oracle"),
    )
