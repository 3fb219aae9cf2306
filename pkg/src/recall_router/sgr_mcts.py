"""Hierarchical recall tree search.

High-level edges are recall strategies; each expansion generates a cue query,
obtains a simulated user response, scores the turn, and attaches a child
state. Iterations run UCT selection, expansion, an epsilon-greedy rollout to
a terminal state, and discounted backpropagation; the best root-to-terminal
paths are extracted at the end.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from recall_router.memory_bank import MemoryBank, MemoryFragment, retrieve
from recall_router.oracles import OracleError, Oracles
from recall_router.reward import RewardBreakdown, RewardConfig, Terminal, evaluate_turn
from recall_router.scenario_map import RecallStrategy, strategy_pool

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DialogueState:
    q_u: str
    history: tuple[tuple[str, str, str], ...]  # (strategy_id, cue, response)
    retrieved: tuple[MemoryFragment, ...]
    turn: int

    def __post_init__(self):
        if len(self.history) != self.turn:
            raise ValueError("history length must equal turn count")


@dataclass
class TreeNode:
    node_id: int
    parent_id: Optional[int]
    incoming_strategy: Optional[str]
    state: DialogueState
    q_total: float = 0.0
    visits: int = 0
    children: dict[str, int] = field(default_factory=dict)
    terminal: Optional[Terminal] = None  # None means non-terminal
    cached_breakdown: Optional[RewardBreakdown] = None


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 120
    top_k: int = 5
    exploration_c: float = 1.414
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_decrement: float = 0.05
    epsilon_floor: float = 0.05
    rng_seed: int = 0
    retrieval_j: int = 3
    path_value_mode: str = "sum"  # "sum" or "mean" of node values along the path

    def __post_init__(self):
        if self.iterations < 1 or self.top_k < 1 or self.retrieval_j < 1:
            raise ValueError("iterations, top_k, and retrieval_j must be >= 1")
        if self.epsilon_floor > self.epsilon_start:
            raise ValueError("epsilon_floor must be <= epsilon_start")
        if not (0.0 <= self.discount <= 1.0):
            raise ValueError("discount must be in [0, 1]")
        if self.path_value_mode not in ("sum", "mean"):
            raise ValueError("path_value_mode must be 'sum' or 'mean'")


@dataclass(frozen=True)
class RecallPath:
    steps: tuple[tuple[str, str, str, RewardBreakdown], ...]
    path_value: float
    terminal: Terminal
    node_ids: tuple[int, ...]


@dataclass
class SearchResult:
    paths: list[RecallPath]       # empty list is the explicit no-path result
    nodes: dict[int, TreeNode]
    root_id: int
    iteration_log: list[dict]
    failed_iterations: int = 0


class RecallTree:
    """Single-writer tree; one search run mutates it serially."""

    def __init__(self, root_state: DialogueState, pool: Sequence[RecallStrategy]):
        self.pool = list(pool)
        self.pool_ids = [s.strategy_id for s in self.pool]
        self.nodes: dict[int, TreeNode] = {}
        self._next_id = 0
        self.root = self._new_node(None, None, root_state)

    def _new_node(self, parent_id, incoming_strategy, state) -> TreeNode:
        node = TreeNode(self._next_id, parent_id, incoming_strategy, state)
        self.nodes[node.node_id] = node
        self._next_id += 1
        return node

    def fully_expanded(self, node: TreeNode) -> bool:
        return node.terminal is not None or all(sid in node.children for sid in self.pool_ids)

    def path_to_root(self, node: TreeNode) -> list[TreeNode]:
        chain = [node]
        while chain[-1].parent_id is not None:
            chain.append(self.nodes[chain[-1].parent_id])
        chain.reverse()
        return chain


def uct_score(q_total: float, visits: int, parent_visits: int, c: float) -> float:
    """UCT value of one child; unvisited children get infinite priority."""
    if visits == 0:
        return math.inf
    return q_total / visits + c * math.sqrt(math.log(parent_visits) / visits)


def uct_select(node: TreeNode, c: float, tree: RecallTree) -> str:
    """Argmax of the UCT rule over children; ties break by pool order."""
    if node.terminal is not None:
        raise ValueError("cannot select from a terminal node")
    missing = [sid for sid in tree.pool_ids if sid not in node.children]
    if missing:
        raise ValueError(f"node {node.node_id} is not fully expanded (missing {missing[0]!r})")
    best_sid, best_score = None, -math.inf
    for sid in tree.pool_ids:
        child = tree.nodes[node.children[sid]]
        score = uct_score(child.q_total, child.visits, node.visits, c)
        if score > best_score:
            best_sid, best_score = sid, score
    return best_sid


def _advance_state(state: DialogueState, strategy_id: str, cue_text: str,
                   response_text: str, bank: MemoryBank, j: int) -> DialogueState:
    history = state.history + ((strategy_id, cue_text, response_text),)
    query = " ".join([state.q_u] + [resp for _, _, resp in history])
    return DialogueState(
        q_u=state.q_u,
        history=history,
        retrieved=tuple(retrieve(bank, query, j)),
        turn=state.turn + 1,
    )


def expand(tree: RecallTree, node: TreeNode, strategy: RecallStrategy,
           bank: MemoryBank, r_ans: str, oracles: Oracles,
           reward_config: RewardConfig, retrieval_j: int) -> TreeNode:
    """Generate cue and response for one strategy and attach a child node."""
    if node.terminal is not None:
        raise ValueError("cannot expand a terminal node")
    if strategy.strategy_id in node.children:
        raise ValueError(f"strategy {strategy.strategy_id!r} already expanded")
    cue = oracles.generate_cue(node.state, strategy)
    response = oracles.simulate_user(bank, cue, node.state.history)
    breakdown = evaluate_turn(response.text, r_ans, node.state.turn + 1, reward_config, oracles)
    child_state = _advance_state(node.state, strategy.strategy_id, cue.text,
                                 response.text, bank, retrieval_j)
    child = tree._new_node(node.node_id, strategy.strategy_id, child_state)
    child.cached_breakdown = breakdown
    if breakdown.terminal is not Terminal.NOT_TERMINAL:
        child.terminal = breakdown.terminal
    node.children[strategy.strategy_id] = child.node_id
    return child


def _greedy_strategy(tree: RecallTree, node: Optional[TreeNode]) -> str:
    """Best strategy by mean child value; unvisited score an optimistic 1.0."""
    best_sid, best_score = None, -math.inf
    for sid in tree.pool_ids:
        score = 1.0
        if node is not None and sid in node.children:
            child = tree.nodes[node.children[sid]]
            if child.visits > 0:
                score = child.q_total / child.visits
        if score > best_score:
            best_sid, best_score = sid, score
    return best_sid


def simulate(tree: RecallTree, from_node: TreeNode, epsilon: float, rng: random.Random,
             bank: MemoryBank, r_ans: str, oracles: Oracles,
             reward_config: RewardConfig, search_config: SearchConfig
             ) -> tuple[float, int, Terminal]:
    """Epsilon-greedy rollout to a terminal state; rollout nodes are transient.

    Returns (terminal composite reward, rollout turn count, terminal status).
    """
    if from_node.terminal is not None:
        raise ValueError("cannot simulate from a terminal node")
    state = from_node.state
    anchor: Optional[TreeNode] = from_node  # tree stats only exist at the frontier
    depth = 0
    while True:
        if rng.random() < epsilon:
            sid = tree.pool_ids[rng.randrange(len(tree.pool_ids))]
        else:
            sid = _greedy_strategy(tree, anchor)
        strategy = next(s for s in tree.pool if s.strategy_id == sid)
        cue = oracles.generate_cue(state, strategy)
        response = oracles.simulate_user(bank, cue, state.history)
        breakdown = evaluate_turn(response.text, r_ans, state.turn + 1, reward_config, oracles)
        depth += 1
        if breakdown.terminal is not Terminal.NOT_TERMINAL:
            return breakdown.composite, depth, breakdown.terminal
        state = _advance_state(state, sid, cue.text, response.text,
                               bank, search_config.retrieval_j)
        anchor = None  # past the frontier there are no stored statistics


def backpropagate(path: Sequence[TreeNode], r_end: float, gamma: float) -> None:
    """Discounted credit along the stored root-to-leaf path (leaf undiscounted)."""
    leaf_depth = len(path) - 1
    for depth, node in enumerate(path):
        node.q_total += (gamma ** (leaf_depth - depth)) * r_end
        node.visits += 1


def epsilon_at(config: SearchConfig, iteration: int) -> float:
    return max(config.epsilon_floor,
               config.epsilon_start - iteration * config.epsilon_decrement)


def extract_top_paths(tree: RecallTree, config: SearchConfig) -> list[RecallPath]:
    """All root-to-terminal paths ranked by accumulated node value."""
    candidates = []
    for node_id in sorted(tree.nodes):  # discovery order
        node = tree.nodes[node_id]
        if node.terminal is None:
            continue
        chain = tree.path_to_root(node)
        value = sum(n.q_total for n in chain)
        if config.path_value_mode == "mean":
            value /= len(chain)
        steps = tuple(
            (n.incoming_strategy, n.state.history[-1][1], n.state.history[-1][2],
             n.cached_breakdown)
            for n in chain[1:]
        )
        candidates.append(RecallPath(
            steps=steps, path_value=value, terminal=node.terminal,
            node_ids=tuple(n.node_id for n in chain),
        ))
    candidates.sort(key=lambda p: -p.path_value)  # stable: discovery-order ties
    return candidates[:config.top_k]


def run_search(q_u: str, r_ans: str, bank: MemoryBank,
               search_config: SearchConfig, reward_config: RewardConfig,
               oracles: Oracles,
               strategies: Optional[Sequence[RecallStrategy]] = None) -> SearchResult:
    """Full search: T iterations of select/expand/simulate/backpropagate."""
    if not q_u.strip():
        raise ValueError("q_u must be non-empty")
    pool = list(strategies) if strategies is not None else strategy_pool()
    rng = random.Random(search_config.rng_seed)
    root_state = DialogueState(
        q_u=q_u, history=(), turn=0,
        retrieved=tuple(retrieve(bank, q_u, search_config.retrieval_j)),
    )
    tree = RecallTree(root_state, pool)
    log: list[dict] = []
    failed = 0
    for i in range(search_config.iterations):
        epsilon = epsilon_at(search_config, i)
        try:
            node = tree.root
            path = [node]
            while node.terminal is None and tree.fully_expanded(node):
                sid = uct_select(node, search_config.exploration_c, tree)
                node = tree.nodes[node.children[sid]]
                path.append(node)
            if node.terminal is not None:
                r_end = node.cached_breakdown.composite
                rollout_depth = 0
                terminal = node.terminal
            else:
                sid = next(s for s in tree.pool_ids if s not in node.children)
                strategy = next(s for s in tree.pool if s.strategy_id == sid)
                child = expand(tree, node, strategy, bank, r_ans, oracles,
                               reward_config, search_config.retrieval_j)
                path.append(child)
                if child.terminal is not None:
                    r_end = child.cached_breakdown.composite
                    rollout_depth = 0
                    terminal = child.terminal
                else:
                    r_end, rollout_depth, terminal = simulate(
                        tree, child, epsilon, rng, bank, r_ans, oracles,
                        reward_config, search_config)
        except OracleError as exc:
            failed += 1
            logger.warning("iteration %d aborted: %s", i, exc)
            log.append({"iteration": i, "epsilon": epsilon, "error": str(exc)})
            continue
        backpropagate(path, r_end, search_config.discount)
        log.append({
            "iteration": i,
            "epsilon": epsilon,
            "path": [n.node_id for n in path],
            "strategies": [n.incoming_strategy for n in path[1:]],
            "R_end": r_end,
            "rollout_depth": rollout_depth,
            "terminal": terminal.value,
        })
    return SearchResult(
        paths=extract_top_paths(tree, search_config),
        nodes=tree.nodes,
        root_id=tree.root.node_id,
        iteration_log=log,
        failed_iterations=failed,
    )


def write_iteration_log(log: Sequence[dict], path) -> None:
    """One JSON object per iteration; stable key order for byte-level replay."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")


def replay_q_totals(log: Sequence[dict], gamma: float) -> dict[int, float]:
    """Reconstruct per-node accumulated value from the iteration log."""
    totals: dict[int, float] = {}
    for entry in log:
        if "path" not in entry:
            continue
        leaf_depth = len(entry["path"]) - 1
        for depth, node_id in enumerate(entry["path"]):
            totals[node_id] = totals.get(node_id, 0.0) + (
                gamma ** (leaf_depth - depth)) * entry["R_end"]
    return totals
