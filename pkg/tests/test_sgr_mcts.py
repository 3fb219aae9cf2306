import math
import random

import pytest

from conftest import FakeOracles, bandit_oracles
from recall_router.memory_bank import MemoryBank, MemoryFragment
from recall_router.reward import RewardBreakdown, RewardConfig, Terminal
from recall_router.scenario_map import strategy_pool
from recall_router.sgr_mcts import (DialogueState, RecallTree, SearchConfig, TreeNode,
                                    backpropagate, epsilon_at, expand, extract_top_paths,
                                    replay_q_totals, run_search, simulate, uct_score,
                                    uct_select)

POOL3 = strategy_pool()[:3]
ACC_ONLY = RewardConfig(w_accuracy=1.0, w_focus=0.0, w_depth=0.0)


def empty_bank():
    return MemoryBank("b", (MemoryFragment("f1", "b", "keys kitchen drawer"),))


def make_tree(pool=POOL3):
    state = DialogueState("Where are my keys?", (), (), 0)
    return RecallTree(state, pool)


def attach_child(tree, parent, sid, q_total, visits, terminal=None, composite=0.5):
    state = DialogueState(
        parent.state.q_u,
        parent.state.history + ((sid, f"cue {sid}", f"resp {sid}"),),
        (), parent.state.turn + 1)
    child = tree._new_node(parent.node_id, sid, state)
    child.q_total, child.visits = q_total, visits
    child.cached_breakdown = RewardBreakdown(0.5, 0.5, 2, composite,
                                             terminal or Terminal.NOT_TERMINAL)
    if terminal is not None:
        child.terminal = terminal
    parent.children[sid] = child.node_id
    return child


class TestUctSelect:
    def test_hand_computed_uct_value(self):
        got = uct_score(q_total=2.0, visits=4, parent_visits=10, c=1.414)
        expected = 0.5 + 1.414 * math.sqrt(math.log(10) / 4)
        assert got == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(1.5727, abs=5e-4)

    def test_unvisited_child_has_priority(self):
        tree = make_tree()
        root = tree.root
        attach_child(tree, root, POOL3[0].strategy_id, 5.0, 5)
        attach_child(tree, root, POOL3[1].strategy_id, 0.0, 0)
        attach_child(tree, root, POOL3[2].strategy_id, 4.0, 4)
        root.visits = 9
        assert uct_select(root, 1.414, tree) == POOL3[1].strategy_id

    def test_tie_breaks_by_pool_order(self):
        tree = make_tree()
        root = tree.root
        for s in POOL3:
            attach_child(tree, root, s.strategy_id, 1.0, 2)
        root.visits = 6
        assert uct_select(root, 1.414, tree) == POOL3[0].strategy_id

    def test_not_fully_expanded_is_contract_error(self):
        tree = make_tree()
        attach_child(tree, tree.root, POOL3[0].strategy_id, 1.0, 1)
        with pytest.raises(ValueError, match="not fully expanded"):
            uct_select(tree.root, 1.414, tree)


class TestExpand:
    def test_success_branch_marks_terminal(self):
        tree = make_tree()
        oracles = FakeOracles(similarity_fn=lambda a, b: 0.95)
        child = expand(tree, tree.root, POOL3[0], empty_bank(), "answer",
                       oracles, RewardConfig(), 1)
        assert child.terminal is Terminal.SUCCESS
        assert child.state.turn == 1
        assert tree.root.children[POOL3[0].strategy_id] == child.node_id

    def test_failure_at_turn_cap(self):
        tree = make_tree()
        oracles = FakeOracles(similarity_fn=lambda a, b: 0.0)
        node = tree.root
        for turn in range(RewardConfig().max_turns):
            node = expand(tree, node, POOL3[0], empty_bank(), "answer",
                          oracles, RewardConfig(), 1)
        assert node.terminal is Terminal.FAILURE

    def test_double_expansion_rejected(self):
        tree = make_tree()
        oracles = FakeOracles(similarity_fn=lambda a, b: 0.0)
        expand(tree, tree.root, POOL3[0], empty_bank(), "answer", oracles,
               RewardConfig(), 1)
        with pytest.raises(ValueError, match="already expanded"):
            expand(tree, tree.root, POOL3[0], empty_bank(), "answer", oracles,
                   RewardConfig(), 1)


class TestSimulate:
    def test_epsilon_one_follows_seeded_uniform_draws(self):
        cfg = SearchConfig(rng_seed=7)
        tree = make_tree()
        oracles = FakeOracles(similarity_fn=lambda a, b: 0.0)
        child = expand(tree, tree.root, POOL3[0], empty_bank(), "answer",
                       oracles, ACC_ONLY, 1)

        expected = []
        rng = random.Random(99)
        for _ in range(RewardConfig().max_turns - 1):
            rng.random()
            expected.append(tree.pool_ids[rng.randrange(len(tree.pool_ids))])

        calls = []
        class Spy(FakeOracles):
            def generate_cue(self, state, strategy):
                calls.append(strategy.strategy_id)
                return super().generate_cue(state, strategy)
        r_end, depth, terminal = simulate(tree, child, 1.0, random.Random(99),
                                          empty_bank(), "answer", Spy(lambda a, b: 0.0),
                                          ACC_ONLY, cfg)
        assert calls == expected
        assert terminal is Terminal.FAILURE

    def test_greedy_rollout_reaches_scripted_success(self):
        tree = make_tree()
        good = POOL3[0].strategy_id
        oracles = bandit_oracles(good)
        child = expand(tree, tree.root, POOL3[1], empty_bank(), "answer",
                       oracles, ACC_ONLY, 1)
        # greedy (epsilon=0) picks optimistic 1.0 prior -> first pool strategy,
        # which succeeds immediately at composite 0.9
        r_end, depth, terminal = simulate(tree, child, 0.0, random.Random(0),
                                          empty_bank(), "answer", oracles,
                                          ACC_ONLY, SearchConfig())
        assert (r_end, depth, terminal) == (0.9, 1, Terminal.SUCCESS)

    def test_rollout_hits_turn_cap(self):
        tree = make_tree()
        oracles = FakeOracles(similarity_fn=lambda a, b: 0.4)
        child = expand(tree, tree.root, POOL3[0], empty_bank(), "answer",
                       oracles, ACC_ONLY, 1)
        r_end, depth, terminal = simulate(tree, child, 0.0, random.Random(0),
                                          empty_bank(), "answer", oracles,
                                          ACC_ONLY, SearchConfig())
        assert terminal is Terminal.FAILURE
        assert depth == RewardConfig().max_turns - child.state.turn
        assert r_end == pytest.approx(0.4)


class TestBackpropagate:
    def test_undiscounted_gain(self):
        tree = make_tree()
        a = attach_child(tree, tree.root, POOL3[0].strategy_id, 0, 0)
        b = attach_child(tree, a, POOL3[1].strategy_id, 0, 0)
        backpropagate([tree.root, a, b], 1.0, 1.0)
        assert tree.root.q_total == a.q_total == b.q_total == 1.0
        assert tree.root.visits == a.visits == b.visits == 1

    def test_discounted_gain_by_depth(self):
        tree = make_tree()
        a = attach_child(tree, tree.root, POOL3[0].strategy_id, 0, 0)
        b = attach_child(tree, a, POOL3[1].strategy_id, 0, 0)
        c = attach_child(tree, b, POOL3[2].strategy_id, 0, 0)
        backpropagate([tree.root, a, b, c], 1.0, 0.9)
        assert a.q_total == pytest.approx(0.9 ** 2)  # depth 1 on a depth-3 path
        assert c.q_total == pytest.approx(1.0)
        assert tree.root.q_total == pytest.approx(0.9 ** 3)


class TestRunSearch:
    def test_single_iteration_tree_shape(self):
        cfg = SearchConfig(iterations=1, rng_seed=0)
        result = run_search("Where are my keys?", "answer", empty_bank(), cfg,
                            ACC_ONLY, FakeOracles(similarity_fn=lambda a, b: 0.0),
                            strategies=POOL3)
        assert len(result.nodes) == 2  # root plus exactly one expanded child

    def test_root_visits_equal_completed_iterations(self):
        cfg = SearchConfig(iterations=40, rng_seed=3)
        result = run_search("Where are my keys?", "answer", empty_bank(), cfg,
                            ACC_ONLY, bandit_oracles(POOL3[1].strategy_id),
                            strategies=POOL3)
        assert result.nodes[result.root_id].visits == 40 - result.failed_iterations
        assert result.failed_iterations == 0

    def test_iteration_log_replays_node_values(self):
        cfg = SearchConfig(iterations=60, rng_seed=5)
        result = run_search("Where are my keys?", "answer", empty_bank(), cfg,
                            ACC_ONLY, bandit_oracles(POOL3[2].strategy_id),
                            strategies=POOL3)
        totals = replay_q_totals(result.iteration_log, cfg.discount)
        for node_id, node in result.nodes.items():
            assert totals.get(node_id, 0.0) == pytest.approx(node.q_total, abs=1e-9)

    def test_epsilon_schedule(self):
        cfg = SearchConfig(iterations=30, rng_seed=0)
        result = run_search("q?", "answer", empty_bank(), cfg, ACC_ONLY,
                            FakeOracles(similarity_fn=lambda a, b: 0.0),
                            strategies=POOL3)
        for entry in result.iteration_log:
            i = entry["iteration"]
            assert entry["epsilon"] == max(0.05, 1.0 - 0.05 * i)
            assert entry["epsilon"] == epsilon_at(cfg, i)

    def test_bandit_prefers_winning_strategy(self):
        good = POOL3[1].strategy_id
        cfg = SearchConfig(iterations=120, rng_seed=11)
        result = run_search("q?", "answer", empty_bank(), cfg, ACC_ONLY,
                            bandit_oracles(good), strategies=POOL3)
        assert result.paths
        assert result.paths[0].steps[0][0] == good
        assert result.paths[0].terminal is Terminal.SUCCESS

    def test_paths_end_terminal_and_respect_turn_cap(self):
        cfg = SearchConfig(iterations=80, rng_seed=2)
        result = run_search("q?", "answer", empty_bank(), cfg, ACC_ONLY,
                            bandit_oracles(POOL3[0].strategy_id), strategies=POOL3)
        for path in result.paths:
            assert path.terminal in (Terminal.SUCCESS, Terminal.FAILURE)
            assert len(path.steps) <= RewardConfig().max_turns

    def test_determinism_same_seed_same_log(self):
        cfg = SearchConfig(iterations=50, rng_seed=21)
        kwargs = dict(search_config=cfg, reward_config=ACC_ONLY,
                      strategies=POOL3)
        a = run_search("q?", "answer", empty_bank(),
                       oracles=bandit_oracles(POOL3[0].strategy_id), **kwargs)
        b = run_search("q?", "answer", empty_bank(),
                       oracles=bandit_oracles(POOL3[0].strategy_id), **kwargs)
        assert a.iteration_log == b.iteration_log

    def test_empty_query_rejected(self):
        with pytest.raises(ValueError):
            run_search("  ", "answer", empty_bank(), SearchConfig(), ACC_ONLY,
                       FakeOracles())

    def test_no_terminal_path_is_explicit_empty_result(self):
        cfg = SearchConfig(iterations=2, rng_seed=0)
        result = run_search("q?", "answer", empty_bank(), cfg, ACC_ONLY,
                            FakeOracles(similarity_fn=lambda a, b: 0.0),
                            strategies=POOL3)
        assert result.paths == []

    def test_edges_only_carry_pool_strategies(self):
        cfg = SearchConfig(iterations=60, rng_seed=9)
        result = run_search("q?", "answer", empty_bank(), cfg, ACC_ONLY,
                            bandit_oracles(POOL3[0].strategy_id), strategies=POOL3)
        pool_ids = {s.strategy_id for s in POOL3}
        for node in result.nodes.values():
            assert set(node.children) <= pool_ids
            assert len(node.children) <= 15


class TestExtractTopPaths:
    def brute_force(self, tree, config):
        results = []
        for node_id in sorted(tree.nodes):
            node = tree.nodes[node_id]
            if node.terminal is None:
                continue
            value, cursor, length = 0.0, node, 0
            while cursor is not None:
                value += cursor.q_total
                length += 1
                cursor = tree.nodes[cursor.parent_id] if cursor.parent_id is not None else None
            if config.path_value_mode == "mean":
                value /= length
            results.append((node_id, value))
        results.sort(key=lambda pair: -pair[1])
        return [nid for nid, _ in results[:config.top_k]]

    def test_matches_brute_force_on_random_trees(self):
        rng = random.Random(42)
        pool = strategy_pool()
        for trial in range(25):
            tree = make_tree(pool)
            nodes = [tree.root]
            for _ in range(rng.randrange(5, 95)):
                parent = rng.choice([n for n in nodes if n.terminal is None])
                available = [s.strategy_id for s in pool if s.strategy_id not in parent.children]
                if not available:
                    continue
                sid = rng.choice(available)
                terminal = rng.choice([None, None, Terminal.SUCCESS, Terminal.FAILURE])
                child = attach_child(tree, parent, sid, rng.uniform(0, 5),
                                     rng.randrange(1, 9), terminal)
                nodes.append(child)
            cfg = SearchConfig(top_k=5)
            got = [p.node_ids[-1] for p in extract_top_paths(tree, cfg)]
            assert got == self.brute_force(tree, cfg)
