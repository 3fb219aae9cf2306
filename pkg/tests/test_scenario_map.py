import pytest

from recall_router.scenario_map import (ClassificationError, FiveWScenario,
                                        RemoteClassifier, RuleClassifier, classify,
                                        get_strategy, strategies_for, strategy_pool)


class TestStrategyPool:
    def test_fifteen_strategies_three_per_scenario(self):
        pool = strategy_pool()
        assert len(pool) == 15
        for scenario in FiveWScenario:
            assert len(strategies_for(scenario)) == 3
        assert len({s.strategy_id for s in pool}) == 15

    def test_stable_scenario_order(self):
        order = [s.scenario for s in strategy_pool()]
        expected = [FiveWScenario.EVENT] * 3 + [FiveWScenario.PERSON] * 3 + \
            [FiveWScenario.LOCATION] * 3 + [FiveWScenario.TEMPORAL] * 3 + \
            [FiveWScenario.DECISION] * 3
        assert order == expected

    def test_location_trio_names(self):
        names = [s.name for s in strategies_for(FiveWScenario.LOCATION)]
        assert names == ["Multiple Associations", "Immersive Recall", "Spatial Cues"]

    def test_all_names(self):
        names = {s.name for s in strategy_pool()}
        assert names == {
            "Scenario Reconstruction", "Interpersonal Interaction", "Sensory Activation",
            "Appearance Clues", "Role Connection", "Emotion Trigger",
            "Multiple Associations", "Immersive Recall", "Spatial Cues",
            "Timeline Rewind", "Key Milestones", "Routine Pattern",
            "Background motivation", "Option Comparison", "Experience Support",
        }

    def test_unknown_strategy_id_errors(self):
        with pytest.raises(KeyError):
            get_strategy("mind_palace")


class TestClassify:
    def test_where_query_is_location(self):
        assert classify("Where are my keys?") is FiveWScenario.LOCATION

    def test_when_query_is_temporal(self):
        assert classify("When did I take my medication?") is FiveWScenario.TEMPORAL

    def test_empty_query_rejected(self):
        with pytest.raises(ValueError):
            classify("   ")

    def test_default_is_event(self):
        assert classify("My memory of the trip is fuzzy") is FiveWScenario.EVENT

    def test_precedence_when_before_who(self):
        # 'when' outranks 'who' in the fixed precedence order
        assert classify("When did I meet the person who fixed the roof?") \
            is FiveWScenario.TEMPORAL

    def test_rule_backend_is_deterministic(self):
        backend = RuleClassifier()
        q = "Who was at the party last night?"
        assert backend.classify(q) is backend.classify(q) is FiveWScenario.PERSON

    def test_total_on_arbitrary_nonempty_input(self):
        for q in ["???", "zzz", "la la la", "42", "Who? Where? When?"]:
            assert classify(q) in set(FiveWScenario)


class FakeChat:
    def __init__(self, reply=None, error=None):
        self.reply, self.error = reply, error

    def complete(self, prompt, **kwargs):
        if self.error:
            raise RuntimeError(self.error)
        return self.reply


class TestRemoteClassifier:
    def test_valid_label_passes_through(self):
        backend = RemoteClassifier(FakeChat(reply="Temporal"))
        assert backend.classify("When?") is FiveWScenario.TEMPORAL

    def test_invalid_label_is_protocol_error(self):
        backend = RemoteClassifier(FakeChat(reply="Vibes"))
        with pytest.raises(ClassificationError, match="Vibes"):
            backend.classify("When?")

    def test_network_failure_carries_cause(self):
        backend = RemoteClassifier(FakeChat(error="connection refused"))
        with pytest.raises(ClassificationError, match="connection refused"):
            backend.classify("When?")
