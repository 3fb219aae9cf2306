import pytest

from recall_router.memory_bank import MemoryBank, MemoryFragment
from recall_router.oracles import CueQuery, OracleConfig, UserResponse


class FakeOracles:
    """Offline oracle stand-in with a programmable similarity function.

    Cues and responses are synthesized deterministically from the strategy id
    and turn, so searches are fully replayable without fixtures.
    """

    def __init__(self, similarity_fn=None, elements_fn=None):
        self.config = OracleConfig()
        self._similarity_fn = similarity_fn or (lambda a, b: 1.0 if a == b else 0.0)
        self._elements_fn = elements_fn or (lambda text: set())

    def generate_cue(self, state, strategy):
        return CueQuery(f"cue {strategy.strategy_id} turn {state.turn}",
                        strategy.strategy_id)

    def simulate_user(self, bank, cue, history):
        return UserResponse(f"response {cue.strategy_id}", len(history))

    def similarity(self, a, b):
        return self._similarity_fn(a, b)

    def detect_elements(self, text):
        return self._elements_fn(text)


def bandit_oracles(good_strategy_id, good=0.9, bad=0.1):
    """Responses from the good strategy score `good`, all others `bad`."""

    def sim(a, b):
        return good if good_strategy_id in a else bad

    return FakeOracles(similarity_fn=sim)


@pytest.fixture
def small_bank():
    return MemoryBank(
        bank_id="demo",
        fragments=(
            MemoryFragment("f1", "demo", "I left the keys in the kitchen drawer after shopping"),
            MemoryFragment("f2", "demo", "We had dinner at the restaurant downtown on Friday"),
            MemoryFragment("f3", "demo", "Dr. Lee renewed my prescription at the clinic"),
        ),
    )
