"""Strategy-guided memory recall engine.

Classifies forgetting queries into the five 5W scenarios, searches the
15-strategy recall pool with a hierarchical Monte Carlo Tree Search driven
by a three-part reward, emits instruction-tuning records, scores responses
with the balance-of-recall metric, and hosts live recall sessions over HTTP.
"""

__version__ = "0.1.0"

from recall_router.scenario_map import FiveWScenario, RecallStrategy, strategy_pool

__all__ = ["FiveWScenario", "RecallStrategy", "strategy_pool", "__version__"]
