import pytest
from fastapi.testclient import TestClient

from recall_router.config import RunConfig
from recall_router.memory_bank import MemoryBank, MemoryFragment
from recall_router.scenario_map import strategies_for, FiveWScenario
from recall_router.service import SessionService, create_app

LOCATION_IDS = {s.strategy_id for s in strategies_for(FiveWScenario.LOCATION)}


def demo_bank():
    return MemoryBank("demo", (
        MemoryFragment("f1", "demo", "I left the keys in the kitchen drawer"),
        MemoryFragment("f2", "demo", "We had dinner downtown on Friday"),
    ))


@pytest.fixture
def client(tmp_path):
    service = SessionService(RunConfig.default(), {"demo": demo_bank()},
                             event_log_path=tmp_path / "events.jsonl")
    return TestClient(create_app(service))


class TestSessionStart:
    def test_start_classifies_and_issues_scenario_cue(self, client):
        resp = client.post("/sessions", json={"bank_id": "demo",
                                              "query": "Where are my keys?"})
        assert resp.status_code == 201
        body = resp.json()
        assert body["scenario"] == "Location"
        assert body["status"] == "Active"
        assert len(body["turns"]) == 1
        assert body["turns"][0]["strategy_id"] in LOCATION_IDS
        assert body["turns"][0]["scenario"] == "Location"

    def test_empty_query_rejected(self, client):
        resp = client.post("/sessions", json={"bank_id": "demo", "query": "  "})
        assert resp.status_code == 400

    def test_unknown_bank_rejected(self, client):
        resp = client.post("/sessions", json={"bank_id": "nope", "query": "Where?"})
        assert resp.status_code == 404

    def test_inline_bank_accepted(self, client):
        resp = client.post("/sessions", json={
            "query": "Where are my keys?",
            "inline_bank": [{"text": "keys on the hall shelf"}],
        })
        assert resp.status_code == 201

    def test_deterministic_first_cue(self, client):
        payload = {"bank_id": "demo", "query": "Where are my keys?"}
        a = client.post("/sessions", json=payload).json()
        b = client.post("/sessions", json=payload).json()
        assert a["turns"][0]["cue"] == b["turns"][0]["cue"]


class TestSessionAnswer:
    def start(self, client, **extra):
        return client.post("/sessions", json={
            "bank_id": "demo", "query": "Where are my keys?", **extra}).json()

    def test_threshold_success_with_gold_answer(self, client):
        session = self.start(client, gold_answer="keys in the kitchen drawer")
        resp = client.post(f"/sessions/{session['session_id']}/answer",
                           json={"text": "keys in the kitchen drawer"})
        assert resp.json()["status"] == "Success"

    def test_failure_after_max_turns(self, client):
        session = self.start(client, gold_answer="keys in the kitchen drawer")
        sid = session["session_id"]
        body = None
        for _ in range(5):
            body = client.post(f"/sessions/{sid}/answer",
                               json={"text": "no idea at all"}).json()
        assert body["status"] == "Failure"
        assert body["turn_count"] <= 5

    def test_declared_recall_is_success(self, client):
        session = self.start(client)
        resp = client.post(f"/sessions/{session['session_id']}/answer",
                           json={"recalled": True})
        assert resp.json()["status"] == "Success"
        assert resp.json()["turns"][-1]["declared_recalled"] is True

    def test_answer_on_terminal_session_conflicts(self, client):
        session = self.start(client)
        sid = session["session_id"]
        client.post(f"/sessions/{sid}/answer", json={"recalled": True})
        resp = client.post(f"/sessions/{sid}/answer", json={"text": "more"})
        assert resp.status_code == 409

    def test_unknown_session_not_found(self, client):
        assert client.post("/sessions/zzz/answer", json={"text": "hi"}).status_code == 404

    def test_active_answer_appends_exactly_one_cue(self, client):
        session = self.start(client)
        body = client.post(f"/sessions/{session['session_id']}/answer",
                           json={"text": "maybe the hallway"}).json()
        assert body["turn_count"] == 2
        assert body["turns"][1]["answer"] is None

    def test_scenario_strategies_precede_fallback(self, client):
        session = self.start(client)
        sid = session["session_id"]
        seen = [session["turns"][0]["strategy_id"]]
        for _ in range(2):
            body = client.post(f"/sessions/{sid}/answer",
                               json={"text": "hmm not sure"}).json()
            seen.append(body["turns"][-1]["strategy_id"])
        # the first three cues exhaust the Location trio before any fallback
        assert set(seen) == LOCATION_IDS


class TestReadsAndRecovery:
    def test_get_is_idempotent_between_mutations(self, client):
        session = client.post("/sessions", json={
            "bank_id": "demo", "query": "Where are my keys?"}).json()
        sid = session["session_id"]
        a = client.get(f"/sessions/{sid}").json()
        b = client.get(f"/sessions/{sid}").json()
        assert a == b

    def test_event_log_restores_sessions_across_restart(self, tmp_path):
        log = tmp_path / "events.jsonl"
        service = SessionService(RunConfig.default(), {"demo": demo_bank()},
                                 event_log_path=log)
        client = TestClient(create_app(service))
        session = client.post("/sessions", json={
            "bank_id": "demo", "query": "Where are my keys?"}).json()
        sid = session["session_id"]
        client.post(f"/sessions/{sid}/answer", json={"text": "maybe the hallway"})
        before = client.get(f"/sessions/{sid}").json()

        revived = SessionService(RunConfig.default(), {"demo": demo_bank()},
                                 event_log_path=log)
        client2 = TestClient(create_app(revived))
        assert client2.get(f"/sessions/{sid}").json() == before


class TestAuxEndpoints:
    def test_strategies_endpoint_lists_fifteen(self, client):
        body = client.get("/strategies").json()
        assert len(body) == 15
        assert {"strategy_id", "scenario", "name", "description"} <= set(body[0])

    def test_classify_endpoint(self, client):
        assert client.post("/classify", json={"query": "Where are my keys?"}).json() \
            == {"scenario": "Location"}
        assert client.post("/classify", json={"query": " "}).status_code == 400
