import json

import pytest
from fastapi.testclient import TestClient

from relbootstrap.model import RelationLabel, validate_instance
from relbootstrap.review import (
    AnnotationDecision,
    NotLeased,
    ReviewError,
    ReviewStore,
    create_app,
    read_decision_log,
)

from conftest import make_instance


class FakeClock:
    def __init__(self, start: float = 1000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def _candidates(n: int, lang: str = "hi", prefix: str = "c"):
    return [
        make_instance(
            text=f"x{k} links y{k} .", e1=f"x{k}", e2=f"y{k}",
            lang=lang, iid=f"{prefix}{k}", grade="candidate",
        )
        for k in range(n)
    ]


def _store(n=5, mode="production", **kwargs) -> tuple[ReviewStore, FakeClock]:
    clock = FakeClock()
    store = ReviewStore(_candidates(n), mode=mode, clock=clock, **kwargs)
    return store, clock


def test_queue_rejects_non_candidates():
    with pytest.raises(ReviewError, match="candidates only"):
        ReviewStore([make_instance(grade="gold")])


# -- task serving -------------------------------------------------------------

def test_pilot_serves_each_instance_to_exactly_two():
    clock = FakeClock()
    store = ReviewStore(_candidates(100), mode="pilot", clock=clock)
    got_a = [store.next_task("annotator-a") for _ in range(100)]
    got_b = [store.next_task("annotator-b") for _ in range(100)]
    assert all(t is not None for t in got_a)
    assert all(t is not None for t in got_b)
    assert store.next_task("annotator-c") is None
    assert store.next_task("annotator-a") is None  # never twice to the same person


def test_pilot_n_per_language_caps_queue():
    instances = _candidates(30, lang="hi") + _candidates(30, lang="bn", prefix="b")
    store = ReviewStore(instances, mode="pilot", n_per_language=10, clock=FakeClock())
    assert store.stats()["instances"] == 20


def test_production_never_reserves_decided():
    store, _clock = _store(3)
    task = store.next_task("a")
    iid = task["instance"]["id"]
    store.submit_decision(AnnotationDecision(iid, "a", "accept"))
    seen = []
    while (t := store.next_task("a")) is not None:
        seen.append(t["instance"]["id"])
    assert iid not in seen
    # nobody else is served it either
    while (t := store.next_task("b")) is not None:
        assert t["instance"]["id"] != iid


def test_lease_timeout_reserves_to_another(monkeypatch):
    store, clock = _store(1, lease_timeout=60.0)
    t1 = store.next_task("a")
    assert t1 is not None
    assert store.next_task("b") is None  # leased to a
    clock.advance(61.0)
    t2 = store.next_task("b")
    assert t2 is not None and t2["instance"]["id"] == t1["instance"]["id"]


def test_task_payload_contents():
    catalog = {"P26": RelationLabel(id="P26", name="spouse", description="is married to")}
    store = ReviewStore(_candidates(1), catalog=catalog, clock=FakeClock())
    task = store.next_task("a")
    assert task["relation"]["name"] == "spouse"
    assert task["relation"]["description"] == "is married to"
    assert "wikidata" in task["relation"]["link"].lower()
    assert "PERSON" in task["entity_types"]
    assert task["lease_deadline"] > 1000.0


# -- decisions ----------------------------------------------------------------

def test_accept_exports_gold():
    store, _ = _store(2)
    task = store.next_task("a")
    store.submit_decision(AnnotationDecision(task["instance"]["id"], "a", "accept"))
    export = store.export_gold()
    assert len(export.instances) == 1
    gold = export.instances[0]
    assert gold.grade == "gold"
    assert validate_instance(gold) == []
    assert len(export.undecided) == 1


def test_correct_applies_spans_and_types():
    store, _ = _store(1)
    task = store.next_task("a")
    iid = task["instance"]["id"]
    text = task["instance"]["text"]
    # move e1 to cover "links"
    start = text.index("links")
    decision = AnnotationDecision(
        iid, "a", "correct",
        corrected_e1=(start, start + 5), corrected_e1_type="ORG",
    )
    store.submit_decision(decision)
    export = store.export_gold()
    gold = export.instances[0]
    assert gold.e1.surface == "links"
    assert gold.e1.etype == "ORG"
    assert validate_instance(gold) == []


def test_correct_requires_some_correction():
    with pytest.raises(ValueError, match="correction"):
        AnnotationDecision("i", "a", "correct")


def test_invalid_correction_rejected():
    store, _ = _store(1)
    task = store.next_task("a")
    iid = task["instance"]["id"]
    with pytest.raises(ReviewError, match="out of bounds"):
        store.submit_decision(AnnotationDecision(
            iid, "a", "correct", corrected_e1=(0, 10_000),
        ))
    with pytest.raises(ReviewError, match="overlap"):
        store.submit_decision(AnnotationDecision(
            iid, "a", "correct", corrected_e1=(0, len(task["instance"]["text"])),
        ))


def test_unknown_instance_rejected():
    store, _ = _store(1)
    with pytest.raises(ReviewError, match="unknown instance"):
        store.submit_decision(AnnotationDecision("ghost", "a", "accept"))


def test_submission_requires_lease():
    store, _ = _store(2)
    store.next_task("a")  # a holds c0
    with pytest.raises(NotLeased):
        store.submit_decision(AnnotationDecision("c0", "b", "accept"))


def test_expired_unclaimed_submission_allowed():
    store, clock = _store(1, lease_timeout=60.0)
    task = store.next_task("a")
    clock.advance(120.0)
    ack = store.submit_decision(AnnotationDecision(task["instance"]["id"], "a", "discard"))
    assert ack["status"] == "ok"


def test_resubmission_replaces():
    store, _ = _store(1, decisions_path=None)
    task = store.next_task("a")
    iid = task["instance"]["id"]
    store.submit_decision(AnnotationDecision(iid, "a", "accept"))
    store.submit_decision(AnnotationDecision(iid, "a", "discard"))
    export = store.export_gold()
    assert export.instances == ()
    digest = store.state_digest()
    assert digest["decisions"][iid]["a"]["action"] == "discard"
    assert len(digest["decisions"][iid]) == 1


def test_discard_excluded_from_export():
    store, _ = _store(4)
    kept, dropped = [], []
    for k in range(4):
        task = store.next_task("a")
        iid = task["instance"]["id"]
        action = "accept" if k % 2 == 0 else "discard"
        (kept if action == "accept" else dropped).append(iid)
        store.submit_decision(AnnotationDecision(iid, "a", action))
    export = store.export_gold()
    assert {i.id for i in export.instances} == set(kept)


def test_export_stats_shape():
    instances = _candidates(3, lang="hi") + _candidates(2, lang="bn", prefix="b")
    store = ReviewStore(instances, clock=FakeClock())
    for _ in range(5):
        task = store.next_task("a")
        store.submit_decision(AnnotationDecision(task["instance"]["id"], "a", "accept"))
    export = store.export_gold()
    assert export.stats == {
        "bn": {"sentences": 2, "distinct_entity_pairs": 2},
        "hi": {"sentences": 3, "distinct_entity_pairs": 3},
    }


# -- agreement ----------------------------------------------------------------

def test_pilot_agreement_87_of_100():
    clock = FakeClock()
    store = ReviewStore(_candidates(100), mode="pilot", clock=clock)
    for k in range(100):
        ta = store.next_task("a")
        store.submit_decision(AnnotationDecision(ta["instance"]["id"], "a", "accept"))
    for k in range(100):
        tb = store.next_task("b")
        action = "discard" if k < 13 else "accept"
        store.submit_decision(AnnotationDecision(tb["instance"]["id"], "b", action))
    ratio, n = store.agreement()
    assert n == 100
    assert ratio == pytest.approx(0.87)
    assert ratio > 0.85


# -- event sourcing -----------------------------------------------------------

def test_replay_reconstructs_state(tmp_path):
    log_path = tmp_path / "decisions.log"
    instances = _candidates(10)
    clock = FakeClock()
    store = ReviewStore(instances, decisions_path=log_path, clock=clock)
    for k in range(8):
        task = store.next_task(f"annot{k % 3}")
        iid = task["instance"]["id"]
        action = ("accept", "discard", "correct")[k % 3]
        decision = AnnotationDecision(
            iid, f"annot{k % 3}", action,
            corrected_e1=(0, 2) if action == "correct" else None,
        )
        store.submit_decision(decision)
    replayed = ReviewStore.replay(instances, log_path, clock=clock)
    assert replayed.state_digest() == store.state_digest()
    a = replayed.export_gold()
    b = store.export_gold()
    assert a.instances == b.instances and a.stats == b.stats


def test_log_is_append_only_json_lines(tmp_path):
    log_path = tmp_path / "decisions.log"
    store = ReviewStore(_candidates(2), decisions_path=log_path, clock=FakeClock())
    t = store.next_task("a")
    store.submit_decision(AnnotationDecision(t["instance"]["id"], "a", "accept"))
    store.submit_decision(AnnotationDecision(t["instance"]["id"], "a", "discard"))
    lines = log_path.read_text().strip().splitlines()
    assert len(lines) == 2  # both submissions kept in history
    for line in lines:
        json.loads(line)
    assert len(read_decision_log(log_path)) == 2


# -- HTTP API -----------------------------------------------------------------

@pytest.fixture
def api_client():
    clock = FakeClock()
    catalog = {"P26": RelationLabel(id="P26", name="spouse", description="married")}
    store = ReviewStore(_candidates(3), catalog=catalog, clock=clock)
    return TestClient(create_app(store)), store


def test_api_next_and_decide(api_client):
    client, _store = api_client
    r = client.get("/api/tasks/next", params={"annotator": "a"})
    assert r.status_code == 200
    task = r.json()["task"]
    assert task["relation"]["name"] == "spouse"
    r = client.post("/api/decisions", json={
        "instance_id": task["instance"]["id"], "annotator": "a", "action": "accept",
    })
    assert r.status_code == 200
    r = client.get("/api/export")
    body = r.json()
    assert len(body["instances"]) == 1
    assert body["instances"][0]["grade"] == "gold"


def test_api_empty_pool_returns_null_task(api_client):
    client, _ = api_client
    for _ in range(3):
        client.get("/api/tasks/next", params={"annotator": "a"})
    r = client.get("/api/tasks/next", params={"annotator": "a"})
    assert r.status_code == 200
    assert r.json()["task"] is None


def test_api_foreign_lease_conflict(api_client):
    client, _ = api_client
    task = client.get("/api/tasks/next", params={"annotator": "a"}).json()["task"]
    r = client.post("/api/decisions", json={
        "instance_id": task["instance"]["id"], "annotator": "b", "action": "accept",
    })
    assert r.status_code == 409


def test_api_validation_failure_detail(api_client):
    client, _ = api_client
    task = client.get("/api/tasks/next", params={"annotator": "a"}).json()["task"]
    r = client.post("/api/decisions", json={
        "instance_id": task["instance"]["id"], "annotator": "a",
        "action": "correct", "corrected_e1": [0, 99999],
    })
    assert r.status_code == 400
    assert "out of bounds" in r.json()["detail"]


def test_api_stats_and_agreement_endpoints(api_client):
    client, _ = api_client
    r = client.get("/api/stats")
    assert r.json()["instances"] == 3
    r = client.get("/api/agreement")
    assert r.status_code == 200
    assert set(r.json()) == {"agreement", "n"}


def test_api_root_serves_html(api_client):
    client, _ = api_client
    r = client.get("/")
    assert r.status_code == 200
    assert "html" in r.text.lower()
