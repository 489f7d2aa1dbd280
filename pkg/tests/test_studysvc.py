import numpy as np
import pytest
from fastapi.testclient import TestClient

from vizcomplexity.dataset import load_catalog
from vizcomplexity.ranking import RankingConfig
from vizcomplexity.studysvc import (
    CONTROL_IMAGE_ID,
    OPERATOR_TOKEN_ENV,
    DuplicateResponse,
    InvalidChoice,
    InvalidToken,
    SessionRejected,
    StageClosed,
    StageHasActiveSessions,
    Study,
    ViewportTooSmall,
    create_app,
)

VIEW = (1280, 800)
CFG = RankingConfig(stage_pair_count=8)


@pytest.fixture
def study(tmp_catalog, tmp_path):
    catalog_path, _ = tmp_catalog
    return Study(load_catalog(catalog_path), log_path=tmp_path / "log.jsonl",
                 cfg=CFG, seed=3)


def answer_all(study, session, fail_attention=False, fail_first_only=False):
    """Drive a session to completion (or rejection); returns trial records."""
    served = []
    failed = 0
    while True:
        try:
            trial = study.next_trial(session.session_id)
        except (SessionRejected, StopIteration):
            return served
        except Exception:
            return served
        a, b = trial["pair"]
        if trial["is_attention_check"]:
            should_fail = fail_attention or (fail_first_only and failed == 0)
            choice = CONTROL_IMAGE_ID if should_fail else a
            if should_fail:
                failed += 1
        else:
            choice = max(a, b)
        served.append(trial)
        study.record_response(session.session_id, trial["token"], choice, 1.5)
        if study.get_session(session.session_id).status != "active":
            return served


class TestSessions:
    def test_small_viewport_rejected(self, study):
        with pytest.raises(ViewportTooSmall):
            study.create_session("r", (1024, 700))
        with pytest.raises(ViewportTooSmall):
            study.create_session("r", (1028, 700))

    def test_session_has_pairs_plus_two_attention_trials(self, study):
        s = study.create_session("r", VIEW)
        assert len(s.queue) == CFG.stage_pair_count + 2
        assert len(s.attention_positions) == 2
        attention = [q for q in s.queue if q[2]]
        assert all(q[1] == CONTROL_IMAGE_ID for q in attention)

    def test_next_trial_idempotent_until_answered(self, study):
        s = study.create_session("r", VIEW)
        t1 = study.next_trial(s.session_id)
        t2 = study.next_trial(s.session_id)
        assert t1 == t2
        study.record_response(s.session_id, t1["token"], t1["pair"][0], 1.0)
        t3 = study.next_trial(s.session_id)
        assert t3["token"] != t1["token"]

    def test_duplicate_token_rejected_without_double_count(self, study):
        s = study.create_session("r", VIEW)
        t = study.next_trial(s.session_id)
        study.record_response(s.session_id, t["token"], t["pair"][0], 1.0)
        before = study.get_session(s.session_id).progress
        with pytest.raises(DuplicateResponse):
            study.record_response(s.session_id, t["token"], t["pair"][0], 1.0)
        assert study.get_session(s.session_id).progress == before

    def test_unknown_token_rejected(self, study):
        s = study.create_session("r", VIEW)
        with pytest.raises(InvalidToken):
            study.record_response(s.session_id, "bogus", "x", 1.0)

    def test_choice_outside_pair_rejected(self, study):
        s = study.create_session("r", VIEW)
        t = study.next_trial(s.session_id)
        with pytest.raises(InvalidChoice):
            study.record_response(s.session_id, t["token"], "not-a-member", 1.0)

    def test_completed_session_counts(self, study):
        s = study.create_session("alice", VIEW)
        served = answer_all(study, s)
        assert len(served) == CFG.stage_pair_count + 2
        assert sum(t["is_attention_check"] for t in served) == 2
        assert study.get_session(s.session_id).status == "complete"

    def test_attention_failure_rejects_session(self, study):
        s = study.create_session("bob", VIEW)
        answer_all(study, s, fail_attention=True)
        assert study.get_session(s.session_id).status == "rejected"
        with pytest.raises(SessionRejected):
            study.next_trial(s.session_id)

    def test_sessions_get_disjoint_pairs_where_possible(self, study):
        s1 = study.create_session("a", VIEW)
        s2 = study.create_session("b", VIEW)
        p1 = {frozenset(q[:2]) for q in s1.queue if not q[2]}
        p2 = {frozenset(q[:2]) for q in s2.queue if not q[2]}
        assert not p1 & p2


class TestStageLifecycle:
    def test_rejected_sessions_contribute_nothing(self, study):
        s = study.create_session("bob", VIEW)
        answer_all(study, s, fail_attention=True)
        report = study.close_stage()
        assert report["valid_trials"] == 0
        assert study.ranker.total_updates == 0

    def test_attention_trials_never_reach_the_matrix(self, study):
        s = study.create_session("alice", VIEW)
        answer_all(study, s)
        study.close_stage()
        assert study.ranker.matrix.total == CFG.stage_pair_count
        assert CONTROL_IMAGE_ID not in study.ranker.states

    def test_active_sessions_block_close_unless_forced(self, study):
        study.create_session("slow", VIEW)
        with pytest.raises(StageHasActiveSessions):
            study.close_stage()
        report = study.close_stage(force=True)
        assert report["valid_trials"] == 0

    def test_converged_study_refuses_new_sessions(self, study):
        # drive stages until convergence with deterministic raters
        for _ in range(40):
            if study.closed:
                break
            s = study.create_session("r", VIEW)
            answer_all(study, s)
            study.close_stage()
        assert study.closed
        with pytest.raises(StageClosed):
            study.create_session("late", VIEW)


class TestReplay:
    def test_replay_reproduces_scores_bit_for_bit(self, study, tmp_catalog,
                                                  tmp_path):
        catalog_path, _ = tmp_catalog
        for rater, fail in (("a", False), ("b", True), ("c", False)):
            s = study.create_session(rater, VIEW)
            answer_all(study, s, fail_attention=fail)
        study.close_stage()
        s = study.create_session("d", VIEW)
        answer_all(study, s)
        study.close_stage(force=True)

        twin = Study(load_catalog(catalog_path),
                     log_path=tmp_path / "log.jsonl", cfg=CFG, seed=3)
        assert twin.scores() == study.scores()
        assert twin.stage_index == study.stage_index
        assert np.array_equal(twin.ranker.matrix.wins,
                              study.ranker.matrix.wins)

    def test_restart_mid_session_preserves_token(self, study, tmp_catalog,
                                                 tmp_path):
        catalog_path, _ = tmp_catalog
        s = study.create_session("alice", VIEW)
        t = study.next_trial(s.session_id)
        study.record_response(s.session_id, t["token"], t["pair"][0], 1.0)
        pending = study.next_trial(s.session_id)

        twin = Study(load_catalog(catalog_path),
                     log_path=tmp_path / "log.jsonl", cfg=CFG, seed=3)
        resumed = twin.next_trial(s.session_id)
        assert resumed["token"] == pending["token"]
        assert resumed["pair"] == pending["pair"]
        # the already-consumed token stays consumed after restart
        with pytest.raises(DuplicateResponse):
            twin.record_response(s.session_id, t["token"], t["pair"][0], 1.0)


class TestHttpApi:
    @pytest.fixture
    def client(self, study):
        return TestClient(create_app(study))

    def test_viewport_enforced(self, client):
        r = client.get("/api/session", params=dict(
            rater_id="r", viewport_width=1024, viewport_height=700))
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "ViewportTooSmall"

    def test_full_session_over_http(self, client, study):
        r = client.get("/api/session", params=dict(
            rater_id="web", viewport_width=1280, viewport_height=800))
        sid = r.json()["session_id"]
        answered = 0
        while True:
            t = client.get(f"/api/session/{sid}/trial").json()
            if t["done"]:
                assert t["status"] == "complete"
                break
            pair = (t["left"]["image_id"], t["right"]["image_id"])
            choice = (pair[0] if pair[1] == CONTROL_IMAGE_ID else max(pair))
            r = client.post(f"/api/session/{sid}/response", json=dict(
                token=t["token"], choice=choice, latency=2.0))
            assert r.status_code == 200
            dup = client.post(f"/api/session/{sid}/response", json=dict(
                token=t["token"], choice=choice, latency=2.0))
            assert dup.status_code == 409
            answered += 1
        assert answered == CFG.stage_pair_count + 2

    def test_unknown_session_404(self, client):
        assert client.get("/api/session/nope/trial").status_code == 404

    def test_stage_close_requires_operator_token(self, client, monkeypatch):
        monkeypatch.setenv(OPERATOR_TOKEN_ENV, "s3cret")
        assert client.post("/api/stage/close", json={}).status_code == 403
        bad = client.post("/api/stage/close", json={},
                          headers={"X-Operator-Token": "wrong"})
        assert bad.status_code == 403
        ok = client.post("/api/stage/close", json={},
                         headers={"X-Operator-Token": "s3cret"})
        assert ok.status_code == 200

    def test_image_endpoints(self, client, tmp_catalog):
        _, ids = tmp_catalog
        assert client.get(f"/img/{ids[0]}").status_code == 200
        control = client.get(f"/img/{CONTROL_IMAGE_ID}")
        assert control.status_code == 200
        assert control.headers["content-type"] == "image/png"
        assert client.get("/img/missing").status_code == 404

    def test_scores_and_stage_views(self, client):
        scores = client.get("/api/scores").json()["scores"]
        assert len(scores) == 6
        stage = client.get("/api/stage").json()
        assert stage["stage"] == 0
        assert stage["converged"] is False
