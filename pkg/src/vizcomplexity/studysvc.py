"""Study-hosting service: sessions, trial assignment, persistence, HTTP API.

A :class:`Study` owns the image catalog, the ranking engine, and an
append-only JSONL event log. Every state change (session creation,
response, rejection, stage closure) is one log line; replaying the log
after a restart reconstructs identical scores bit-for-bit because trial
application order is fully determined by logged timestamps.

Each rater session serves 81 trials: a queue of 79 informative pairs
from the active sampler plus 2 attention-check trials (a stimulus paired
with a synthetic near-blank control) at seeded random positions. Judging
the control as more complex fails the check and rejects the whole
session; rejected sessions contribute no inference trials.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth
from .dataset import CatalogEntry, load_catalog
from .ranking import RankingConfig, StudyRanker, TrialRecord, select_pairs

MIN_VIEWPORT = (1028, 764)
CONTROL_IMAGE_ID = "__attention_control__"
OPERATOR_TOKEN_ENV = "VCX_OPERATOR_TOKEN"
ATTENTION_TRIALS_PER_SESSION = 2


class ViewportTooSmall(ValueError):
    pass


class StageClosed(RuntimeError):
    pass


class SessionComplete(RuntimeError):
    pass


class SessionRejected(RuntimeError):
    pass


class InvalidToken(KeyError):
    pass


class DuplicateResponse(RuntimeError):
    pass


class InvalidChoice(ValueError):
    pass


class StageHasActiveSessions(RuntimeError):
    pass


class UnknownSession(KeyError):
    pass


@dataclass
class Session:
    session_id: str
    rater_id: str
    stage: int
    queue: list  # [(image_a, image_b, is_attention), ...]
    progress: int = 0
    status: str = "active"  # active | complete | rejected
    records: list = field(default_factory=list)

    @property
    def attention_positions(self) -> list:
        return [i for i, (_, _, att) in enumerate(self.queue) if att]

    def trial_token(self, index: int) -> str:
        basis = f"{self.session_id}:{index}".encode()
        return hashlib.sha256(basis).hexdigest()[:20]


class Study:
    """Single-process study state; all writes serialize through here."""

    def __init__(
        self,
        catalog: list,
        log_path,
        cfg: RankingConfig | None = None,
        seed: int = 0,
    ):
        if len(catalog) < 2:
            raise ValueError("catalog needs at least 2 images")
        self.catalog = {e.image_id: e for e in catalog}
        if CONTROL_IMAGE_ID in self.catalog:
            raise ValueError(f"catalog id {CONTROL_IMAGE_ID!r} is reserved")
        self.cfg = cfg or RankingConfig()
        self.seed = seed
        self.log_path = Path(log_path)
        self.ranker = StudyRanker(sorted(self.catalog), self.cfg)
        self.sessions: dict = {}
        self.stage_index = 0
        self.closed = False
        self._session_count = 0
        self._event_seq = 0
        self._stage_assigned: set = set()  # pairs handed out this stage
        self._previous_stage_pairs: set = set()
        self.control_png = _encode_png(synth.near_blank_control().pixels)
        if self.log_path.exists():
            self._replay()

    # ------------------------------------------------------------- log --

    def _append(self, event: dict) -> None:
        with open(self.log_path, "a") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self) -> None:
        with open(self.log_path) as f:
            for line in f:
                line = line.strip()
                if line:
                    self._apply_event(json.loads(line), replaying=True)

    def _apply_event(self, ev: dict, replaying: bool) -> None:
        kind = ev["event"]
        if kind == "session":
            s = Session(
                session_id=ev["session_id"],
                rater_id=ev["rater_id"],
                stage=ev["stage"],
                queue=[(a, b, att) for a, b, att in ev["queue"]],
            )
            self.sessions[s.session_id] = s
            self._session_count += 1
            for a, b, att in s.queue:
                if not att:
                    self._stage_assigned.add(frozenset((a, b)))
        elif kind == "response":
            s = self.sessions[ev["session_id"]]
            record = TrialRecord.from_json(json.dumps(ev["trial"]))
            s.records.append(record)
            s.progress += 1
            self._event_seq = max(self._event_seq, int(record.timestamp) + 1)
            if s.progress == len(s.queue) and s.status == "active":
                s.status = "complete"
        elif kind == "rejected":
            self.sessions[ev["session_id"]].status = "rejected"
        elif kind == "stage_close":
            for sid in ev["voided_sessions"]:
                self.sessions[sid].status = "rejected"
            self._commit_stage()
        else:
            raise ValueError(f"unknown log event: {kind}")

    # -------------------------------------------------------- sessions --

    def create_session(self, rater_id: str, viewport: tuple) -> Session:
        if self.closed or self.ranker.converged:
            raise StageClosed("study has converged; no further sessions")
        w, h = viewport
        if w < MIN_VIEWPORT[0] or h < MIN_VIEWPORT[1]:
            raise ViewportTooSmall(
                f"viewport {w}x{h} below required "
                f"{MIN_VIEWPORT[0]}x{MIN_VIEWPORT[1]}"
            )
        pairs = select_pairs(
            list(self.ranker.states.values()),
            self.cfg.stage_pair_count,
            exclusions=self._previous_stage_pairs | self._stage_assigned,
            seed=self.seed * 104_729 + self._session_count,
            cfg=self.cfg,
        )
        rng = np.random.default_rng((self.seed, 7, self._session_count))
        total = len(pairs) + ATTENTION_TRIALS_PER_SESSION
        att_positions = sorted(
            int(i) for i in rng.choice(total, size=ATTENTION_TRIALS_PER_SESSION,
                                       replace=False)
        )
        stimuli = rng.choice(sorted(self.catalog),
                             size=ATTENTION_TRIALS_PER_SESSION, replace=False)
        queue = []
        pair_iter = iter(pairs)
        att_iter = iter(stimuli)
        for slot in range(total):
            if slot in att_positions:
                queue.append((str(next(att_iter)), CONTROL_IMAGE_ID, True))
            else:
                a, b = next(pair_iter)
                queue.append((a, b, False))
        session = Session(
            session_id=f"sess-{self._session_count:05d}",
            rater_id=rater_id,
            stage=self.stage_index,
            queue=queue,
        )
        self.sessions[session.session_id] = session
        self._session_count += 1
        for a, b in pairs:
            self._stage_assigned.add(frozenset((a, b)))
        self._append({
            "event": "session",
            "session_id": session.session_id,
            "rater_id": rater_id,
            "stage": session.stage,
            "queue": [[a, b, att] for a, b, att in queue],
        })
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def next_trial(self, session_id: str) -> dict:
        s = self.get_session(session_id)
        if s.status == "rejected":
            raise SessionRejected(session_id)
        if s.status == "complete":
            raise SessionComplete(session_id)
        a, b, att = s.queue[s.progress]
        return {
            "pair": (a, b),
            "token": s.trial_token(s.progress),
            "index": s.progress,
            "total": len(s.queue),
            "is_attention_check": att,
        }

    def record_response(
        self, session_id: str, token: str, choice: str, latency: float
    ) -> dict:
        s = self.get_session(session_id)
        if s.status == "rejected":
            raise SessionRejected(session_id)
        if s.status == "complete":
            raise DuplicateResponse("session already complete")
        expected = s.trial_token(s.progress)
        if token != expected:
            if token in {s.trial_token(i) for i in range(s.progress)}:
                raise DuplicateResponse(f"token {token} already consumed")
            raise InvalidToken(token)
        a, b, att = s.queue[s.progress]
        if choice not in (a, b):
            raise InvalidChoice(f"choice {choice!r} not in pair ({a}, {b})")
        if latency <= 0:
            raise InvalidChoice("latency must be positive")
        record = TrialRecord(
            trial_id=f"{s.session_id}-{s.progress:03d}",
            stage=s.stage,
            rater_id=s.rater_id,
            pair=(a, b),
            choice=choice,
            latency=latency,
            is_attention_check=att,
            timestamp=float(self._event_seq),
        )
        self._event_seq += 1
        s.records.append(record)
        s.progress += 1
        if s.progress == len(s.queue):
            s.status = "complete"
        self._append({
            "event": "response",
            "session_id": s.session_id,
            "trial": json.loads(record.to_json()),
        })
        failed_attention = att and choice == CONTROL_IMAGE_ID
        if failed_attention:
            s.status = "rejected"
            self._append({"event": "rejected", "session_id": s.session_id})
        return {
            "accepted": True,
            "progress": s.progress,
            "total": len(s.queue),
            "session_status": s.status,
        }

    # ----------------------------------------------------------- stage --

    def active_sessions(self) -> list:
        return [
            s for s in self.sessions.values()
            if s.status == "active" and s.stage == self.stage_index
        ]

    def close_stage(self, force: bool = False) -> dict:
        active = self.active_sessions()
        if active and not force:
            raise StageHasActiveSessions(
                f"{len(active)} active sessions; use force to void them"
            )
        self._append({
            "event": "stage_close",
            "stage": self.stage_index,
            "forced": bool(force),
            "voided_sessions": sorted(s.session_id for s in active),
        })
        for s in active:
            s.status = "rejected"
        report = self._commit_stage()
        return report

    def _commit_stage(self) -> dict:
        trials = [
            r
            for s in self.sessions.values()
            if s.stage == self.stage_index and s.status == "complete"
            for r in s.records
            if not r.is_attention_check
        ]
        stage_report = self.ranker.run_stage(trials)
        self._previous_stage_pairs = self._stage_assigned
        self._stage_assigned = set()
        self.stage_index += 1
        if self.ranker.converged:
            self.closed = True
        return {
            "stage": stage_report.stage,
            "valid_trials": stage_report.valid_trials,
            "pearson_to_previous": stage_report.pearson_to_previous,
            "spearman_to_previous": stage_report.spearman_to_previous,
            "converged": stage_report.converged,
        }

    # ---------------------------------------------------------- scores --

    def scores(self) -> dict:
        if self.ranker.total_updates == 0:
            return {
                img: {"mu": st.mu, "sigma": st.sigma,
                      "n_comparisons": 0, "normalized": 0.0}
                for img, st in self.ranker.states.items()
            }
        return self.ranker.final_scores()

    def stage_info(self) -> dict:
        return {
            "stage": self.stage_index,
            "converged": self.ranker.converged,
            "closed": self.closed,
            "active_sessions": len(self.active_sessions()),
            "total_updates": self.ranker.total_updates,
            "reports": [
                {
                    "stage": r.stage,
                    "valid_trials": r.valid_trials,
                    "pearson_to_previous": r.pearson_to_previous,
                    "converged": r.converged,
                }
                for r in self.ranker.stage_reports
            ],
        }

    def image_bytes(self, image_id: str) -> tuple:
        """Return (bytes, media type) for a catalog image or the control."""
        if image_id == CONTROL_IMAGE_ID:
            return self.control_png, "image/png"
        entry = self.catalog.get(image_id)
        if entry is None:
            raise KeyError(image_id)
        data = Path(entry.path).read_bytes()
        media = "image/jpeg" if entry.path.lower().endswith((".jpg", ".jpeg")) \
            else "image/png"
        return data, media


def _encode_png(pixels: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


# ------------------------------------------------------------------ HTTP --


def load_service_config(path) -> dict:
    """Service config JSON: catalog path, log path, seed, ranking overrides,
    listen address."""
    with open(path) as f:
        raw = json.load(f)
    if "catalog" not in raw or "log" not in raw:
        raise ValueError("service config requires 'catalog' and 'log' paths")
    return {
        "catalog": raw["catalog"],
        "log": raw["log"],
        "seed": int(raw.get("seed", 0)),
        "host": raw.get("host", "127.0.0.1"),
        "port": int(raw.get("port", 8000)),
        "ranking": raw.get("ranking", {}),
        "static_dir": raw.get("static_dir"),
    }


def study_from_config(config: dict) -> Study:
    catalog = load_catalog(config["catalog"])
    cfg = RankingConfig(**config.get("ranking", {}))
    return Study(catalog, log_path=config["log"], cfg=cfg, seed=config["seed"])


def create_app(study: Study, static_dir=None):
    from fastapi import Body, FastAPI, Header, HTTPException, Query, Response

    app = FastAPI(title="visual-complexity study service")
    app.state.study = study

    def _http(status: int, exc: Exception):
        return HTTPException(
            status_code=status,
            detail={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/api/session")
    def create_session(
        rater_id: str = Query(...),
        viewport_width: int = Query(...),
        viewport_height: int = Query(...),
    ):
        try:
            s = study.create_session(rater_id, (viewport_width, viewport_height))
        except ViewportTooSmall as e:
            raise _http(422, e)
        except StageClosed as e:
            raise _http(409, e)
        return {
            "session_id": s.session_id,
            "stage": s.stage,
            "trial_count": len(s.queue),
        }

    @app.get("/api/session/{session_id}/trial")
    def next_trial(session_id: str):
        try:
            trial = study.next_trial(session_id)
        except UnknownSession as e:
            raise _http(404, e)
        except SessionComplete:
            return {"done": True, "status": "complete"}
        except SessionRejected:
            return {"done": True, "status": "rejected"}
        pair = trial["pair"]
        return {
            "done": False,
            "token": trial["token"],
            "index": trial["index"],
            "total": trial["total"],
            "left": {"image_id": pair[0], "url": f"/img/{pair[0]}"},
            "right": {"image_id": pair[1], "url": f"/img/{pair[1]}"},
        }

    @app.post("/api/session/{session_id}/response")
    def record_response(session_id: str, body: dict = Body(...)):
        try:
            return study.record_response(
                session_id,
                token=str(body["token"]),
                choice=str(body["choice"]),
                latency=float(body["latency"]),
            )
        except KeyError as e:
            if isinstance(e, UnknownSession):
                raise _http(404, e)
            if isinstance(e, InvalidToken):
                raise _http(403, e)
            raise _http(422, e)
        except DuplicateResponse as e:
            raise _http(409, e)
        except (InvalidChoice, ValueError) as e:
            raise _http(422, e)
        except SessionRejected as e:
            raise _http(409, e)

    @app.get("/api/scores")
    def scores():
        return {"scores": study.scores()}

    @app.get("/api/stage")
    def stage():
        return study.stage_info()

    @app.post("/api/stage/close")
    def close_stage(
        body: dict = Body(default={}),
        x_operator_token: str | None = Header(default=None),
    ):
        expected = os.environ.get(OPERATOR_TOKEN_ENV)
        if not expected or x_operator_token != expected:
            raise HTTPException(status_code=403, detail={
                "error": "OperatorAuthFailed",
                "message": f"set {OPERATOR_TOKEN_ENV} and pass X-Operator-Token",
            })
        try:
            return study.close_stage(force=bool(body.get("force", False)))
        except StageHasActiveSessions as e:
            raise _http(409, e)

    @app.get("/img/{image_id}")
    def image(image_id: str):
        try:
            data, media = study.image_bytes(image_id)
        except KeyError as e:
            raise _http(404, e)
        return Response(content=data, media_type=media)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
