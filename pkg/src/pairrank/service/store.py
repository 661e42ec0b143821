"""Session state, event-log persistence, and crash recovery.

Each session is an append-only JSONL event log (create, query, answer) plus
a periodic checkpoint of the full engine state. Restoring a session replays
the log from the last checkpoint through the library run loop, asserting
that every logged query matches what the sampler proposes; the log is the
experiment record.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..data import ItemPool
from ..engine import ActiveRun, check_compatible
from ..errors import (
    ConflictError,
    NoEligiblePairsError,
    UnknownSessionError,
    ValidationError,
)
from ..samplers import SamplerSpec, all_pairs

CHECKPOINT_EVERY = 25


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _pair_budget_counts(n: int, comparisons: list[tuple[int, int, int]]) -> np.ndarray:
    pairs = all_pairs(n)
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(pairs)}
    counts = np.zeros(len(pairs), dtype=int)
    for i, j, _ in comparisons:
        key = (i, j) if i < j else (j, i)
        if key not in index:
            raise ValidationError(f"comparison references unknown item pair {key}")
        counts[index[key]] += 1
    return counts


@dataclass
class Session:
    session_id: str
    run: ActiveRun
    display: list[str]
    comparisons: list[tuple[int, int, int]] | None = None
    imported: int = 0
    pending: tuple[int, int, int] | None = None  # (t, i, j)
    answered: int = 0
    created: str = field(default_factory=_now)
    updated: str = field(default_factory=_now)
    events_logged: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def build_run(
    pool: ItemPool,
    sampler: SamplerSpec,
    model_kind: str,
    seed: int,
    *,
    ridge: float,
    reg_zeta: float,
    refit_stride: int,
    budget: int | None,
    comparisons: list[tuple[int, int, int]] | None,
) -> ActiveRun:
    check_compatible(sampler.kind, model_kind)
    counts = None
    consume = False
    if comparisons is not None:
        counts = _pair_budget_counts(pool.n, comparisons)
        consume = True
    return ActiveRun(
        pool,
        sampler,
        model_kind,
        seed,
        ridge=ridge,
        reg_zeta=reg_zeta,
        refit_stride=refit_stride,
        budget=budget,
        eligible_counts=counts,
        consume_on_observe=consume,
    )


class SessionStore:
    """In-memory session registry backed by per-session JSONL logs."""

    def __init__(self, data_dir: str | Path, checkpoint_every: int = CHECKPOINT_EVERY):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.checkpoint_every = checkpoint_every
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.events.jsonl"

    def _checkpoint_path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.ckpt.json"

    def _append_event(self, session: Session, event: dict) -> None:
        with self._log_path(session.session_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
        session.events_logged += 1

    # -- lifecycle -----------------------------------------------------------

    def create(
        self,
        pool: ItemPool,
        sampler: SamplerSpec,
        model_kind: str,
        seed: int,
        *,
        display: list[str] | None = None,
        ridge: float = 1.0,
        reg_zeta: float = 1.0,
        refit_stride: int = 1,
        budget: int | None = None,
        comparisons: list[tuple[int, int, int]] | None = None,
        history: list[tuple[int, int, int]] | None = None,
    ) -> Session:
        if display is not None and len(display) != pool.n:
            raise ValidationError("display payload count must match item count")
        run = build_run(
            pool,
            sampler,
            model_kind,
            seed,
            ridge=ridge,
            reg_zeta=reg_zeta,
            refit_stride=refit_stride,
            budget=budget,
            comparisons=comparisons,
        )
        session_id = uuid.uuid4().hex
        display = display if display is not None else [str(i) for i in range(pool.n)]
        session = Session(session_id, run, display, comparisons=comparisons)
        create_event = {
            "event": "create",
            "v": 1,
            "ts": session.created,
            "pool": {
                "features": pool.features.tolist(),
                "true_scores": None if pool.true_scores is None else pool.true_scores.tolist(),
            },
            "display": display,
            "sampler": {
                "kind": sampler.kind,
                "posterior_samples": sampler.posterior_samples,
                "candidate_cap": sampler.candidate_cap,
                "confidence_width": sampler.confidence_width,
            },
            "model": model_kind,
            "seed": seed,
            "ridge": ridge,
            "reg_zeta": reg_zeta,
            "refit_stride": refit_stride,
            "budget": budget,
            "comparisons": comparisons,
        }
        self._append_event(session, create_event)
        if history:
            for i, j, c in history:
                run.observe(int(i), int(j), int(c))
                session.answered += 1
                self._append_event(
                    session,
                    {"event": "import", "t": session.answered, "i": i, "j": j, "c": c},
                )
            session.imported = len(history)
        with self._registry_lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            session = self._load(session_id)
            with self._registry_lock:
                self._sessions.setdefault(session_id, session)
                session = self._sessions[session_id]
        return session

    def _load(self, session_id: str) -> Session:
        """Rebuild a session from its checkpoint (if any) plus the log tail."""
        log_path = self._log_path(session_id)
        if not log_path.exists():
            raise UnknownSessionError(f"no session '{session_id}'")
        events = [
            json.loads(line)
            for line in log_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not events or events[0]["event"] != "create":
            raise ValidationError(f"corrupt session log for '{session_id}'")
        head = events[0]
        pool = ItemPool(
            np.asarray(head["pool"]["features"], dtype=float), head["pool"]["true_scores"]
        )
        sampler = SamplerSpec(
            head["sampler"]["kind"],
            head["sampler"]["posterior_samples"],
            head["sampler"]["candidate_cap"],
            head["sampler"]["confidence_width"],
        )
        comparisons = head.get("comparisons")
        run = build_run(
            pool,
            sampler,
            head["model"],
            head["seed"],
            ridge=head["ridge"],
            reg_zeta=head["reg_zeta"],
            refit_stride=head["refit_stride"],
            budget=head["budget"],
            comparisons=None if comparisons is None else [tuple(c) for c in comparisons],
        )
        session = Session(
            session_id,
            run,
            list(head["display"]),
            comparisons=None if comparisons is None else [tuple(c) for c in comparisons],
            created=head["ts"],
        )
        session.events_logged = len(events)

        start = 1
        ckpt_path = self._checkpoint_path(session_id)
        if ckpt_path.exists():
            ckpt = json.loads(ckpt_path.read_text(encoding="utf-8"))
            run.set_state(ckpt["state"])
            session.answered = ckpt["answered"]
            session.imported = ckpt["imported"]
            start = ckpt["events_applied"]
        for event in events[start:]:
            kind = event["event"]
            if kind == "import":
                run.observe(int(event["i"]), int(event["j"]), int(event["c"]))
                session.answered += 1
                session.imported += 1
            elif kind == "query":
                pair = run.propose()
                if pair != (int(event["i"]), int(event["j"])):
                    raise ValidationError(
                        f"session '{session_id}' log diverges from sampler replay at "
                        f"step {event['t']}"
                    )
                session.pending = (int(event["t"]), pair[0], pair[1])
            elif kind == "answer":
                run.observe(int(event["i"]), int(event["j"]), int(event["c"]))
                session.answered += 1
                session.pending = None
        return session

    # -- operations ----------------------------------------------------------

    def next_pair(self, session_id: str):
        session = self.get(session_id)
        with session.lock:
            if session.pending is not None:
                t, i, j = session.pending
                return session, ("ok", t, (i, j))
            if session.run.exhausted():
                return session, ("exhausted", None, None)
            try:
                pair = session.run.propose()
            except NoEligiblePairsError:
                return session, ("exhausted", None, None)
            t = session.answered + 1
            session.pending = (t, pair[0], pair[1])
            session.updated = _now()
            self._append_event(
                session, {"event": "query", "t": t, "i": pair[0], "j": pair[1]}
            )
            return session, ("ok", t, pair)

    def submit_answer(self, session_id: str, i: int, j: int, choice: int, tag: str | None):
        if choice not in (0, 1):
            raise ValidationError("choice must be 0 or 1")
        session = self.get(session_id)
        with session.lock:
            if session.pending is None or session.pending[1:] != (i, j):
                raise ConflictError(
                    f"pair ({i}, {j}) is not the pending query"
                    + (f"; pending is {session.pending[1:]}" if session.pending else "")
                )
            t = session.pending[0]
            session.run.observe(i, j, choice)
            session.answered += 1
            session.pending = None
            session.updated = _now()
            self._append_event(
                session,
                {"event": "answer", "t": t, "i": i, "j": j, "c": choice, "tag": tag, "ts": _now()},
            )
            if session.answered % self.checkpoint_every == 0:
                self._write_checkpoint(session)
            return session, t

    def _write_checkpoint(self, session: Session) -> None:
        payload = {
            "answered": session.answered,
            "imported": session.imported,
            "events_applied": session.events_logged,
            "state": session.run.get_state(),
        }
        tmp = self._checkpoint_path(session.session_id).with_suffix(".tmp")
        tmp.write_text(json.dumps(payload), encoding="utf-8")
        tmp.replace(self._checkpoint_path(session.session_id))
