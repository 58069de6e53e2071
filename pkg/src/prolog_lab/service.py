"""The lab as an HTTP service.

Problems come from a bundle repository directory (one subdirectory per
problem, validated at startup; invalid bundles are excluded with a logged
reason). Graded attempts append to a JSONL log before the response goes
out, and every learner model is derived state: restarting the service
replays the log and reconstructs the same models.

Endpoints, all JSON:

    GET  /api/v1/problems?learner=ID
    GET  /api/v1/problems/{id}?learner=ID
    POST /api/v1/problems/{id}/submissions   {"learner": ..., "source": ...}
    GET  /api/v1/learners/{id}/model

Submission responses carry the graded stages, verdict, counterexamples,
aux results, distance, distance change, hints due after the attempt, and
the master seed. Reference solutions and test specifications never appear
in any response.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .bundles import discover_bundles
from .grader import grade, report_payload
from .testgen import derive_seed
from .tutor import (
    AttemptRecord,
    HintLadder,
    LearnerModel,
    distance_change,
    hints_due,
    update_model,
)
from .tutor import compute_distance

MAX_SOURCE_BYTES = 64 * 1024
GRADING_WALL_SECONDS = 5.0

log = logging.getLogger("prolog_lab.service")


class AttemptLog:
    """Append-only JSONL store of attempt records. Each append is flushed
    and fsynced before it returns, so a crash after append never loses the
    attempt. A torn final line (crash mid-write) is skipped on replay; a
    torn line anywhere else means real corruption and raises."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: AttemptRecord) -> None:
        payload = {
            "learner": record.learner_id,
            "problem": record.problem_id,
            "attempt": record.attempt_number,
            "source": record.submission_source,
            "verdict": record.verdict,
            "distance": str(record.distance),
            "seed": record.seed,
            "timestamp": record.timestamp,
        }
        line = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())

    def replay(self):
        if not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    log.warning("skipping torn final line of %s", self.path)
                    return
                raise RuntimeError(f"{self.path}: corrupt record on line {i + 1}")
            yield AttemptRecord(
                learner_id=payload["learner"],
                problem_id=payload["problem"],
                attempt_number=payload["attempt"],
                submission_source=payload["source"],
                verdict=payload["verdict"],
                distance=Fraction(payload["distance"]),
                seed=payload["seed"],
                timestamp=payload["timestamp"],
            )


class LabState:
    """Bundles, the learner model, and the per-key submission locks."""

    def __init__(self, bundles, attempt_log: AttemptLog):
        self.bundles = {b.id: b for b in bundles}
        self.order = [b.id for b in bundles]
        self.attempt_log = attempt_log
        self.model = LearnerModel()
        self._locks: dict = {}
        self._locks_guard = threading.Lock()
        for record in attempt_log.replay():
            self._fold(record)

    def _fold(self, record: AttemptRecord) -> None:
        bundle = self.bundles.get(record.problem_id)
        ladder = bundle.hint_ladder if bundle else HintLadder(())
        domains = bundle.domains if bundle else ()
        update_model(self.model, record, ladder, domains)

    def lock_for(self, learner_id: str, problem_id: str) -> threading.Lock:
        key = (learner_id, problem_id)
        with self._locks_guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._locks[key] = lock
            return lock


class SubmissionIn(BaseModel):
    learner: str
    source: str


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_app(
    repo_root: Union[str, Path],
    log_path: Optional[Union[str, Path]] = None,
    frontend_dir: Optional[Union[str, Path]] = None,
) -> FastAPI:
    repo_root = Path(repo_root)
    if log_path is None:
        log_path = repo_root / "attempts.jsonl"
    bundles, excluded = discover_bundles(repo_root)
    for name, problems in excluded.items():
        for problem in problems:
            log.warning("excluding bundle %s: %s", name, problem)
    state = LabState(bundles, AttemptLog(log_path))

    app = FastAPI(title="prolog-lab", docs_url=None, redoc_url=None)
    app.state.lab = state
    app.state.excluded = excluded

    @app.get("/api/v1/problems")
    def list_problems(learner: str = ""):
        return [
            {
                "id": pid,
                "title": state.bundles[pid].title,
                "solved": state.model.progress(learner, pid).solved,
            }
            for pid in state.order
        ]

    @app.get("/api/v1/problems/{problem_id}")
    def get_problem(problem_id: str, learner: str = ""):
        bundle = state.bundles.get(problem_id)
        if bundle is None:
            raise HTTPException(status_code=404, detail=f"no problem named {problem_id!r}")
        progress = state.model.progress(learner, problem_id)
        return {
            "id": bundle.id,
            "title": bundle.title,
            "description": bundle.description,
            "releasedHints": hints_due(bundle.hint_ladder, progress.failed_attempts),
            "attemptCount": progress.attempts,
            "solved": progress.solved,
        }

    @app.post("/api/v1/problems/{problem_id}/submissions")
    def submit_solution(problem_id: str, body: SubmissionIn):
        bundle = state.bundles.get(problem_id)
        if bundle is None:
            raise HTTPException(status_code=404, detail=f"no problem named {problem_id!r}")
        if not body.learner:
            raise HTTPException(status_code=422, detail="learner must be a nonempty id")
        if len(body.source.encode("utf-8")) > MAX_SOURCE_BYTES:
            raise HTTPException(status_code=413, detail="source exceeds 64 KiB")

        with state.lock_for(body.learner, problem_id):
            progress = state.model.progress(body.learner, problem_id)
            attempt_number = progress.attempts + 1
            seed = derive_seed(problem_id, body.learner, attempt_number)
            deadline = time.monotonic() + GRADING_WALL_SECONDS
            report = grade(bundle, body.source, seed, deadline=deadline)
            distance = compute_distance(report)
            record = AttemptRecord(
                learner_id=body.learner,
                problem_id=problem_id,
                attempt_number=attempt_number,
                submission_source=body.source,
                verdict=report.verdict,
                distance=distance,
                seed=seed,
                timestamp=_utc_now(),
            )
            state.attempt_log.append(record)  # durable before any response
            update_model(state.model, record, bundle.hint_ladder, bundle.domains)
            updated = state.model.progress(body.learner, problem_id)
            hints = hints_due(bundle.hint_ladder, updated.failed_attempts)
            change = distance_change(updated)
        return report_payload(report, distance, change, hints)

    @app.get("/api/v1/learners/{learner_id}/model")
    def get_learner_model(learner_id: str):
        problems = []
        for (lid, pid), progress in sorted(state.model.problems.items()):
            if lid != learner_id:
                continue
            problems.append(
                {
                    "problemId": pid,
                    "attempts": progress.attempts,
                    "failedAttempts": progress.failed_attempts,
                    "solved": progress.solved,
                    "distanceHistory": [float(d) for d in progress.distance_history],
                    "hintsReleased": progress.hints_released,
                }
            )
        domains = [
            {"domain": domain, "solved": count}
            for (lid, domain), count in sorted(state.model.domain_solved.items())
            if lid == learner_id
        ]
        return {"learner": learner_id, "problems": problems, "domains": domains}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="frontend")

    return app
