"""Hints, the submission-to-solution distance, and the learner model.

Hints release cumulatively as a learner's count of failed attempts crosses
ladder thresholds. The distance is a behavioral [0,1] measure computed
from the graded report rather than from program text: failing the early
pipeline stages costs the whole scale, and an executed submission scores by
the fraction of randomized trials it fails, weighted across the main
predicate, any auxiliary predicates the learner chose to define, and the
structure check. Exact arithmetic (fractions) keeps replay byte-stable.

The model itself is deliberately plain: per (learner, problem) counters
plus per-domain solved counts, reconstructible from the attempt log alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

MIN_INCORRECT_DISTANCE = Fraction(1, 100)

WEIGHT_MAIN = Fraction(7, 10)
WEIGHT_AUX = Fraction(2, 10)
WEIGHT_STRUCTURE = Fraction(1, 10)


class OutOfOrderAttempt(Exception):
    """Attempt numbering skipped or repeated; signals a persistence race."""


@dataclass(frozen=True)
class HintLadder:
    rungs: tuple  # ((threshold, hint_text), ...) thresholds strictly increasing

    def __post_init__(self):
        last = 0
        for threshold, _ in self.rungs:
            if threshold <= last:
                raise ValueError("hint thresholds must be strictly increasing and positive")
            last = threshold


def hints_due(ladder: HintLadder, failed_attempts: int) -> list:
    """All hints whose threshold is reached, in rung order (cumulative)."""
    if failed_attempts < 0:
        raise ValueError("failed_attempts must be non-negative")
    return [hint for threshold, hint in ladder.rungs if threshold <= failed_attempts]


@dataclass(frozen=True)
class AttemptRecord:
    learner_id: str
    problem_id: str
    attempt_number: int  # 1-based, gapless per (learner, problem)
    submission_source: str
    verdict: str  # "Correct" | "Incorrect"
    distance: Fraction  # 0 iff verdict Correct
    seed: int
    timestamp: str  # ISO 8601 UTC


@dataclass
class ProblemProgress:
    attempts: int = 0
    failed_attempts: int = 0
    solved: bool = False
    distance_history: list = field(default_factory=list)
    hints_released: int = 0


@dataclass
class LearnerModel:
    """Aggregated progress, derived entirely from attempt records."""

    problems: dict = field(default_factory=dict)  # (learner, problem) -> ProblemProgress
    domain_solved: dict = field(default_factory=dict)  # (learner, domain) -> int

    def progress(self, learner_id: str, problem_id: str) -> ProblemProgress:
        return self.problems.get((learner_id, problem_id)) or ProblemProgress()


def update_model(
    model: LearnerModel,
    record: AttemptRecord,
    ladder: HintLadder,
    domains: tuple = (),
) -> LearnerModel:
    """Fold one attempt into the model (in place; returns the model).

    Raises OutOfOrderAttempt unless the record is the next attempt for its
    (learner, problem) pair. A solve is permanent: later attempts never
    unset it, and the first solve bumps each of the problem's domain
    counters once.
    """
    key = (record.learner_id, record.problem_id)
    progress = model.problems.get(key)
    if progress is None:
        progress = ProblemProgress()
        model.problems[key] = progress
    if record.attempt_number != progress.attempts + 1:
        raise OutOfOrderAttempt(
            f"attempt {record.attempt_number} for {key}, expected {progress.attempts + 1}"
        )
    progress.attempts += 1
    progress.distance_history.append(record.distance)
    if record.verdict == "Correct":
        if not progress.solved:
            progress.solved = True
            for domain in domains:
                dkey = (record.learner_id, domain)
                model.domain_solved[dkey] = model.domain_solved.get(dkey, 0) + 1
    else:
        progress.failed_attempts += 1
    progress.hints_released = len(hints_due(ladder, progress.failed_attempts))
    return model


def distance_change(progress: ProblemProgress) -> Optional[Fraction]:
    """Difference between the last two distances; None before the second
    attempt. Negative means the learner moved closer."""
    h = progress.distance_history
    if len(h) < 2:
        return None
    return h[-1] - h[-2]


def compute_distance(report, bundle=None) -> Fraction:
    """Behavioral distance in [0,1] for a graded report.

    1 when the submission never executed (Syntax or Forbidden failed);
    0 exactly when the verdict is Correct. Otherwise a weighted average of
    the main trial fail fraction (0.7), the aux trial fail fraction over
    the auxiliaries the submission defines (0.2), and the structure-check
    indicator (0.1); weights of absent groups (no aux defined, no structure
    target) renormalize proportionally, and any Incorrect verdict scores at
    least 0.01 so that distance 0 identifies solved exactly.

    Depends only on the report; `bundle` is accepted for signature
    compatibility and unused.
    """
    by_name = {s.stage: s for s in report.stages}
    if by_name["Syntax"].status == "Fail" or by_name["Forbidden"].status == "Fail":
        return Fraction(1)
    if report.verdict == "Correct":
        return Fraction(0)

    weights = Fraction(0)
    total = Fraction(0)

    main_passed = sum(c.passed for c in report.trial_counts if c.group == "main")
    main_failed = sum(c.failed for c in report.trial_counts if c.group == "main")
    main_trials = main_passed + main_failed
    if main_trials > 0:
        weights += WEIGHT_MAIN
        total += WEIGHT_MAIN * Fraction(main_failed, main_trials)

    defined_aux = {str(a.indicator) for a in report.aux_results if a.status != "Skipped"}
    aux_passed = sum(
        c.passed for c in report.trial_counts if c.group == "aux" and c.owner in defined_aux
    )
    aux_failed = sum(
        c.failed for c in report.trial_counts if c.group == "aux" and c.owner in defined_aux
    )
    aux_trials = aux_passed + aux_failed
    if defined_aux and aux_trials > 0:
        weights += WEIGHT_AUX
        total += WEIGHT_AUX * Fraction(aux_failed, aux_trials)

    structure = by_name["Structure"]
    if structure.status in ("Pass", "Fail"):
        weights += WEIGHT_STRUCTURE
        if structure.status == "Fail":
            total += WEIGHT_STRUCTURE

    if weights == 0:
        return Fraction(1)  # nothing executed scored; treat as maximal
    distance = total / weights
    if distance > 1:
        distance = Fraction(1)
    if distance < MIN_INCORRECT_DISTANCE:
        distance = MIN_INCORRECT_DISTANCE
    return distance
