"""The four-stage grading pipeline.

A submission moves through Syntax (parse), Forbidden (static command
scan), Semantic (randomized trials against the hidden reference, for the
main predicate and any auxiliary predicates the learner defined), and
Structure (shape comparison against a target program, when the problem
ships one). A failed Syntax or Forbidden stage aborts the pipeline: later
stages report Skipped, never run, and the submission text is never
executed. Dynamic policy violations can only surface while trials run, so
they fail the Semantic stage with a Forbidden-tagged detail and stop
further trials immediately.

The verdict is Correct exactly when every executed stage passed. Optional
auxiliaries and an optional structure target contribute feedback and
distance, not verdict; a bundle can mark either as required to make them
gate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .engine import Limits
from .reader import parse_program
from .sandbox import Policy, scan_static
from .terms import (
    Atom,
    Clause,
    PredicateIndicator,
    Program,
    Struct,
    Term,
    alpha_equal,
)
from .testgen import (
    BundleError,
    Outcome,
    TestSpec,
    compare_outcomes,
    instantiate,
    run_one,
)
from .tutor import HintLadder

STAGES = ("Syntax", "Forbidden", "Semantic", "Structure")


@dataclass(frozen=True)
class AuxCheck:
    """One suggested helper predicate: its indicator, how to test it, and
    the advice text shown when the learner's version misbehaves."""

    indicator: PredicateIndicator
    specs: tuple  # TestSpec, ...
    advice: str
    required: bool = False


@dataclass(frozen=True)
class ProblemBundle:
    id: str
    title: str
    description: str
    reference_source: str
    reference: Program
    main_specs: tuple  # TestSpec, ...
    aux_checks: tuple = ()  # AuxCheck, ...
    structure_target: Optional[Program] = None
    structure_required: bool = False
    policy: Policy = Policy()
    hint_ladder: HintLadder = HintLadder(())
    limits: Limits = Limits()
    domains: tuple = ()

    def known_indicators(self) -> frozenset:
        """Indicators the problem expects the learner to define; their
        absence must read as "not defined", not as an unknown command."""
        known = {spec.indicator() for spec in self.main_specs}
        for aux in self.aux_checks:
            known.add(aux.indicator)
        return frozenset(known)


@dataclass(frozen=True)
class StageResult:
    stage: str  # Syntax | Forbidden | Semantic | Structure
    status: str  # Pass | Fail | Skipped
    details: tuple = ()  # human-readable lines


@dataclass(frozen=True)
class AuxResult:
    indicator: PredicateIndicator
    status: str  # Pass | Fail | Skipped
    counterexamples: tuple = ()
    passed: int = 0
    failed: int = 0
    advice: str = ""


@dataclass(frozen=True)
class SpecCount:
    spec_name: str
    group: str  # "main" | "aux"
    owner: str  # indicator text for aux specs, "" for main
    passed: int
    failed: int


@dataclass(frozen=True)
class FeedbackReport:
    stages: tuple  # the four StageResults in pipeline order
    verdict: str  # "Correct" | "Incorrect"
    aux_results: tuple = ()
    counterexamples: tuple = ()
    seed: int = 0
    trial_counts: tuple = ()  # SpecCount, ...

    def stage(self, name: str) -> StageResult:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)


def _skipped(stage: str, why: str) -> StageResult:
    return StageResult(stage, "Skipped", (why,))


def grade(
    bundle: ProblemBundle,
    submission_source: str,
    master_seed: int,
    deadline: Optional[float] = None,
) -> FeedbackReport:
    """Grade one submission. Deterministic in (bundle, source, seed) when no
    deadline is given; never raises for any submission text (bundle
    authoring mistakes raise BundleError, which validation catches first).
    """
    # stage 1: syntax
    parsed = parse_program(submission_source)
    warnings = tuple(str(d) for d in parsed.warnings())
    if not parsed.ok:
        stages = (
            StageResult("Syntax", "Fail", tuple(str(d) for d in parsed.diagnostics)),
            _skipped("Forbidden", "submission did not parse"),
            _skipped("Semantic", "submission did not parse"),
            _skipped("Structure", "submission did not parse"),
        )
        return FeedbackReport(stages, "Incorrect", seed=master_seed)
    program = parsed.program
    syntax = StageResult("Syntax", "Pass", warnings)

    # stage 2: forbidden commands, static
    violations = scan_static(program, bundle.policy)
    if violations:
        details = tuple(_violation_line(v) for v in violations)
        stages = (
            syntax,
            StageResult("Forbidden", "Fail", details),
            _skipped("Semantic", "blocked command found"),
            _skipped("Structure", "blocked command found"),
        )
        return FeedbackReport(stages, "Incorrect", seed=master_seed)
    forbidden = StageResult("Forbidden", "Pass")

    # stage 3: semantic trials (main specs, then auxiliaries the learner defined)
    known = bundle.known_indicators()
    semantic_details: list = []
    counterexamples: list = []
    trial_counts: list = []
    main_ok = True
    dynamic_violation = False

    for spec in bundle.main_specs:
        passed, failed, mismatches, violated = _run_spec(
            bundle, program, spec, master_seed, known, deadline
        )
        trial_counts.append(SpecCount(spec.name, "main", "", passed, failed))
        counterexamples.extend(mismatches)
        if failed:
            main_ok = False
        if violated is not None:
            dynamic_violation = True
            semantic_details.append(f"[Forbidden] {violated}")
            break

    aux_results: list = []
    if not dynamic_violation:
        for aux in bundle.aux_checks:
            result, counts, violated = _check_aux(
                bundle, program, aux, master_seed, known, deadline
            )
            aux_results.append(result)
            trial_counts.extend(counts)
            counterexamples.extend(result.counterexamples)
            if violated is not None:
                dynamic_violation = True
                semantic_details.append(f"[Forbidden] {violated}")
                break

    required_aux_ok = all(
        r.status != "Fail"
        for r, a in zip(aux_results, bundle.aux_checks)
        if a.required
    )
    # a required helper the learner left out also gates
    for r, a in zip(aux_results, bundle.aux_checks):
        if a.required and r.status == "Skipped":
            required_aux_ok = False
            semantic_details.append(f"the helper {a.indicator} is required but not defined")

    semantic_status = "Pass" if (main_ok and required_aux_ok and not dynamic_violation) else "Fail"
    semantic_details.extend(counterexamples)
    semantic = StageResult("Semantic", semantic_status, tuple(semantic_details))

    # stage 4: structure
    if dynamic_violation:
        structure = _skipped("Structure", "blocked command found during execution")
    elif bundle.structure_target is None:
        structure = _skipped("Structure", "this problem has no structure target")
    else:
        ok, lines = structure_check(program, bundle.structure_target)
        if ok:
            structure = StageResult("Structure", "Pass", tuple(lines))
        elif bundle.structure_required:
            structure = StageResult("Structure", "Fail", tuple(lines))
        else:
            structure = StageResult(
                "Structure",
                "Skipped",
                ("the program works differently from the suggested shape (informational only)",)
                + tuple(lines),
            )

    stages = (syntax, forbidden, semantic, structure)
    verdict = (
        "Correct"
        if all(s.status != "Fail" for s in stages)
        else "Incorrect"
    )
    return FeedbackReport(
        stages,
        verdict,
        aux_results=tuple(aux_results),
        counterexamples=tuple(counterexamples),
        seed=master_seed,
        trial_counts=tuple(trial_counts),
    )


def _violation_line(v) -> str:
    if v.phase == "Static" and v.location is not None:
        return f"{v.location.line}:{v.location.col} {v.reason}"
    return v.reason


def _run_spec(
    bundle: ProblemBundle,
    program: Program,
    spec: TestSpec,
    master_seed: int,
    known: frozenset,
    deadline: Optional[float],
):
    """Run all trials of one spec. Returns (passed, failed, mismatch_texts,
    violation_reason_or_None). A dynamic policy violation stops the spec;
    remaining trials count as failed because they never passed."""
    passed = 0
    failed = 0
    mismatches: list = []
    for trial in range(spec.trials):
        inst = instantiate(spec, trial, master_seed)
        expected = run_one(bundle.reference, inst, None, expected_side=True)
        actual = run_one(program, inst, bundle.policy, known=known, deadline=deadline)
        if actual.error is not None and actual.error[0] == "PolicyViolation":
            failed += spec.trials - trial
            return passed, failed, mismatches, actual.error[1]
        mismatch = compare_outcomes(expected, actual, inst)
        if mismatch is None:
            passed += 1
        else:
            failed += 1
            mismatches.append(mismatch.detail)
    return passed, failed, mismatches, None


def _check_aux(
    bundle: ProblemBundle,
    program: Program,
    aux: AuxCheck,
    master_seed: int,
    known: frozenset,
    deadline: Optional[float],
):
    """Check one suggested helper. Skipped when the submission does not
    define it (helpers are suggestions unless marked required)."""
    if aux.indicator not in program.index:
        return AuxResult(aux.indicator, "Skipped", advice=aux.advice), [], None
    passed = 0
    failed = 0
    examples: list = []
    counts: list = []
    for spec in aux.specs:
        p, f, mm, violated = _run_spec(bundle, program, spec, master_seed, known, deadline)
        passed += p
        failed += f
        examples.extend(mm)
        counts.append(SpecCount(spec.name, "aux", str(aux.indicator), p, f))
        if violated is not None:
            result = AuxResult(
                aux.indicator, "Fail", tuple(examples), passed, failed, aux.advice
            )
            return result, counts, violated
    status = "Pass" if failed == 0 else "Fail"
    return AuxResult(aux.indicator, status, tuple(examples), passed, failed, aux.advice), counts, None


def report_payload(report: FeedbackReport, distance, change, hints) -> dict:
    """The wire form of a graded attempt, shared verbatim by the HTTP
    service and the CLI's --json output. The seed rides as a decimal
    string because 64-bit values do not survive JavaScript number parsing.
    """
    return {
        "stages": [
            {"stage": s.stage, "status": s.status, "details": list(s.details)}
            for s in report.stages
        ],
        "verdict": report.verdict,
        "counterexamples": list(report.counterexamples),
        "auxResults": [
            {
                "indicator": str(a.indicator),
                "status": a.status,
                "counterexamples": list(a.counterexamples),
                "passed": a.passed,
                "failed": a.failed,
                "advice": a.advice,
            }
            for a in report.aux_results
        ],
        "distance": float(distance),
        "distanceChange": None if change is None else float(change),
        "hints": list(hints),
        "seed": str(report.seed),
    }


# --- structure check ------------------------------------------------------------


def _clause_term(clause: Clause) -> Term:
    body: Term = Atom("true")
    if clause.body:
        body = clause.body[-1]
        for g in reversed(clause.body[:-1]):
            body = Struct(",", (g, body))
    return Struct(":-", (clause.head, body))


def _match_clauses(subs: list, targets: list) -> list:
    """One-to-one alpha-equivalence matching, order-insensitive across
    clauses. Returns indices of unmatched target clauses (empty = full
    match). Clause counts are equal when called."""
    n = len(targets)
    used = [False] * n

    def assign(i: int) -> bool:
        if i == len(subs):
            return True
        for j in range(n):
            if not used[j] and alpha_equal(subs[i], targets[j]):
                used[j] = True
                if assign(i + 1):
                    return True
                used[j] = False
        # this submission clause matches nothing unmatched; try leaving it
        # unmatched only if some later ordering could work — with equal
        # counts a perfect matching requires every clause to pair up
        return False

    if assign(0):
        return []
    return [j for j in range(n) if not used[j]]


def structure_check(submission: Program, target: Program):
    """Compare the submission's shape to the target program.

    For every predicate the target defines, the submission must define it
    with the same number of clauses, and the clauses must pair up one to
    one (order across clauses does not matter) such that paired clauses are
    alpha-equivalent with body goal order preserved. Extra predicates in
    the submission are reported as informational lines, never failures.
    Returns (ok, report_lines).
    """
    ok = True
    lines: list = []
    # index keys preserve definition order, keeping report lines stable
    for ind in target.index.keys():
        t_clauses = target.clauses_for(ind)
        s_clauses = submission.clauses_for(ind)
        if not s_clauses:
            ok = False
            lines.append(f"{ind}: not defined (the target shape has {len(t_clauses)} clauses)")
            continue
        if len(s_clauses) != len(t_clauses):
            ok = False
            lines.append(
                f"{ind}: defines {len(s_clauses)} clauses, the target shape has {len(t_clauses)}"
            )
            continue
        sub_terms = [_clause_term(c) for c in s_clauses]
        tgt_terms = [_clause_term(c) for c in t_clauses]
        unmatched = _match_clauses(sub_terms, tgt_terms)
        if unmatched:
            ok = False
            for j in unmatched:
                lines.append(
                    f"{ind}: target clause {j + 1} has no structurally matching clause "
                    f"(variable names aside, including body goal order)"
                )
    for ind in submission.index.keys():
        if ind not in target.index:
            lines.append(f"note: the submission also defines {ind}, which the target shape does not mention")
    return ok, lines
