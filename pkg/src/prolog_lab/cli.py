"""Command-line entry points for authors and CI.

    prolog-lab grade PROBLEM_DIR SOLUTION.pl [--seed N] [--json]
    prolog-lab validate-bundle PROBLEM_DIR
    prolog-lab preview-tests PROBLEM_DIR [--seed N] [--trials N]
    prolog-lab serve REPO_ROOT [--host H] [--port P] [--log FILE] [--frontend DIR]

Exit codes are a CI contract: 0 success or verdict Correct, 1 verdict
Incorrect, 2 usage error (bad paths, bad flags, busy port), 3 invalid
bundle, 4 internal error. Reports go to stdout, logs and errors to stderr.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from .bundles import load_bundle, validate_bundle
from .grader import FeedbackReport, ProblemBundle, grade, report_payload
from .terms import render_term
from .testgen import BundleError, derive_seed, instantiate, run_one
from .tutor import compute_distance

EXIT_CORRECT = 0
EXIT_INCORRECT = 1
EXIT_USAGE = 2
EXIT_BAD_BUNDLE = 3
EXIT_INTERNAL = 4


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def render_report(bundle: ProblemBundle, report: FeedbackReport, distance) -> str:
    """Plain-text form of a graded attempt, for terminals and CI logs."""
    lines = [f"problem: {bundle.title} ({bundle.id})", f"seed: {report.seed}", ""]
    for stage in report.stages:
        lines.append(f"  {stage.stage:<10} {stage.status}")
        for detail in stage.details:
            lines.append(f"      {detail}")
    if report.aux_results:
        lines.append("")
        lines.append("helpers:")
        for aux in report.aux_results:
            counts = ""
            if aux.status != "Skipped":
                counts = f"  ({aux.passed} passed, {aux.failed} failed)"
            lines.append(f"  {str(aux.indicator):<14} {aux.status}{counts}")
            for example in aux.counterexamples:
                lines.append(f"      {example}")
            if aux.status == "Fail" and aux.advice:
                lines.append(f"      advice: {aux.advice}")
    lines.append("")
    lines.append(f"verdict: {report.verdict}")
    lines.append(f"distance: {float(distance):.3f}")
    return "\n".join(lines)


def cmd_grade(args) -> int:
    bundle_dir = Path(args.bundle_dir)
    solution = Path(args.solution)
    if not bundle_dir.is_dir():
        _err(f"bundle directory not found: {bundle_dir}")
        return EXIT_USAGE
    if not solution.is_file():
        _err(f"solution file not found: {solution}")
        return EXIT_USAGE
    try:
        bundle = load_bundle(bundle_dir)
    except BundleError as e:
        _err(str(e))
        return EXIT_BAD_BUNDLE
    try:
        source = solution.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        _err(f"{solution} is not valid UTF-8: {e}")
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else derive_seed(bundle.id)
    try:
        report = grade(bundle, source, seed)
    except BundleError as e:
        _err(str(e))
        return EXIT_BAD_BUNDLE
    distance = compute_distance(report)
    if args.json:
        payload = report_payload(report, distance, None, [])
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(render_report(bundle, report, distance))
    return EXIT_CORRECT if report.verdict == "Correct" else EXIT_INCORRECT


def cmd_validate_bundle(args) -> int:
    bundle_dir = Path(args.bundle_dir)
    if not bundle_dir.is_dir():
        _err(f"bundle directory not found: {bundle_dir}")
        return EXIT_USAGE
    problems = validate_bundle(bundle_dir)
    if problems:
        print(f"bundle {bundle_dir} is INVALID:")
        for problem in problems:
            print(f"  - {problem}")
        return EXIT_BAD_BUNDLE
    bundle = load_bundle(bundle_dir)
    spec_count = len(bundle.main_specs) + sum(len(a.specs) for a in bundle.aux_checks)
    print(f"bundle {bundle.id} OK: {spec_count} test specs, "
          f"{len(bundle.aux_checks)} helper checks, "
          f"{len(bundle.hint_ladder.rungs)} hints")
    return EXIT_CORRECT


def _preview_outcome(inst, outcome) -> str:
    if outcome.error is not None:
        return f"error: {outcome.error[1]}"
    if not outcome.solutions:
        return "fails"
    names = [name for name, _ in inst.outputs]
    if not names:
        return "succeeds"
    parts = []
    for solution in outcome.solutions:
        parts.append(", ".join(f"{n} = {render_term(t)}" for n, t in zip(names, solution)))
    joined = " ; ".join(parts)
    if outcome.truncated:
        joined += " ; ..."
    return joined


def cmd_preview_tests(args) -> int:
    bundle_dir = Path(args.bundle_dir)
    if not bundle_dir.is_dir():
        _err(f"bundle directory not found: {bundle_dir}")
        return EXIT_USAGE
    if args.trials is not None and args.trials < 1:
        _err("--trials must be at least 1")
        return EXIT_USAGE
    problems = validate_bundle(bundle_dir)
    if problems:
        _err(f"bundle is invalid: {problems[0]}")
        return EXIT_BAD_BUNDLE
    bundle = load_bundle(bundle_dir)
    seed = args.seed if args.seed is not None else 0
    all_specs = [("main", spec) for spec in bundle.main_specs]
    for aux in bundle.aux_checks:
        all_specs.extend((f"aux {aux.indicator}", spec) for spec in aux.specs)
    for group, spec in all_specs:
        trials = args.trials if args.trials is not None else spec.trials
        print(f"spec {spec.name} [{group}] ({spec.compare_mode}, {trials} trials)")
        for trial in range(trials):
            inst = instantiate(spec, trial, seed)
            outcome = run_one(bundle.reference, inst, None, expected_side=True)
            query = render_term(inst.query)
            print(f"  {query} => {_preview_outcome(inst, outcome)}")
    return EXIT_CORRECT


def cmd_serve(args) -> int:
    root = Path(args.repo_root)
    if not root.is_dir():
        _err(f"bundle repository not found: {root}")
        return EXIT_USAGE
    # claim-check the port up front for a clean usage error
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
    except OSError as e:
        _err(f"cannot bind {args.host}:{args.port}: {e}")
        return EXIT_USAGE
    finally:
        probe.close()

    import uvicorn

    from .service import create_app

    frontend = args.frontend
    if frontend is None and Path("frontend/dist").is_dir():
        frontend = "frontend/dist"
    app = create_app(root, log_path=args.log, frontend_dir=frontend)
    for name, reasons in app.state.excluded.items():
        for reason in reasons:
            print(f"excluded bundle {name}: {reason}", file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_CORRECT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prolog-lab",
        description="Grade Prolog exercises against hidden references with randomized tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_grade = sub.add_parser("grade", help="grade one solution file against a bundle")
    p_grade.add_argument("bundle_dir")
    p_grade.add_argument("solution")
    p_grade.add_argument("--seed", type=int, default=None, help="master seed (default: derived from the bundle id)")
    p_grade.add_argument("--json", action="store_true", help="machine-readable report")
    p_grade.set_defaults(func=cmd_grade)

    p_validate = sub.add_parser("validate-bundle", help="check a bundle directory")
    p_validate.add_argument("bundle_dir")
    p_validate.set_defaults(func=cmd_validate_bundle)

    p_preview = sub.add_parser("preview-tests", help="print instantiated test queries and expected outcomes")
    p_preview.add_argument("bundle_dir")
    p_preview.add_argument("--seed", type=int, default=None)
    p_preview.add_argument("--trials", type=int, default=None, help="override the trial count of every spec")
    p_preview.set_defaults(func=cmd_preview_tests)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("repo_root")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--log", default=None, help="attempt log path (default: attempts.jsonl in the repo root)")
    p_serve.add_argument("--frontend", default=None, help="directory of built frontend assets to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as e:  # the CI contract: unexpected failures exit 4
        _err(f"internal error: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
