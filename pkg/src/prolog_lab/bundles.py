"""Problem bundle loading and validation.

A bundle is one directory per problem:

    problems/next_prime/
        problem.yaml           the manifest (fields below)
        reference.pl           hidden reference solution
        structure-target.pl    optional target shape

Manifest fields: id, title, description, and optionally domains,
limits {steps, depth, solutions}, policy {allow, deny} (lists of
"name/arity" strings), hints (list of {after, text} with strictly
increasing thresholds), main (nonempty list of test specs), aux (list of
{predicate, advice, required, specs}), structure {target, required},
reference (filename, default reference.pl). Each test spec is
{name, query, trials, compare, limits?} where query is Prolog text whose
arguments are generator pseudo-terms (int_range/2, one_of/1, list_of/3),
variables or `out` for outputs, or fixed ground terms, and compare is one
of first, solution_set, solution_multiset, prefix:K, succeeds.

load_bundle raises BundleError with a precise message at the first
problem it finds; validate_bundle goes deeper (the reference must grade
Correct at distance zero against its own bundle) and itemizes everything
it can.
"""

from __future__ import annotations

import os
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

import yaml

from .engine import Limits
from .grader import AuxCheck, ProblemBundle, grade
from .reader import parse_program, parse_term_text
from .sandbox import DEFAULT_DENIED, Policy, indicator_from_text, scan_static
from .terms import PredicateIndicator, Term
from .testgen import (
    BundleError,
    TestSpec,
    parse_compare_mode,
    validate_template,
)
from .tutor import HintLadder, compute_distance

MANIFEST_NAME = "problem.yaml"
SELF_CHECK_SEED_TAG = "bundle-self-check"


def _type_name(v) -> str:
    return type(v).__name__


def _require(table: dict, key: str, kind, where: str):
    if key not in table:
        raise BundleError(f"{where}: missing required field '{key}'")
    value = table[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise BundleError(
            f"{where}: field '{key}' must be {kind.__name__}, got {_type_name(value)}"
        )
    return value


def _optional(table: dict, key: str, kind, where: str, default=None):
    if key not in table or table[key] is None:
        return default
    value = table[key]
    if not isinstance(value, kind) or (isinstance(value, bool) and kind is int):
        raise BundleError(
            f"{where}: field '{key}' must be {kind.__name__}, got {_type_name(value)}"
        )
    return value


def _parse_limits(table: Optional[dict], where: str, base: Limits) -> Limits:
    if table is None:
        return base
    if not isinstance(table, dict):
        raise BundleError(f"{where}: limits must be a mapping, got {_type_name(table)}")
    known = {"steps", "depth", "solutions"}
    for key in table:
        if key not in known:
            raise BundleError(f"{where}: unknown limits field '{key}' (expected steps, depth, solutions)")
    steps = _optional(table, "steps", int, where, base.max_steps)
    depth = _optional(table, "depth", int, where, base.max_depth)
    solutions = _optional(table, "solutions", int, where, base.max_solutions)
    for name, value in (("steps", steps), ("depth", depth), ("solutions", solutions)):
        if value <= 0:
            raise BundleError(f"{where}: limits.{name} must be positive, got {value}")
    return Limits(max_steps=steps, max_depth=depth, max_solutions=solutions)


def _parse_indicator(text, where: str) -> PredicateIndicator:
    if not isinstance(text, str):
        raise BundleError(f"{where}: predicate indicator must be a string like 'name/2', got {_type_name(text)}")
    try:
        return indicator_from_text(text)
    except ValueError:
        raise BundleError(f"{where}: '{text}' is not a valid predicate indicator (expected name/arity)") from None


def _parse_policy(table: Optional[dict], where: str) -> Policy:
    if table is None:
        return Policy()
    if not isinstance(table, dict):
        raise BundleError(f"{where}: policy must be a mapping, got {_type_name(table)}")
    for key in table:
        if key not in ("allow", "deny"):
            raise BundleError(f"{where}: unknown policy field '{key}' (expected allow, deny)")
    allow = _optional(table, "allow", list, where, [])
    deny = _optional(table, "deny", list, where, [])
    allowed = frozenset(_parse_indicator(t, f"{where}.allow") for t in allow)
    extra = frozenset(_parse_indicator(t, f"{where}.deny") for t in deny)
    return Policy(denied=DEFAULT_DENIED | extra, allowed=allowed)


def _parse_query(text: str, where: str) -> Term:
    term, diagnostics = parse_term_text(text)
    if term is None:
        first = diagnostics[0] if diagnostics else "unreadable term"
        raise BundleError(f"{where}: query does not parse: {first}")
    try:
        validate_template(term)
    except BundleError as err:
        raise BundleError(f"{where}: {err}") from None
    return term


def _parse_spec(entry, where: str, base_limits: Limits) -> TestSpec:
    if not isinstance(entry, dict):
        raise BundleError(f"{where}: each test spec must be a mapping, got {_type_name(entry)}")
    known = {"name", "query", "trials", "compare", "limits"}
    for key in entry:
        if key not in known:
            raise BundleError(f"{where}: unknown spec field '{key}'")
    name = _require(entry, "name", str, where)
    query = _require(entry, "query", str, where)
    trials = _require(entry, "trials", int, where)
    if trials < 1:
        raise BundleError(f"{where}: trials must be at least 1, got {trials}")
    compare_text = _require(entry, "compare", str, where)
    try:
        mode = parse_compare_mode(compare_text)
    except BundleError as err:
        raise BundleError(f"{where}: {err}") from None
    limits = _parse_limits(entry.get("limits"), f"{where}.limits", base_limits)
    if mode.kind == "prefix" and mode.k > limits.max_solutions:
        raise BundleError(
            f"{where}: prefix length {mode.k} exceeds the solution limit {limits.max_solutions}"
        )
    template = _parse_query(query, where)
    return TestSpec(name=name, template=template, trials=trials, compare_mode=mode, limits=limits)


def _parse_hints(entries, where: str) -> HintLadder:
    if entries is None:
        return HintLadder(())
    if not isinstance(entries, list):
        raise BundleError(f"{where}: hints must be a list, got {_type_name(entries)}")
    rungs = []
    last = 0
    for i, entry in enumerate(entries, start=1):
        rung_where = f"{where}[{i}]"
        if not isinstance(entry, dict):
            raise BundleError(f"{rung_where}: each hint must be a mapping with 'after' and 'text'")
        for key in entry:
            if key not in ("after", "text"):
                raise BundleError(f"{rung_where}: unknown hint field '{key}'")
        after = _require(entry, "after", int, rung_where)
        text = _require(entry, "text", str, rung_where).strip()
        if after <= last:
            raise BundleError(
                f"{rung_where}: threshold {after} must be greater than the previous ({last})"
            )
        last = after
        rungs.append((after, text))
    return HintLadder(tuple(rungs))


def _read_source(directory: Path, filename: str, where: str) -> str:
    path = directory / filename
    if not path.is_file():
        raise BundleError(f"{where}: file '{filename}' not found in {directory}")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise BundleError(f"{where}: '{filename}' is not valid UTF-8: {err}") from None


def load_bundle(directory: Union[str, Path]) -> ProblemBundle:
    """Read and structurally validate one bundle directory."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not directory.is_dir():
        raise BundleError(f"bundle directory not found: {directory}")
    if not manifest_path.is_file():
        raise BundleError(f"{directory}: missing {MANIFEST_NAME}")
    try:
        raw = yaml.safe_load(manifest_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise BundleError(f"{MANIFEST_NAME}: invalid YAML: {err}") from None
    if not isinstance(raw, dict):
        raise BundleError(f"{MANIFEST_NAME}: top level must be a mapping")

    where = MANIFEST_NAME
    known = {
        "id", "title", "description", "domains", "limits", "policy",
        "hints", "main", "aux", "structure", "reference",
    }
    for key in raw:
        if key not in known:
            raise BundleError(f"{where}: unknown field '{key}'")

    bundle_id = _require(raw, "id", str, where)
    if not bundle_id or not all(c.isalnum() or c in "_-" for c in bundle_id):
        raise BundleError(f"{where}: id must be a nonempty name of letters, digits, '_' or '-'")
    title = _require(raw, "title", str, where)
    description = _require(raw, "description", str, where)
    domains_raw = _optional(raw, "domains", list, where, [])
    for d in domains_raw:
        if not isinstance(d, str) or not d:
            raise BundleError(f"{where}: domains must be nonempty strings")
    limits = _parse_limits(raw.get("limits"), f"{where}.limits", Limits())
    policy = _parse_policy(raw.get("policy"), f"{where}.policy")
    ladder = _parse_hints(raw.get("hints"), f"{where}.hints")

    main_raw = _require(raw, "main", list, where)
    if not main_raw:
        raise BundleError(f"{where}: main must list at least one test spec")
    main_specs = tuple(
        _parse_spec(entry, f"{where}.main[{i}]", limits)
        for i, entry in enumerate(main_raw, start=1)
    )
    seen_names = set()
    for spec in main_specs:
        if spec.name in seen_names:
            raise BundleError(f"{where}: duplicate spec name '{spec.name}'")
        seen_names.add(spec.name)

    aux_checks = []
    seen_aux = set()
    for i, entry in enumerate(_optional(raw, "aux", list, where, []), start=1):
        aux_where = f"{where}.aux[{i}]"
        if not isinstance(entry, dict):
            raise BundleError(f"{aux_where}: each aux entry must be a mapping")
        for key in entry:
            if key not in ("predicate", "advice", "required", "specs"):
                raise BundleError(f"{aux_where}: unknown field '{key}'")
        ind = _parse_indicator(_require(entry, "predicate", str, aux_where), aux_where)
        if ind in seen_aux:
            raise BundleError(f"{aux_where}: duplicate aux predicate {ind}")
        seen_aux.add(ind)
        advice = _optional(entry, "advice", str, aux_where, "").strip()
        required = _optional(entry, "required", bool, aux_where, False)
        specs_raw = _require(entry, "specs", list, aux_where)
        if not specs_raw:
            raise BundleError(f"{aux_where}: specs must list at least one test spec")
        specs = tuple(
            _parse_spec(s, f"{aux_where}.specs[{j}]", limits)
            for j, s in enumerate(specs_raw, start=1)
        )
        for spec in specs:
            if spec.name in seen_names:
                raise BundleError(f"{where}: duplicate spec name '{spec.name}'")
            seen_names.add(spec.name)
            if spec.indicator() != ind:
                raise BundleError(
                    f"{aux_where}: spec '{spec.name}' tests {spec.indicator()}, expected {ind}"
                )
        aux_checks.append(AuxCheck(indicator=ind, specs=specs, advice=advice, required=required))

    reference_file = _optional(raw, "reference", str, where, "reference.pl")
    reference_source = _read_source(directory, reference_file, f"{where}.reference")
    parsed = parse_program(reference_source)
    if not parsed.ok:
        first = parsed.errors()[0]
        raise BundleError(f"{reference_file}: reference does not parse: {first}")

    structure_target = None
    structure_required = False
    structure_raw = raw.get("structure")
    if structure_raw is not None:
        s_where = f"{where}.structure"
        if not isinstance(structure_raw, dict):
            raise BundleError(f"{s_where}: structure must be a mapping")
        for key in structure_raw:
            if key not in ("target", "required"):
                raise BundleError(f"{s_where}: unknown field '{key}'")
        target_file = _require(structure_raw, "target", str, s_where)
        structure_required = _optional(structure_raw, "required", bool, s_where, False)
        target_source = _read_source(directory, target_file, s_where)
        target_parsed = parse_program(target_source)
        if not target_parsed.ok:
            first = target_parsed.errors()[0]
            raise BundleError(f"{target_file}: structure target does not parse: {first}")
        structure_target = target_parsed.program

    return ProblemBundle(
        id=bundle_id,
        title=title,
        description=description,
        reference_source=reference_source,
        reference=parsed.program,
        main_specs=main_specs,
        aux_checks=tuple(aux_checks),
        structure_target=structure_target,
        structure_required=structure_required,
        policy=policy,
        hint_ladder=ladder,
        limits=limits,
        domains=tuple(domains_raw),
    )


def self_check_seed(bundle_id: str) -> int:
    from .testgen import derive_seed

    return derive_seed(SELF_CHECK_SEED_TAG, bundle_id)


def validate_bundle(directory: Union[str, Path]) -> list:
    """Full validation: structural load plus behavioral self-checks.
    Returns an itemized list of problems; empty means the bundle is valid.
    """
    try:
        bundle = load_bundle(directory)
    except BundleError as err:
        return [str(err)]

    problems: list = []

    violations = scan_static(bundle.reference, bundle.policy)
    for v in violations:
        problems.append(f"reference uses a blocked command: {v.reason}")

    defined = set(bundle.reference.index.keys())
    for spec in bundle.main_specs:
        if spec.indicator() not in defined:
            problems.append(
                f"reference does not define {spec.indicator()}, needed by spec '{spec.name}'"
            )
    for aux in bundle.aux_checks:
        if aux.indicator not in defined:
            problems.append(
                f"reference does not define the aux predicate {aux.indicator}"
            )
    if problems:
        return problems

    # the reference must grade Correct at distance zero against its own bundle
    try:
        report = grade(bundle, bundle.reference_source, self_check_seed(bundle.id))
    except BundleError as err:
        return [f"self-check could not run: {err}"]
    if report.verdict != "Correct":
        for count in report.trial_counts:
            if count.failed:
                problems.append(
                    f"reference fails its own spec '{count.spec_name}' "
                    f"({count.failed} of {count.passed + count.failed} trials)"
                )
        for stage in report.stages:
            if stage.status == "Fail" and stage.stage in ("Forbidden", "Structure"):
                problems.append(f"reference fails the {stage.stage} stage")
        for line in report.counterexamples[:3]:
            problems.append(f"witness: {line}")
        if not problems:
            problems.append("reference does not grade Correct against its own bundle")
        return problems
    distance = compute_distance(report)
    if distance != Fraction(0):
        problems.append(f"reference grades Correct but at distance {distance}, expected 0")
    return problems


def discover_bundles(root: Union[str, Path]):
    """Scan a repository root. Returns (bundles sorted by id, exclusions)
    where exclusions maps directory name to the list of validation problems.
    """
    root = Path(root)
    bundles = []
    excluded: dict = {}
    if not root.is_dir():
        raise BundleError(f"bundle repository not found: {root}")
    for entry in sorted(os.listdir(root)):
        directory = root / entry
        if not directory.is_dir() or not (directory / MANIFEST_NAME).is_file():
            continue
        problems = validate_bundle(directory)
        if problems:
            excluded[entry] = problems
            continue
        bundles.append(load_bundle(directory))
    bundles.sort(key=lambda b: b.id)
    seen = set()
    for b in bundles:
        if b.id in seen:
            raise BundleError(f"duplicate bundle id '{b.id}' in {root}")
        seen.add(b.id)
    return bundles, excluded
