"""Randomized test instances: sampling, execution, and outcome comparison.

A problem bundle describes each check as a template like

    next_prime(int_range(2, 10000), P)

where argument positions are either input generators (int_range, one_of,
list_of, fixed, or any ground term standing for itself) or output markers
(a named variable, or the atom `out`). Instantiation replaces generators
with sampled ground terms and outputs with fresh variables; the same
(master seed, spec name, trial index) always reproduces the same query,
byte for byte, on any platform. That is what makes grading disputes
settleable, so the PRNG is pinned here rather than borrowed from the host
language: SplitMix64 for the stream, SHA-256 over length-prefixed key parts
for seed derivation, rejection sampling for unbiased bounded draws.

Expected outcomes come from running the hidden reference per instance at
grading time; compare_outcomes then judges the learner's outcome under the
spec's mode (First, SolutionSet, SolutionMultiset, Prefix(K), Succeeds) and
phrases any mismatch as a concrete counterexample the learner can replay.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union

from .engine import Limits, SolveOutcome, solve
from .sandbox import Policy, make_policy_hook
from .terms import (
    Atom,
    FreshCounter,
    Int,
    PredicateIndicator,
    Program,
    Struct,
    Term,
    Var,
    compare,
    indicator_of,
    is_ground,
    list_parts,
    normalize_variables,
    render_term,
)

_MASK64 = (1 << 64) - 1


class BundleError(Exception):
    """An authoring mistake in a problem bundle (not a learner error)."""


class SplitMix64:
    """Pinned 64-bit PRNG (SplitMix64). Deterministic across platforms."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = ((1 << 64) // n) * n
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % n

    def int_between(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)


def derive_seed(*parts: Union[str, int]) -> int:
    """Collapse key parts into a 64-bit seed, stably across platforms.

    Each part is length-prefixed before hashing so ("ab","c") and ("a","bc")
    derive different seeds.
    """
    h = hashlib.sha256()
    for part in parts:
        data = str(part).encode("utf-8")
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return int.from_bytes(h.digest()[:8], "big")


# --- generators ---------------------------------------------------------------


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int


@dataclass(frozen=True)
class OneOf:
    choices: tuple  # nonempty, ground terms


@dataclass(frozen=True)
class ListOf:
    element: "GeneratorType"
    len_lo: int
    len_hi: int


@dataclass(frozen=True)
class Fixed:
    term: Term  # ground


GeneratorType = Union[IntRange, OneOf, ListOf, Fixed]


def parse_generator(t: Term) -> Optional[GeneratorType]:
    """Interpret a template argument as a generator pseudo-term.

    Returns None when the term is not generator syntax (it is then an
    output marker or a fixed ground term, decided by the caller). Raises
    BundleError for generator syntax with bad parameters.
    """
    if isinstance(t, Struct):
        key = (t.name, len(t.args))
        if key == ("int_range", 2):
            lo, hi = t.args
            if not (isinstance(lo, Int) and isinstance(hi, Int)):
                raise BundleError(f"int_range bounds must be integers, got {render_term(t)}")
            if lo.value > hi.value:
                raise BundleError(f"int_range lower bound exceeds upper bound in {render_term(t)}")
            return IntRange(lo.value, hi.value)
        if key == ("one_of", 1):
            items, tail = list_parts(t.args[0])
            if not (isinstance(tail, Atom) and tail.name == "[]"):
                raise BundleError(f"one_of needs a proper list, got {render_term(t)}")
            if not items:
                raise BundleError("one_of needs at least one choice")
            for item in items:
                if not is_ground(item):
                    raise BundleError(f"one_of choices must be ground, got {render_term(item)}")
            return OneOf(tuple(items))
        if key == ("list_of", 3):
            element = parse_generator(t.args[0])
            if element is None:
                if is_ground(t.args[0]):
                    element = Fixed(t.args[0])
                else:
                    raise BundleError(f"list_of element is not a generator: {render_term(t.args[0])}")
            lo, hi = t.args[1], t.args[2]
            if not (isinstance(lo, Int) and isinstance(hi, Int)):
                raise BundleError(f"list_of length bounds must be integers in {render_term(t)}")
            if lo.value < 0 or lo.value > hi.value:
                raise BundleError(f"list_of length bounds invalid in {render_term(t)}")
            return ListOf(element, lo.value, hi.value)
        if key == ("fixed", 1):
            if not is_ground(t.args[0]):
                raise BundleError(f"fixed needs a ground term, got {render_term(t.args[0])}")
            return Fixed(t.args[0])
    return None


def sample(gen: GeneratorType, rng: SplitMix64) -> Term:
    if isinstance(gen, IntRange):
        return Int(rng.int_between(gen.lo, gen.hi))
    if isinstance(gen, OneOf):
        return gen.choices[rng.below(len(gen.choices))]
    if isinstance(gen, Fixed):
        return gen.term
    # ListOf
    length = rng.int_between(gen.len_lo, gen.len_hi)
    items = [sample(gen.element, rng) for _ in range(length)]
    lst: Term = Atom("[]")
    for item in reversed(items):
        lst = Struct(".", (item, lst))
    return lst


# --- specs and instances --------------------------------------------------------


@dataclass(frozen=True)
class CompareMode:
    kind: str  # "first" | "solution_set" | "solution_multiset" | "prefix" | "succeeds"
    k: Optional[int] = None  # prefix length, prefix mode only

    def __str__(self) -> str:
        return f"prefix:{self.k}" if self.kind == "prefix" else self.kind


_MODE_KINDS = ("first", "solution_set", "solution_multiset", "prefix", "succeeds")


def parse_compare_mode(text: str) -> CompareMode:
    if text.startswith("prefix:"):
        tail = text[len("prefix:") :]
        if not tail.isdigit() or int(tail) < 1:
            raise BundleError(f"prefix mode needs a positive count, got {text!r}")
        return CompareMode("prefix", int(tail))
    if text not in _MODE_KINDS or text == "prefix":
        raise BundleError(f"unknown compare mode {text!r}")
    return CompareMode(text)


@dataclass(frozen=True)
class TestSpec:
    name: str
    template: Term  # callable term; args are generators / outputs / ground
    trials: int
    compare_mode: CompareMode
    limits: Limits

    def indicator(self) -> PredicateIndicator:
        return indicator_of(self.template)


def validate_template(template: Term) -> None:
    """Raise BundleError unless every argument is a generator, an output
    marker (variable or the atom `out`), or a fixed ground term."""
    if isinstance(template, Atom):
        return
    if not isinstance(template, Struct):
        raise BundleError(f"template must be a callable term, got {render_term(template)}")
    for i, arg in enumerate(template.args, start=1):
        if isinstance(arg, Var):
            continue
        if isinstance(arg, Atom) and arg.name == "out":
            continue
        if parse_generator(arg) is not None:
            continue
        if is_ground(arg):
            continue
        raise BundleError(
            f"template argument {i} of {render_term(template)} is neither a "
            f"generator, an output variable, nor ground"
        )


@dataclass(frozen=True)
class TestInstance:
    spec_name: str
    trial_index: int
    query: Term  # ground inputs filled in, outputs are fresh variables
    seed: int
    outputs: tuple  # (name, Var) pairs in template order
    compare_mode: CompareMode
    limits: Limits


def instantiate(spec: TestSpec, trial_index: int, master_seed: int) -> TestInstance:
    """Build the concrete query for one trial, deterministically."""
    seed = derive_seed(master_seed, spec.name, trial_index)
    rng = SplitMix64(seed)
    counter = FreshCounter(1)
    outputs: list = []
    template = spec.template
    if isinstance(template, Atom):
        return TestInstance(spec.name, trial_index, template, seed, (), spec.compare_mode, spec.limits)
    new_args: list[Term] = []
    anon = 0
    for arg in template.args:
        if isinstance(arg, Var):
            v = Var(counter.next(), arg.name)
            outputs.append((arg.name or f"Out{len(outputs) + 1}", v))
            new_args.append(v)
            continue
        if isinstance(arg, Atom) and arg.name == "out":
            anon += 1
            v = Var(counter.next(), f"Out{anon}")
            outputs.append((f"Out{anon}", v))
            new_args.append(v)
            continue
        gen = parse_generator(arg)
        if gen is not None:
            new_args.append(sample(gen, rng))
        else:
            new_args.append(arg)  # fixed ground argument
    query = Struct(template.name, tuple(new_args))
    return TestInstance(spec.name, trial_index, query, seed, tuple(outputs), spec.compare_mode, spec.limits)


# --- execution ------------------------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    solutions: tuple  # tuple of per-solution tuples of output terms
    truncated: bool
    error: Optional[tuple] = None  # (halt_reason_or_kind, detail)

    @property
    def succeeded(self) -> bool:
        return self.error is None and len(self.solutions) > 0


def _solution_cap(mode: CompareMode, limits: Limits, expected_side: bool) -> int:
    if mode.kind == "first":
        # learner side needs only the first answer; the reference draws two
        # so determinism can be checked
        return 2 if expected_side else 1
    if mode.kind == "succeeds":
        return 1
    if mode.kind == "prefix":
        return min(mode.k, limits.max_solutions)
    return limits.max_solutions


def run_one(
    program: Program,
    inst: TestInstance,
    policy: Optional[Policy],
    expected_side: bool = False,
    known: frozenset = frozenset(),
    deadline: Optional[float] = None,
) -> Outcome:
    """Execute one instance and reduce the engine outcome to an Outcome.

    Never raises for learner programs; every failure shape (policy denial,
    runtime error, budget caps) lands in Outcome.error. `known` extends the
    sandbox's notion of defined predicates with the problem's declared
    indicators so a missing target predicate reads as "not defined".
    """
    cap = _solution_cap(inst.compare_mode, inst.limits, expected_side)
    limits = Limits(inst.limits.max_steps, inst.limits.max_depth, cap)
    hook = make_policy_hook(policy, known) if policy is not None else None
    out: SolveOutcome = solve(
        program,
        (inst.query,),
        [v for _, v in inst.outputs],
        limits=limits,
        policy_hook=hook,
        deadline=deadline,
    )
    names = [name for name, _ in inst.outputs]
    solutions = tuple(tuple(sol[n] for n in names) for sol in out.solutions)
    if out.halt_reason == "PolicyViolation":
        return Outcome(solutions, False, ("PolicyViolation", out.error_detail or ""))
    if out.halt_reason == "RuntimeError":
        return Outcome(solutions, False, (out.error_kind or "error", out.error_detail or ""))
    if out.halt_reason in ("StepCap", "DepthCap"):
        # the whole run was cut short; callers treat this as truncation
        return Outcome(solutions, True, None)
    return Outcome(solutions, out.halt_reason == "SolutionCap", None)


# --- comparison -----------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    detail: str  # learner-facing counterexample text


def _canon_key(solution: tuple) -> str:
    packed: Term = Struct("s", tuple(solution)) if solution else Atom("s")
    return render_term(normalize_variables(packed))


def _witness(names: list, solution: tuple) -> str:
    if not solution:
        return "success"
    return ", ".join(f"{n} = {render_term(t)}" for n, t in zip(names, solution))


def _error_phrase(error: tuple) -> str:
    kind, detail = error
    if kind == "PolicyViolation":
        return f"stopped by the command policy ({detail})"
    return f"stopped with a runtime error ({detail})"


def compare_outcomes(expected: Outcome, actual: Outcome, inst: TestInstance) -> Optional[Mismatch]:
    """Judge the learner outcome against the reference outcome.

    Returns None on a match, otherwise a Mismatch whose detail names the
    ground query, the expected witness, and what actually happened. Raises
    BundleError when the reference outcome cannot anchor the comparison
    (errored, nondeterministic under First, truncated under a set mode).
    """
    mode = inst.compare_mode
    names = [n for n, _ in inst.outputs]
    q = render_term(inst.query)
    if expected.error is not None:
        raise BundleError(
            f"reference failed on {q}: {_error_phrase(expected.error)}; fix the bundle"
        )

    if actual.error is not None:
        want = _expected_summary(expected, mode, names)
        return Mismatch(f"for {q}: expected {want}, but the program {_error_phrase(actual.error)}")

    if mode.kind == "succeeds":
        if bool(expected.solutions) == bool(actual.solutions):
            return None
        if expected.solutions:
            return Mismatch(f"for {q}: expected the goal to succeed, but it found no solution")
        return Mismatch(f"for {q}: expected the goal to fail, but it succeeded")

    if mode.kind == "first":
        if len(expected.solutions) == 0:
            raise BundleError(f"reference found no solution for {q}; fix the bundle")
        if len(expected.solutions) > 1:
            raise BundleError(
                f"reference is not deterministic on {q} (multiple solutions) "
                f"but the spec uses first-solution comparison; fix the bundle"
            )
        want = expected.solutions[0]
        if not actual.solutions:
            return Mismatch(f"for {q}: expected {_witness(names, want)}, got no solution")
        got = actual.solutions[0]
        if _tuples_equal(want, got):
            return None
        return Mismatch(f"for {q}: expected {_witness(names, want)}, got {_witness(names, got)}")

    if mode.kind == "prefix":
        k = mode.k or 0
        want_seq = expected.solutions[:k]
        got_seq = actual.solutions[:k]
        for i, want in enumerate(want_seq):
            if i >= len(got_seq):
                return Mismatch(
                    f"for {q}: expected solution {i + 1} to be {_witness(names, want)}, "
                    f"got no further solution"
                )
            if not _tuples_equal(want, got_seq[i]):
                return Mismatch(
                    f"for {q}: expected solution {i + 1} to be {_witness(names, want)}, "
                    f"got {_witness(names, got_seq[i])}"
                )
        if len(got_seq) > len(want_seq):
            return Mismatch(
                f"for {q}: got an unexpected extra solution "
                f"{_witness(names, got_seq[len(want_seq)])}"
            )
        return None

    # set and multiset modes
    if expected.truncated:
        raise BundleError(
            f"reference enumeration for {q} was truncated; raise the limits or "
            f"shrink the instance space in the bundle"
        )
    if actual.truncated:
        return Mismatch(
            f"for {q}: the program did not finish enumerating its solutions within the run limits"
        )
    want_keys = [_canon_key(s) for s in expected.solutions]
    got_keys = [_canon_key(s) for s in actual.solutions]
    want_by_key = dict(zip(want_keys, expected.solutions))
    got_by_key = dict(zip(got_keys, actual.solutions))

    if mode.kind == "solution_set":
        want_set, got_set = set(want_keys), set(got_keys)
        if want_set == got_set:
            return None
        missing = sorted(want_set - got_set)
        extra = sorted(got_set - want_set)
        if missing:
            return Mismatch(
                f"for {q}: missing solution {_witness(names, want_by_key[missing[0]])}"
            )
        return Mismatch(
            f"for {q}: unexpected solution {_witness(names, got_by_key[extra[0]])}"
        )

    # solution_multiset
    want_counts = _counts(want_keys)
    got_counts = _counts(got_keys)
    if want_counts == got_counts:
        return None
    for key in sorted(set(want_counts) | set(got_counts)):
        w, g = want_counts.get(key, 0), got_counts.get(key, 0)
        if w == g:
            continue
        witness = _witness(names, (want_by_key.get(key) or got_by_key.get(key)))
        if g == 0:
            return Mismatch(f"for {q}: missing solution {witness}")
        if w == 0:
            return Mismatch(f"for {q}: unexpected solution {witness}")
        return Mismatch(
            f"for {q}: solution {witness} appears {g} times, expected {w} times"
        )
    return None  # unreachable


def _counts(keys: list) -> dict:
    out: dict = {}
    for k in keys:
        out[k] = out.get(k, 0) + 1
    return out


def _tuples_equal(a: tuple, b: tuple) -> bool:
    return len(a) == len(b) and all(compare(x, y) == 0 for x, y in zip(a, b))


def _expected_summary(expected: Outcome, mode: CompareMode, names: list) -> str:
    if mode.kind == "succeeds":
        return "the goal to succeed" if expected.solutions else "the goal to fail"
    if expected.solutions:
        return _witness(names, expected.solutions[0])
    return "no solution"
