"""Command policy: what a submission may call, checked twice.

A static scan flags blocked commands that appear literally in call position
of any clause body. It cannot see goals assembled at run time (via =../2 or
call/N with a variable), so the same policy is also installed as the
engine's per-call hook; that dynamic check is the authoritative one. The
static pass exists to reject obviously hostile programs before any
execution happens.

Policy semantics:

  * `denied` lists blocked predicate indicators (OS, file system, database
    mutation by default);
  * `allowed` lists per-problem opt-ins and wins over `denied`; after
    normalization the two sets are disjoint;
  * `deny_unknown` (default on) additionally denies calls to predicates
    that are neither defined by the running program nor engine builtins.
    Callers may extend the known set with the indicators a problem is
    expected to define, so a submission that simply leaves the target
    predicate out still gets the ordinary "not defined" runtime error
    rather than a policy message.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

from .terms import (
    Atom,
    Int,
    PredicateIndicator,
    Program,
    Struct,
    Term,
    Var,
    indicator_of,
)
from .reader import SourceSpan

DEFAULT_DENIED: frozenset[PredicateIndicator] = frozenset(
    PredicateIndicator(n, a)
    for n, a in [
        ("halt", 0),
        ("halt", 1),
        ("shell", 1),
        ("shell", 2),
        ("system", 1),
        ("exec", 1),
        ("open", 3),
        ("open", 4),
        ("close", 1),
        ("see", 1),
        ("seen", 0),
        ("tell", 1),
        ("told", 0),
        ("read", 1),
        ("consult", 1),
        ("ensure_loaded", 1),
        ("assertz", 1),
        ("asserta", 1),
        ("retract", 1),
        ("abolish", 1),
        ("abolish", 2),
        ("op", 3),
    ]
)


@dataclass(frozen=True)
class Policy:
    denied: frozenset = DEFAULT_DENIED
    allowed: frozenset = frozenset()
    deny_unknown: bool = True

    def __post_init__(self):
        # overrides win and are removed, keeping the sets disjoint
        if self.denied & self.allowed:
            object.__setattr__(self, "denied", self.denied - self.allowed)

    def is_denied(self, ind: PredicateIndicator) -> bool:
        return ind in self.denied


def default_policy() -> Policy:
    return Policy()


@dataclass(frozen=True)
class Violation:
    indicator: PredicateIndicator
    phase: str  # "Static" | "Dynamic"
    location: Union[SourceSpan, int, None]  # span (static) or step number (dynamic)
    reason: str


def indicator_from_text(text: str) -> PredicateIndicator:
    """Parse "name/arity" as written in bundle manifests."""
    name, sep, arity = text.rpartition("/")
    if not sep or not name or not arity.isdigit():
        raise ValueError(f"bad predicate indicator {text!r}, expected name/arity")
    return PredicateIndicator(name, int(arity))


def _call_position_goals(goal: Term) -> Iterable[Term]:
    """Yield every subterm of a body goal that sits in call position.

    Control constructs are transparent: both arms of ,/2 ;/2 ->/2, the
    argument of \\+/1, a literal goal in call/N's first position (with the
    extra arguments folded in), and the goal argument of findall/3.
    Everything else is opaque: arguments are data, never flagged.
    """
    stack = [goal]
    while stack:
        g = stack.pop()
        if isinstance(g, Var) or isinstance(g, Int):
            continue  # dynamic or malformed; the runtime hook covers these
        if isinstance(g, Struct):
            key = (g.name, len(g.args))
            if key in ((",", 2), (";", 2), ("->", 2)):
                stack.append(g.args[0])
                stack.append(g.args[1])
                continue
            if key == ("\\+", 1):
                stack.append(g.args[0])
                continue
            if g.name == "call" and 1 <= len(g.args) <= 3:
                target = g.args[0]
                extra = len(g.args) - 1
                if isinstance(target, Atom) and extra:
                    yield Struct(target.name, tuple(g.args[1:]), target.span)
                elif isinstance(target, Struct) and extra:
                    yield Struct(target.name, target.args + tuple(g.args[1:]), target.span)
                elif isinstance(target, (Atom, Struct)):
                    stack.append(target)
                continue
            if key == ("findall", 3):
                stack.append(g.args[1])
                continue
        yield g


def scan_static(program: Program, policy: Policy) -> list[Violation]:
    """Flag every literal occurrence of a denied indicator in call position.

    Data occurrences (the atom halt inside a list, say) are not flagged,
    and goals hidden behind variables are left to the runtime hook.
    """
    violations: list[Violation] = []
    for clause in program.clauses:
        for body_goal in clause.body:
            for g in _call_position_goals(body_goal):
                ind = indicator_of(g)
                if policy.is_denied(ind):
                    span = getattr(g, "span", None)
                    violations.append(
                        Violation(
                            ind,
                            "Static",
                            span,
                            f"the command {ind} is blocked in this lab",
                        )
                    )
    return violations


def guard_call(
    goal: Term,
    policy: Policy,
    is_defined: Optional[Callable[[PredicateIndicator], bool]] = None,
    step: Optional[int] = None,
) -> Optional[Violation]:
    """Dynamic check for one dereferenced, callable goal.

    Returns None to allow, a Dynamic Violation to deny. `is_defined` answers
    whether an indicator is user-defined or a builtin in the running
    program; without it the unknown-predicate check is skipped.
    """
    ind = indicator_of(goal)
    if ind in policy.allowed:
        return None
    if ind in policy.denied:
        return Violation(ind, "Dynamic", step, f"the command {ind} is blocked in this lab")
    if policy.deny_unknown and is_defined is not None and not is_defined(ind):
        return Violation(
            ind,
            "Dynamic",
            step,
            f"unknown predicate {ind}: neither defined by the program nor an available builtin",
        )
    return None


def make_policy_hook(policy: Policy, known: frozenset = frozenset()):
    """Adapt a Policy to the engine's hook protocol.

    `known` lists indicators to treat as defined even when the program
    leaves them out (the problem's own target predicates), so their absence
    surfaces as a normal existence error instead of a policy denial.
    """

    def hook(goal: Term, is_defined) -> Optional[str]:
        v = guard_call(goal, policy, lambda i: i in known or is_defined(i))
        return v.reason if v is not None else None

    return hook
