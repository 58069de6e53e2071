"""Resolution engine: SLD resolution with tracing, budgets, and a policy hook.

Search strategy is standard Prolog: depth-first, leftmost goal first, clauses
in source order, unification with the occurs check switched on. The solver is
a hand-rolled iterative machine (an explicit resolvent plus a choicepoint
stack) rather than recursive generators: learner programs recurse arbitrarily
deep and backtrack pathologically, and none of that may touch the Python
stack.

Safety properties the rest of the system leans on:

  * every goal invocation is offered to the policy hook before it runs, and a
    denial halts the run immediately (halt reason PolicyViolation). This is
    the dynamic half of the sandbox: goals assembled at run time via call/1
    or =../2 pass through here no matter how they were constructed;
  * max-steps / max-depth / max-solutions make every run finite. Steps count
    goal dispatches and choicepoint resumes, so pure backtracking loops
    (between/3 plus fail) are budgeted too;
  * assertz/retract operate on a run-local view of the program. The caller's
    Program is never touched. retract/1 here is semidet: it removes the
    first matching clause and does not retry on backtracking;
  * runtime errors (unknown predicate, unbound arithmetic, type clashes,
    overflow, division by zero) halt the run with a category and detail
    instead of raising.

Arithmetic is signed 64-bit: overflow is an evaluation error, '//' truncates
toward zero, 'mod' is floor-style (result takes the divisor's sign).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .terms import (
    Atom,
    Clause,
    FreshCounter,
    Int,
    INT_MAX,
    INT_MIN,
    PredicateIndicator,
    Program,
    Struct,
    Substitution,
    Term,
    Var,
    compare,
    indicator_of,
    make_list,
    rename_term,
)

# halt reasons
COMPLETE = "Complete"
SOLUTION_CAP = "SolutionCap"
STEP_CAP = "StepCap"
DEPTH_CAP = "DepthCap"
POLICY_VIOLATION = "PolicyViolation"
RUNTIME_ERROR = "RuntimeError"

_CAPS = (SOLUTION_CAP, STEP_CAP, DEPTH_CAP)


@dataclass(frozen=True)
class Limits:
    max_steps: int = 200_000
    max_depth: int = 4_000
    max_solutions: int = 50


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # "Call" | "Exit" | "Fail"
    goal: Term  # dereferenced snapshot taken at event time
    depth: int
    step: int


@dataclass
class SolveOutcome:
    solutions: list  # list[dict[str, Term]], bindings of named query vars
    halt_reason: str
    steps_used: int
    error_kind: Optional[str] = None  # existence|instantiation|type|evaluation|timeout
    error_detail: Optional[str] = None
    denied_indicator: Optional[PredicateIndicator] = None
    denied_step: Optional[int] = None

    @property
    def truncated(self) -> bool:
        return self.halt_reason in _CAPS

    @property
    def exhausted(self) -> bool:
        return self.halt_reason == COMPLETE

    @property
    def succeeded(self) -> bool:
        return bool(self.solutions)


class _Err(Exception):
    def __init__(self, kind: str, detail: str):
        self.kind = kind
        self.detail = detail


# PolicyHook: called with the dereferenced goal and a predicate-definedness
# test; returns None to allow or a human-readable reason to deny.
PolicyHook = Callable[[Term, Callable[[PredicateIndicator], bool]], Optional[str]]
TraceSink = Callable[[TraceEvent], None]


def deref(t: Term) -> Term:
    while type(t) is Var:
        r = t.ref
        if r is None:
            return t
        t = r
    return t


def _occurs(v: Var, t: Term) -> bool:
    stack = [t]
    while stack:
        node = deref(stack.pop())
        if node is v:
            return True
        if type(node) is Struct:
            stack.extend(node.args)
    return False


def bind(v: Var, t: Term, trail: list) -> None:
    v.ref = t
    trail.append(v)


def undo_to(trail: list, mark: int) -> None:
    while len(trail) > mark:
        trail.pop().ref = None


def unify_inplace(a: Term, b: Term, trail: list) -> bool:
    """Destructive unification with occurs check; bindings go on the trail."""
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = deref(x)
        y = deref(y)
        if x is y:
            continue
        tx, ty = type(x), type(y)
        if tx is Var:
            if _occurs(x, y):
                return False
            bind(x, y, trail)
        elif ty is Var:
            if _occurs(y, x):
                return False
            bind(y, x, trail)
        elif tx is Atom:
            if ty is not Atom or x.name != y.name:
                return False
        elif tx is Int:
            if ty is not Int or x.value != y.value:
                return False
        else:  # Struct
            if ty is not Struct or x.name != y.name or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
    return True


def unify(t1: Term, t2: Term, s: Optional[Substitution] = None) -> Optional[Substitution]:
    """Pure most-general-unifier computation over an explicit substitution.

    Returns an extended copy of `s` on success, None on failure. Never
    mutates its arguments; the occurs check keeps the result acyclic. The
    engine's internal trail-based unification implements the same algorithm
    destructively; a property test holds the two to each other.
    """
    out: Substitution = dict(s) if s else {}

    def walk(t: Term) -> Term:
        while isinstance(t, Var):
            nxt = out.get(t.id)
            if nxt is None:
                return t
            t = nxt
        return t

    def occurs(vid: int, t: Term) -> bool:
        stack = [t]
        while stack:
            node = walk(stack.pop())
            if isinstance(node, Var):
                if node.id == vid:
                    return True
            elif isinstance(node, Struct):
                stack.extend(node.args)
        return False

    stack = [(t1, t2)]
    while stack:
        x, y = stack.pop()
        x = walk(x)
        y = walk(y)
        if isinstance(x, Var) and isinstance(y, Var) and x.id == y.id:
            continue
        if isinstance(x, Var):
            if occurs(x.id, y):
                return None
            out[x.id] = y
        elif isinstance(y, Var):
            if occurs(y.id, x):
                return None
            out[y.id] = x
        elif isinstance(x, Atom):
            if not (isinstance(y, Atom) and y.name == x.name):
                return None
        elif isinstance(x, Int):
            if not (isinstance(y, Int) and y.value == x.value):
                return None
        else:
            if not (isinstance(y, Struct) and y.name == x.name and len(y.args) == len(x.args)):
                return None
            stack.extend(zip(x.args, y.args))
    return out


def snapshot(t: Term, mapping: Optional[dict] = None) -> Term:
    """Dereferenced deep copy, detached from the trail. Unbound variables map
    to fresh never-bound variables (shared per source variable), so the copy
    stays valid after backtracking undoes current bindings."""
    if mapping is None:
        mapping = {}
    t = deref(t)
    if type(t) is Var:
        got = mapping.get(t.id)
        if got is None:
            got = Var(t.id, t.name)
            mapping[t.id] = got
        return got
    if type(t) is not Struct:
        return t
    frames: list[list] = [[t, [], 0]]
    result: Optional[Term] = None
    while frames:
        frame = frames[-1]
        node, built, i = frame
        if i == len(node.args):
            frames.pop()
            rebuilt = Struct(node.name, tuple(built), node.span)
            if frames:
                frames[-1][1].append(rebuilt)
            else:
                result = rebuilt
            continue
        frame[2] = i + 1
        arg = deref(node.args[i])
        ta = type(arg)
        if ta is Var:
            got = mapping.get(arg.id)
            if got is None:
                got = Var(arg.id, arg.name)
                mapping[arg.id] = got
            built.append(got)
        elif ta is Struct:
            frames.append([arg, [], 0])
        else:
            built.append(arg)
    assert result is not None
    return result


# --- arithmetic --------------------------------------------------------------


def eval_arith(t: Term) -> int:
    """Evaluate an arithmetic expression to a signed 64-bit integer.

    Supported: integers, + - * (binary), // (truncating toward zero), mod
    (floor style, sign follows the divisor), unary -, abs/1. Anything else
    is a type error; unbound variables are instantiation errors; overflow
    and division by zero are evaluation errors.
    """
    # iterative post-order: (term, arg-values, next-index)
    root = deref(t)
    frames: list[list] = [[root, [], 0]]
    result: Optional[int] = None
    while frames:
        frame = frames[-1]
        node, vals, i = frame
        node_t = type(node)
        if node_t is Var:
            raise _Err("instantiation", "instantiation error: arithmetic expression contains an unbound variable")
        if node_t is Int:
            frames.pop()
            if frames:
                frames[-1][1].append(node.value)
            else:
                result = node.value
            continue
        if node_t is Atom:
            raise _Err("type", f"type error: '{node.name}' is not an arithmetic expression")
        # Struct
        arity = len(node.args)
        key = (node.name, arity)
        if key not in _ARITH_OPS:
            raise _Err("type", f"type error: unknown arithmetic function {node.name}/{arity}")
        if i < arity:
            frame[2] = i + 1
            frames.append([deref(node.args[i]), [], 0])
            continue
        frames.pop()
        value = _ARITH_OPS[key](*vals)
        if value > INT_MAX or value < INT_MIN:
            raise _Err("evaluation", f"evaluation error: integer overflow in {node.name}/{arity}")
        if frames:
            frames[-1][1].append(value)
        else:
            result = value
    assert result is not None
    return result


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise _Err("evaluation", "evaluation error: division by zero")
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def _int_mod(a: int, b: int) -> int:
    if b == 0:
        raise _Err("evaluation", "evaluation error: division by zero")
    return a % b  # Python % is floor-style: sign follows the divisor


_ARITH_OPS: dict[tuple[str, int], Callable] = {
    ("+", 2): lambda a, b: a + b,
    ("-", 2): lambda a, b: a - b,
    ("*", 2): lambda a, b: a * b,
    ("//", 2): _int_div,
    ("mod", 2): _int_mod,
    ("-", 1): lambda a: -a,
    ("abs", 1): abs,
}


# --- choicepoints -------------------------------------------------------------


class _ClausesCP:
    __slots__ = ("mark", "goal", "clauses", "idx", "rest", "barrier", "depth")
    kind = 0

    def __init__(self, mark, goal, clauses, idx, rest, barrier, depth):
        self.mark = mark
        self.goal = goal
        self.clauses = clauses
        self.idx = idx
        self.rest = rest
        self.barrier = barrier
        self.depth = depth


class _ResumeCP:
    """Generic alternative: restore a saved resolvent (disjunction right arm,
    if-then-else else arm)."""

    __slots__ = ("mark", "resolvent")
    kind = 1

    def __init__(self, mark, resolvent):
        self.mark = mark
        self.resolvent = resolvent


class _BetweenCP:
    __slots__ = ("mark", "var", "next", "hi", "rest")
    kind = 2

    def __init__(self, mark, var, nxt, hi, rest):
        self.mark = mark
        self.var = var
        self.next = nxt
        self.hi = hi
        self.rest = rest


class _FindallCP:
    __slots__ = ("mark", "template", "result", "collected", "rest")
    kind = 3

    def __init__(self, mark, template, result, rest):
        self.mark = mark
        self.template = template
        self.result = result
        self.collected: list[Term] = []
        self.rest = rest


class _SentinelCP:
    """Tracing only: emits the Fail event for an invocation that never
    produced a solution. Survives the body's cut."""

    __slots__ = ("mark", "goal", "depth", "succeeded")
    kind = 4

    def __init__(self, mark, goal, depth):
        self.mark = mark
        self.goal = goal
        self.depth = depth
        self.succeeded = False


# resolvent item tags
_GOAL = 0
_CUT_TO = 1
_EXIT = 2
_COLLECT = 3
_FAIL_NOW = 4

_FAIL_ITEM = ((_FAIL_NOW, None, 0, 0), None)

_CONTROL = {
    ("true", 0),
    ("fail", 0),
    ("false", 0),
    ("!", 0),
    (",", 2),
    (";", 2),
    ("->", 2),
    ("\\+", 1),
}

# builtins that are dispatched as real goals (policy-checked, traced)
BUILTIN_INDICATORS: frozenset[PredicateIndicator] = frozenset(
    PredicateIndicator(n, a)
    for n, a in [
        ("true", 0),
        ("fail", 0),
        ("!", 0),
        (",", 2),
        (";", 2),
        ("->", 2),
        ("\\+", 1),
        ("=", 2),
        ("\\=", 2),
        ("==", 2),
        ("\\==", 2),
        ("var", 1),
        ("nonvar", 1),
        ("atom", 1),
        ("number", 1),
        ("is", 2),
        ("=:=", 2),
        ("=\\=", 2),
        ("<", 2),
        (">", 2),
        ("=<", 2),
        (">=", 2),
        ("call", 1),
        ("call", 2),
        ("call", 3),
        ("findall", 3),
        ("between", 3),
        ("functor", 3),
        ("arg", 3),
        ("=..", 2),
        ("assertz", 1),
        ("retract", 1),
    ]
)


class _Machine:
    def __init__(
        self,
        program: Program,
        goals: tuple,
        query_vars: list[Var],
        limits: Limits,
        policy_hook: Optional[PolicyHook],
        trace_sink: Optional[TraceSink],
        deadline: Optional[float],
    ):
        self.limits = limits
        self.policy_hook = policy_hook
        self.trace_sink = trace_sink
        self.deadline = deadline
        self.trail: list[Var] = []
        self.cps: list = []
        self.steps = 0
        self.solutions: list[dict[str, Term]] = []
        self.counter = FreshCounter(1_000_000)  # run-local var ids
        # run-local view of the program; lists are shared until assert/retract
        self.store: dict[PredicateIndicator, list[Clause]] = dict(program.index)

        mapping: dict[int, Var] = {}
        renamed = tuple(rename_term(g, mapping, self.counter) for g in goals)
        self.query_vars = [(v.name, mapping.get(v.id, v)) for v in query_vars]
        resolvent = None
        for g in reversed(renamed):
            resolvent = ((_GOAL, g, 0, 0), resolvent)
        self.resolvent = resolvent

    # -- helpers

    def is_defined(self, ind: PredicateIndicator) -> bool:
        return ind in self.store or ind in BUILTIN_INDICATORS

    def emit(self, kind: str, goal: Term, depth: int) -> None:
        if self.trace_sink is not None:
            self.trace_sink(TraceEvent(kind, snapshot(goal), depth, self.steps))

    def record_solution(self) -> None:
        mapping: dict = {}
        self.solutions.append({name: snapshot(v, mapping) for name, v in self.query_vars})

    def backtrack(self) -> bool:
        cps = self.cps
        trail = self.trail
        while cps:
            cp = cps[-1]
            undo_to(trail, cp.mark)
            k = cp.kind
            if k == 0:  # clauses
                clauses = cp.clauses
                idx = cp.idx
                goal = cp.goal
                n = len(clauses)
                while idx < n:
                    clause = clauses[idx]
                    idx += 1
                    renamed = self.rename_clause(clause)
                    if unify_inplace(renamed.head, goal, trail):
                        cp.idx = idx
                        if idx >= n:
                            cps.pop()
                        self.steps += 1
                        self.resolvent = self.expand_body(
                            renamed.body, cp.rest, cp.barrier, cp.depth
                        )
                        return True
                    undo_to(trail, cp.mark)
                cps.pop()
                continue
            if k == 1:  # resume
                cps.pop()
                self.steps += 1
                self.resolvent = cp.resolvent
                return True
            if k == 2:  # between
                value = cp.next
                if value > cp.hi:
                    cps.pop()
                    continue
                cp.next = value + 1
                if cp.next > cp.hi:
                    cps.pop()
                bind(cp.var, Int(value), trail)
                self.steps += 1
                self.resolvent = cp.rest
                return True
            if k == 3:  # findall completed
                cps.pop()
                result_list = make_list(cp.collected)
                if unify_inplace(cp.result, result_list, trail):
                    self.resolvent = cp.rest
                    return True
                continue
            # sentinel
            cps.pop()
            if not cp.succeeded:
                self.emit("Fail", cp.goal, cp.depth)
        return False

    def rename_clause(self, clause: Clause) -> Clause:
        # ground facts need no copy; everything else is renamed apart
        if not clause.body and not _has_vars(clause.head):
            return clause
        mapping: dict[int, Var] = {}
        head = rename_term(clause.head, mapping, self.counter)
        body = tuple(rename_term(g, mapping, self.counter) for g in clause.body)
        return Clause(head, body)

    def expand_body(self, body: tuple, rest, barrier: int, depth: int):
        resolvent = rest
        for g in reversed(body):
            resolvent = ((_GOAL, g, barrier, depth), resolvent)
        return resolvent

    # -- main loop

    def run(self) -> SolveOutcome:
        limits = self.limits
        cps = self.cps
        hook = self.policy_hook
        tracing = self.trace_sink is not None

        try:
            while True:
                if self.steps >= limits.max_steps:
                    return self.finish(STEP_CAP)
                if self.deadline is not None and (self.steps & 0x3F) == 0:
                    if time.monotonic() > self.deadline:
                        raise _Err("timeout", "wall-clock budget exceeded")
                item = self.resolvent
                if item is None:
                    self.record_solution()
                    if len(self.solutions) >= limits.max_solutions:
                        return self.finish(SOLUTION_CAP)
                    if not self.backtrack():
                        return self.finish(COMPLETE)
                    continue
                entry, rest = item
                tag = entry[0]
                if tag == _GOAL:
                    _, goal, cut_h, depth = entry
                    goal = deref(goal)
                    tg = type(goal)
                    if tg is Var:
                        raise _Err("instantiation", "instantiation error: unbound variable called as a goal")
                    if tg is Int:
                        raise _Err("type", f"type error: the number {goal.value} cannot be called as a goal")
                    name = goal.name
                    args = goal.args if tg is Struct else ()
                    arity = len(args)
                    ctrl = (name, arity)
                    if ctrl in _CONTROL:
                        if name == ",":
                            self.resolvent = (
                                (_GOAL, args[0], cut_h, depth),
                                ((_GOAL, args[1], cut_h, depth), rest),
                            )
                            continue
                        if name == "true":
                            self.resolvent = rest
                            continue
                        if name == "fail" or name == "false":
                            if not self.backtrack():
                                return self.finish(COMPLETE)
                            continue
                        if name == "!":
                            del cps[cut_h:]
                            self.resolvent = rest
                            continue
                        if name == ";":
                            left = deref(args[0])
                            if type(left) is Struct and left.name == "->" and len(left.args) == 2:
                                self.push_ite(left.args[0], left.args[1], args[1], rest, cut_h, depth)
                            else:
                                cps.append(
                                    _ResumeCP(len(trail), ((_GOAL, args[1], cut_h, depth), rest))
                                )
                                self.resolvent = ((_GOAL, left, cut_h, depth), rest)
                            continue
                        if name == "->":
                            self.push_ite(args[0], args[1], None, rest, cut_h, depth)
                            continue
                        # \+
                        self.push_ite(args[0], None, Atom("true"), rest, cut_h, depth)
                        continue

                    # a real goal: budget, policy, trace, dispatch
                    self.steps += 1
                    if depth >= limits.max_depth:
                        return self.finish(DEPTH_CAP)
                    if hook is not None:
                        reason = hook(goal, self.is_defined)
                        if reason is not None:
                            out = self.finish(POLICY_VIOLATION)
                            out.error_detail = reason
                            out.denied_indicator = PredicateIndicator(name, arity)
                            out.denied_step = self.steps
                            return out
                    if tracing:
                        # sentinel emits Fail if this invocation never
                        # succeeds; the exit item emits Exit per solution
                        sentinel = _SentinelCP(len(self.trail), goal, depth)
                        cps.append(sentinel)
                        rest = ((_EXIT, sentinel, 0, 0), rest)
                        self.emit("Call", goal, depth)
                    handler = _BUILTINS.get(ctrl)
                    if handler is not None:
                        res = handler(self, goal, args, rest, cut_h, depth)
                        if res is _BACK:
                            if not self.backtrack():
                                return self.finish(COMPLETE)
                        else:
                            self.resolvent = res
                        continue
                    if not self.call_user(goal, PredicateIndicator(name, arity), rest, depth):
                        if not self.backtrack():
                            return self.finish(COMPLETE)
                    continue

                if tag == _CUT_TO:
                    del cps[entry[1] :]
                    self.resolvent = rest
                    continue
                if tag == _EXIT:
                    record = entry[1]
                    record.succeeded = True
                    self.emit("Exit", record.goal, record.depth)
                    self.resolvent = rest
                    continue
                if tag == _COLLECT:
                    cp = entry[1]
                    cp.collected.append(snapshot(cp.template))
                    if not self.backtrack():
                        return self.finish(COMPLETE)
                    continue
                # _FAIL_NOW
                if not self.backtrack():
                    return self.finish(COMPLETE)
        except _Err as e:
            if e.kind == "timeout":
                out = self.finish(RUNTIME_ERROR)
                out.error_kind = "timeout"
                out.error_detail = e.detail
                return out
            out = self.finish(RUNTIME_ERROR)
            out.error_kind = e.kind
            out.error_detail = e.detail
            return out

    def push_ite(self, cond, then, els, rest, cut_h: int, depth: int) -> None:
        """(cond -> then ; els). Cut inside cond is local; then/els inherit
        the clause's barrier. `then=None` means fail, `els=None` means fail."""
        cps = self.cps
        h = len(cps)
        if els is None:
            else_resolvent = _FAIL_ITEM
        elif isinstance(els, Atom) and els.name == "true":
            else_resolvent = rest
        else:
            else_resolvent = ((_GOAL, els, cut_h, depth), rest)
        cps.append(_ResumeCP(len(self.trail), else_resolvent))
        if then is None:
            after = (( _CUT_TO, h, 0, 0), _FAIL_ITEM)
        else:
            after = ((_CUT_TO, h, 0, 0), ((_GOAL, then, cut_h, depth), rest))
        self.resolvent = ((_GOAL, cond, h + 1, depth), after)

    def call_user(self, goal: Term, ind: PredicateIndicator, rest, depth: int) -> bool:
        """Dispatch to user clauses. Returns False when no clause head
        matches (the caller backtracks)."""
        clauses = self.store.get(ind)
        if clauses is None:
            raise _Err("existence", f"existence error: procedure {ind} is not defined")
        trail = self.trail
        cps = self.cps
        barrier = len(cps)
        mark = len(trail)
        n = len(clauses)
        idx = 0
        while idx < n:
            clause = clauses[idx]
            idx += 1
            renamed = self.rename_clause(clause)
            if unify_inplace(renamed.head, goal, trail):
                if idx < n:
                    cps.append(_ClausesCP(mark, goal, clauses, idx, rest, barrier, depth + 1))
                self.resolvent = self.expand_body(renamed.body, rest, barrier, depth + 1)
                return True
            undo_to(trail, mark)
        return False

    def finish(self, reason: str) -> SolveOutcome:
        return SolveOutcome(
            solutions=self.solutions,
            halt_reason=reason,
            steps_used=self.steps,
        )


def _has_vars(t: Term) -> bool:
    stack = [t]
    while stack:
        node = stack.pop()
        tn = type(node)
        if tn is Var:
            return True
        if tn is Struct:
            stack.extend(node.args)
    return False


_BACK = object()


# --- builtin handlers ---------------------------------------------------------
# Each returns the new resolvent, or _BACK to trigger backtracking. Errors
# raise _Err and halt the run.


def _bi_unify(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if unify_inplace(args[0], args[1], m.trail) else _BACK


def _bi_not_unify(m: _Machine, goal, args, rest, cut_h, depth):
    mark = len(m.trail)
    ok = unify_inplace(args[0], args[1], m.trail)
    undo_to(m.trail, mark)
    return _BACK if ok else rest


def _bi_struct_eq(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if compare(snapshot(args[0]), snapshot(args[1])) == 0 else _BACK


def _bi_struct_neq(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if compare(snapshot(args[0]), snapshot(args[1])) != 0 else _BACK


def _bi_var(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if type(deref(args[0])) is Var else _BACK


def _bi_nonvar(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if type(deref(args[0])) is not Var else _BACK


def _bi_atom(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if type(deref(args[0])) is Atom else _BACK


def _bi_number(m: _Machine, goal, args, rest, cut_h, depth):
    return rest if type(deref(args[0])) is Int else _BACK


def _bi_is(m: _Machine, goal, args, rest, cut_h, depth):
    value = eval_arith(args[1])
    return rest if unify_inplace(args[0], Int(value), m.trail) else _BACK


def _arith_cmp(op: Callable[[int, int], bool]):
    def handler(m: _Machine, goal, args, rest, cut_h, depth):
        a = eval_arith(args[0])
        b = eval_arith(args[1])
        return rest if op(a, b) else _BACK

    return handler


def _bi_call(m: _Machine, goal, args, rest, cut_h, depth):
    target = deref(args[0])
    extra = args[1:]
    tt = type(target)
    if tt is Var:
        raise _Err("instantiation", "instantiation error: call/N on an unbound variable")
    if tt is Int:
        raise _Err("type", f"type error: the number {target.value} cannot be called as a goal")
    if extra:
        if tt is Atom:
            target = Struct(target.name, tuple(extra))
        else:
            target = Struct(target.name, target.args + tuple(extra))
    # cut inside a call/N argument is local to it
    return ((_GOAL, target, len(m.cps), depth), rest)


def _bi_findall(m: _Machine, goal, args, rest, cut_h, depth):
    template, subgoal, result = args
    cp = _FindallCP(len(m.trail), template, result, rest)
    m.cps.append(cp)
    barrier = len(m.cps)
    return (
        (_GOAL, subgoal, barrier, depth + 1),
        ((_COLLECT, cp, 0, 0), None),
    )


def _bi_between(m: _Machine, goal, args, rest, cut_h, depth):
    lo = deref(args[0])
    hi = deref(args[1])
    x = deref(args[2])
    if type(lo) is Var or type(hi) is Var:
        raise _Err("instantiation", "instantiation error: between/3 needs integer bounds")
    if type(lo) is not Int or type(hi) is not Int:
        raise _Err("type", "type error: between/3 bounds must be integers")
    if type(x) is Int:
        return rest if lo.value <= x.value <= hi.value else _BACK
    if type(x) is not Var:
        raise _Err("type", "type error: between/3 expects an integer or a variable")
    if lo.value > hi.value:
        return _BACK
    mark = len(m.trail)
    bind(x, Int(lo.value), m.trail)
    if lo.value < hi.value:
        m.cps.append(_BetweenCP(mark, x, lo.value + 1, hi.value, rest))
    return rest


def _bi_functor(m: _Machine, goal, args, rest, cut_h, depth):
    t = deref(args[0])
    tt = type(t)
    trail = m.trail
    if tt is not Var:
        if tt is Struct:
            name: Term = Atom(t.name)
            arity = len(t.args)
        elif tt is Atom:
            name = t
            arity = 0
        else:
            name = t
            arity = 0
        ok = unify_inplace(args[1], name, trail) and unify_inplace(args[2], Int(arity), trail)
        return rest if ok else _BACK
    f = deref(args[1])
    a = deref(args[2])
    if type(f) is Var or type(a) is Var:
        raise _Err("instantiation", "instantiation error: functor/3 needs the term or the name and arity")
    if type(a) is not Int or a.value < 0:
        raise _Err("type", "type error: functor/3 arity must be a non-negative integer")
    if a.value == 0:
        return rest if unify_inplace(t, f, trail) else _BACK
    if type(f) is not Atom:
        raise _Err("type", "type error: functor/3 name must be an atom for compound terms")
    built = Struct(f.name, tuple(Var(m.counter.next()) for _ in range(a.value)))
    return rest if unify_inplace(t, built, trail) else _BACK


def _bi_arg(m: _Machine, goal, args, rest, cut_h, depth):
    n = deref(args[0])
    t = deref(args[1])
    if type(n) is Var:
        raise _Err("instantiation", "instantiation error: arg/3 needs an integer position")
    if type(n) is not Int:
        raise _Err("type", "type error: arg/3 position must be an integer")
    if type(t) is Var:
        raise _Err("instantiation", "instantiation error: arg/3 needs a compound term")
    if type(t) is not Struct:
        raise _Err("type", "type error: arg/3 second argument must be compound")
    if n.value < 1 or n.value > len(t.args):
        return _BACK
    return rest if unify_inplace(args[2], t.args[n.value - 1], m.trail) else _BACK


def _bi_univ(m: _Machine, goal, args, rest, cut_h, depth):
    t = deref(args[0])
    tt = type(t)
    trail = m.trail
    if tt is not Var:
        if tt is Struct:
            items: list[Term] = [Atom(t.name), *t.args]
        else:
            items = [t]
        return rest if unify_inplace(args[1], make_list(items), trail) else _BACK
    # build from list
    lst = deref(args[1])
    parts: list[Term] = []
    while type(lst) is Struct and lst.name == "." and len(lst.args) == 2:
        parts.append(deref(lst.args[0]))
        lst = deref(lst.args[1])
    if type(lst) is Var:
        raise _Err("instantiation", "instantiation error: =../2 needs a complete list")
    if not (type(lst) is Atom and lst.name == "[]"):
        raise _Err("type", "type error: =../2 second argument must be a proper list")
    if not parts:
        raise _Err("type", "type error: =../2 list must not be empty")
    head = parts[0]
    if len(parts) == 1:
        if type(head) is Struct:
            raise _Err("type", "type error: =../2 singleton list must hold an atom or number")
        return rest if unify_inplace(t, head, trail) else _BACK
    if type(head) is not Atom:
        raise _Err("type", "type error: =../2 functor must be an atom")
    return rest if unify_inplace(t, Struct(head.name, tuple(parts[1:])), trail) else _BACK


def _clause_parts(t: Term) -> tuple[Term, tuple]:
    t = deref(t)
    if type(t) is Struct and t.name == ":-" and len(t.args) == 2:
        head = deref(t.args[0])
        body_term = t.args[1]
        goals: list[Term] = []
        stack = [body_term]
        while stack:
            g = deref(stack.pop())
            if type(g) is Struct and g.name == "," and len(g.args) == 2:
                stack.append(g.args[1])
                stack.append(g.args[0])
                continue
            goals.append(g)
        # stack pops left-first, so goals are already in textual order
        body = tuple(goals)
    else:
        head, body = t, ()
    if type(head) is Var:
        raise _Err("instantiation", "instantiation error: clause head is unbound")
    if type(head) is Int:
        raise _Err("type", "type error: clause head cannot be a number")
    return head, body


def _conj(goals: tuple) -> Term:
    if not goals:
        return Atom("true")
    t: Term = goals[-1]
    for g in reversed(goals[:-1]):
        t = Struct(",", (g, t))
    return t


def _bi_assertz(m: _Machine, goal, args, rest, cut_h, depth):
    head, body = _clause_parts(args[0])
    for g in body:
        if type(g) is Int:
            raise _Err("type", "type error: a number cannot appear as a body goal")
    # the snapshot detaches the clause from current bindings; a shared
    # mapping keeps variable identity across head and body
    mapping: dict = {}
    clause = Clause(snapshot(head, mapping), tuple(snapshot(g, mapping) for g in body))
    ind = clause.indicator
    m.store[ind] = [*m.store.get(ind, []), clause]
    return rest


def _bi_retract(m: _Machine, goal, args, rest, cut_h, depth):
    # semidet: removes the first clause whose head and body both unify with
    # the pattern, and does not offer further clauses on backtracking
    head, body = _clause_parts(args[0])
    pattern_body = _conj(body)
    ind = indicator_of(head)
    clauses = m.store.get(ind, [])
    trail = m.trail
    for i, clause in enumerate(clauses):
        renamed = m.rename_clause(clause)
        mark = len(trail)
        if unify_inplace(head, renamed.head, trail) and unify_inplace(
            pattern_body, _conj(renamed.body), trail
        ):
            m.store[ind] = clauses[:i] + clauses[i + 1 :]
            return rest
        undo_to(trail, mark)
    return _BACK


_BUILTINS: dict[tuple[str, int], Callable] = {
    ("=", 2): _bi_unify,
    ("\\=", 2): _bi_not_unify,
    ("==", 2): _bi_struct_eq,
    ("\\==", 2): _bi_struct_neq,
    ("var", 1): _bi_var,
    ("nonvar", 1): _bi_nonvar,
    ("atom", 1): _bi_atom,
    ("number", 1): _bi_number,
    ("is", 2): _bi_is,
    ("=:=", 2): _arith_cmp(lambda a, b: a == b),
    ("=\\=", 2): _arith_cmp(lambda a, b: a != b),
    ("<", 2): _arith_cmp(lambda a, b: a < b),
    (">", 2): _arith_cmp(lambda a, b: a > b),
    ("=<", 2): _arith_cmp(lambda a, b: a <= b),
    (">=", 2): _arith_cmp(lambda a, b: a >= b),
    ("call", 1): _bi_call,
    ("call", 2): _bi_call,
    ("call", 3): _bi_call,
    ("findall", 3): _bi_findall,
    ("between", 3): _bi_between,
    ("functor", 3): _bi_functor,
    ("arg", 3): _bi_arg,
    ("=..", 2): _bi_univ,
    ("assertz", 1): _bi_assertz,
    ("retract", 1): _bi_retract,
}


def solve(
    program: Program,
    goals: tuple,
    query_vars: Optional[list[Var]] = None,
    limits: Limits = Limits(),
    policy_hook: Optional[PolicyHook] = None,
    trace_sink: Optional[TraceSink] = None,
    deadline: Optional[float] = None,
) -> SolveOutcome:
    """Enumerate solutions of `goals` against `program`.

    Solutions are substitutions restricted to the named query variables,
    reported as {name: term snapshot}. The run always terminates: it halts
    with Complete when the search space is exhausted, with a cap reason when
    a budget trips (truncated=True), with PolicyViolation the moment the
    hook denies a goal, or with RuntimeError carrying a category and detail.
    """
    machine = _Machine(
        program, goals, query_vars or [], limits, policy_hook, trace_sink, deadline
    )
    return machine.run()


def run_query(
    program: Program,
    query_text: str,
    limits: Limits = Limits(),
    policy_hook: Optional[PolicyHook] = None,
    trace_sink: Optional[TraceSink] = None,
    deadline: Optional[float] = None,
) -> SolveOutcome:
    """Convenience wrapper: parse a query and solve it. Raises ValueError on
    unparsable query text; queries here come from trusted callers, learner
    text goes through the grader, which reports diagnostics instead."""
    from .reader import parse_query

    q = parse_query(query_text)
    if not q.ok:
        raise ValueError(f"query does not parse: {query_text!r}: {[str(d) for d in q.diagnostics]}")
    return solve(program, q.goals, q.variables, limits, policy_hook, trace_sink, deadline)
