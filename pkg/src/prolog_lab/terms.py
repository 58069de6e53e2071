"""First-order term algebra for the lab's Prolog dialect.

Terms are atoms, 64-bit signed integers, variables, and compounds. Lists are
ordinary compounds built from the atom '[]' and the functor '.'/2. Terms other
than variables are immutable once built; variables carry a mutable `ref` cell
that only the resolution engine touches (program terms are renamed apart
before execution, so parsed clauses are never mutated).

All structural walkers in this module are iterative. Runtime terms can be
arbitrarily deep (a 10k element list is a 10k deep cons spine) and must not
blow the Python stack.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Union

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class Var:
    """A logic variable. `id` is unique within one construction context
    (a parsed clause, a resolution run); `name` is for display only."""

    __slots__ = ("id", "name", "ref")

    def __init__(self, id: int, name: str = "_"):
        self.id = id
        self.name = name
        self.ref: Optional[Term] = None

    def __repr__(self) -> str:
        return f"Var({self.id}, {self.name!r})"


class Atom:
    __slots__ = ("name", "span")

    def __init__(self, name: str, span=None):
        self.name = name
        self.span = span

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and other.name == self.name

    def __hash__(self) -> int:
        return hash(("atom", self.name))

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"


class Int:
    __slots__ = ("value", "span")

    def __init__(self, value: int, span=None):
        self.value = value
        self.span = span

    def __eq__(self, other) -> bool:
        return isinstance(other, Int) and other.value == self.value

    def __hash__(self) -> int:
        return hash(("int", self.value))

    def __repr__(self) -> str:
        return f"Int({self.value})"


class Struct:
    """Compound term. `args` is a non-empty tuple."""

    __slots__ = ("name", "args", "span")

    def __init__(self, name: str, args: tuple, span=None):
        self.name = name
        self.args = args
        self.span = span

    def __eq__(self, other) -> bool:
        if not isinstance(other, Struct) or other.name != self.name:
            return False
        return other.args == self.args

    def __hash__(self) -> int:
        return hash(("struct", self.name, self.args))

    def __repr__(self) -> str:
        return f"Struct({self.name!r}, {self.args!r})"


Term = Union[Var, Atom, Int, Struct]

NIL = Atom("[]")
TRUE = Atom("true")


class PredicateIndicator(NamedTuple):
    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


class Clause:
    """head :- body. Facts have an empty body tuple; conjunctions are
    flattened by the reader, so body goals are in textual order."""

    __slots__ = ("head", "body")

    def __init__(self, head: Term, body: tuple = ()):
        self.head = head
        self.body = body

    @property
    def indicator(self) -> PredicateIndicator:
        return indicator_of(self.head)

    def __repr__(self) -> str:
        return f"Clause({self.head!r}, {self.body!r})"


class Program:
    """An ordered sequence of clauses plus an indicator index. Treated as
    immutable after construction; the engine copies before assert/retract."""

    __slots__ = ("clauses", "index")

    def __init__(self, clauses: Iterable[Clause]):
        self.clauses = tuple(clauses)
        index: dict[PredicateIndicator, list[Clause]] = {}
        for clause in self.clauses:
            index.setdefault(clause.indicator, []).append(clause)
        self.index = index

    def clauses_for(self, ind: PredicateIndicator) -> list[Clause]:
        return self.index.get(ind, [])

    def indicators(self) -> set[PredicateIndicator]:
        return set(self.index.keys())


# A substitution maps variable ids to terms. Kept acyclic by the occurs
# check in unify(); apply_substitution dereferences chains all the way down.
Substitution = dict[int, Term]


def indicator_of(t: Term) -> PredicateIndicator:
    if isinstance(t, Atom):
        return PredicateIndicator(t.name, 0)
    if isinstance(t, Struct):
        return PredicateIndicator(t.name, len(t.args))
    raise TypeError(f"not a callable term: {t!r}")


def make_list(items: Iterable[Term], tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = Struct(".", (item, out))
    return out


def list_parts(t: Term) -> tuple[list[Term], Term]:
    """Split a cons spine into (elements, tail). Proper lists end at '[]'."""
    items: list[Term] = []
    while isinstance(t, Struct) and t.name == "." and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def variables_of(t: Term) -> list[Var]:
    """All distinct variables in first-occurrence (leftmost, depth-first)
    order. Ignores engine bindings: walks the raw structure."""
    seen: set[int] = set()
    out: list[Var] = []
    stack = [t]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            if node.id not in seen:
                seen.add(node.id)
                out.append(node)
        elif isinstance(node, Struct):
            stack.extend(reversed(node.args))
    return out


def is_ground(t: Term) -> bool:
    stack = [t]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            return False
        if isinstance(node, Struct):
            stack.extend(node.args)
    return True


class FreshCounter:
    """Monotone source of variable ids, shared by rename_apart calls that
    must not collide within one run."""

    __slots__ = ("value",)

    def __init__(self, start: int = 0):
        self.value = start

    def next(self) -> int:
        v = self.value
        self.value = v + 1
        return v


def rename_term(t: Term, mapping: dict[int, Var], counter: FreshCounter) -> Term:
    """Copy `t` replacing every variable via `mapping`, minting fresh ones on
    first sight. Ground subterms are shared, not copied."""
    if isinstance(t, Var):
        got = mapping.get(t.id)
        if got is None:
            got = Var(counter.next(), t.name)
            mapping[t.id] = got
        return got
    if not isinstance(t, Struct):
        return t
    # Iterative post-order rebuild. frames: (struct, rebuilt-args, next-index)
    frames: list[list] = [[t, [], 0]]
    result: Optional[Term] = None
    while frames:
        frame = frames[-1]
        node, built, i = frame
        if i == len(node.args):
            frames.pop()
            rebuilt = node if all(b is a for b, a in zip(built, node.args)) else Struct(node.name, tuple(built), node.span)
            if frames:
                frames[-1][1].append(rebuilt)
            else:
                result = rebuilt
            continue
        frame[2] = i + 1
        arg = node.args[i]
        if isinstance(arg, Var):
            got = mapping.get(arg.id)
            if got is None:
                got = Var(counter.next(), arg.name)
                mapping[arg.id] = got
            built.append(got)
        elif isinstance(arg, Struct):
            frames.append([arg, [], 0])
        else:
            built.append(arg)
    assert result is not None
    return result


def rename_apart(clause: Clause, counter: FreshCounter) -> Clause:
    """Alpha-equivalent copy of `clause` with all-fresh variable ids."""
    mapping: dict[int, Var] = {}
    head = rename_term(clause.head, mapping, counter)
    body = tuple(rename_term(g, mapping, counter) for g in clause.body)
    return Clause(head, body)


def alpha_equal(t1: Term, t2: Term) -> bool:
    """Structural equality up to a bijective renaming of variables."""
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        if isinstance(a, Var):
            if not isinstance(b, Var):
                return False
            if fwd.setdefault(a.id, b.id) != b.id:
                return False
            if bwd.setdefault(b.id, a.id) != a.id:
                return False
        elif isinstance(a, Atom):
            if not (isinstance(b, Atom) and b.name == a.name):
                return False
        elif isinstance(a, Int):
            if not (isinstance(b, Int) and b.value == a.value):
                return False
        else:
            if not (isinstance(b, Struct) and b.name == a.name and len(b.args) == len(a.args)):
                return False
            stack.extend(zip(a.args, b.args))
    return True


def apply_substitution(t: Term, s: Substitution) -> Term:
    """Replace every variable bound in `s`, chasing chains, leaving unbound
    variables in place. Idempotent: a second application changes nothing."""

    def walk(v: Term) -> Term:
        while isinstance(v, Var):
            nxt = s.get(v.id)
            if nxt is None:
                return v
            v = nxt
        return v

    t = walk(t)
    if not isinstance(t, Struct):
        return t
    frames: list[list] = [[t, [], 0]]
    result: Optional[Term] = None
    while frames:
        frame = frames[-1]
        node, built, i = frame
        if i == len(node.args):
            frames.pop()
            rebuilt = node if all(b is a for b, a in zip(built, node.args)) else Struct(node.name, tuple(built), node.span)
            if frames:
                frames[-1][1].append(rebuilt)
            else:
                result = rebuilt
            continue
        frame[2] = i + 1
        arg = walk(node.args[i])
        if isinstance(arg, Struct):
            frames.append([arg, [], 0])
        else:
            built.append(arg)
    assert result is not None
    return result


_ORDER_RANK = {Var: 0, Int: 1, Atom: 2, Struct: 3}


def compare(t1: Term, t2: Term) -> int:
    """Standard order of terms: Var < Int < Atom < Compound; variables by id,
    integers by value, atoms by name, compounds by arity, then name, then
    arguments left to right. Returns -1, 0, or 1."""
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        ra, rb = _ORDER_RANK[type(a)], _ORDER_RANK[type(b)]
        if ra != rb:
            return -1 if ra < rb else 1
        if isinstance(a, Var):
            if a.id != b.id:
                return -1 if a.id < b.id else 1
        elif isinstance(a, Int):
            if a.value != b.value:
                return -1 if a.value < b.value else 1
        elif isinstance(a, Atom):
            if a.name != b.name:
                return -1 if a.name < b.name else 1
        else:
            if len(a.args) != len(b.args):
                return -1 if len(a.args) < len(b.args) else 1
            if a.name != b.name:
                return -1 if a.name < b.name else 1
            stack.extend(reversed(list(zip(a.args, b.args))))
    return 0


# ---------------------------------------------------------------------------
# Canonical rendering.
#
# Operator-free functional notation, except lists which render in bracket
# form. Atoms are quoted when they would not re-read as a single atom token.
# The output round-trips through the reader (a property test holds the two
# modules to that).

_UNQUOTED_NAME = None  # compiled lazily to avoid importing re at startup cost
_GRAPHIC_CHARS = set("#$&*+-./:<=>?@^~\\")
_SOLO_ATOMS = {"!", ";", "[]"}

_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def atom_needs_quotes(name: str) -> bool:
    if name in _SOLO_ATOMS:
        return False
    if not name:
        return True
    c = name[0]
    if c.isascii() and c.islower():
        return not all(ch.isascii() and (ch.isalnum() or ch == "_") for ch in name)
    if all(ch in _GRAPHIC_CHARS for ch in name):
        return False
    return True


def _render_atom(name: str) -> str:
    if not atom_needs_quotes(name):
        return name
    return "'" + "".join(_ESCAPES.get(ch, ch) for ch in name) + "'"


def render_term(t: Term) -> str:
    """Canonical text for `t`. Unbound variables render as `_G<id>` unless
    they carry a user-facing name. Engine bindings are NOT followed; resolve
    first if needed."""
    out: list[str] = []
    # Work stack holds terms and literal glue strings.
    stack: list[object] = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        if isinstance(item, Var):
            out.append(item.name if item.name != "_" else f"_G{item.id}")
        elif isinstance(item, Int):
            out.append(str(item.value))
        elif isinstance(item, Atom):
            out.append(_render_atom(item.name))
        elif isinstance(item, Struct):
            if item.name == "." and len(item.args) == 2:
                items, tail = list_parts(item)
                out.append("[")
                parts: list[object] = []
                for i, el in enumerate(items):
                    if i:
                        parts.append(", ")
                    parts.append(el)
                if not (isinstance(tail, Atom) and tail.name == "[]"):
                    parts.append("|")
                    parts.append(tail)
                parts.append("]")
                # push in reverse so they pop in order; strings pass through
                for p in reversed(parts):
                    stack.append(p if isinstance(p, str) else p)
            else:
                out.append(_render_atom(item.name))
                out.append("(")
                parts = []
                for i, a in enumerate(item.args):
                    if i:
                        parts.append(", ")
                    parts.append(a)
                parts.append(")")
                for p in reversed(parts):
                    stack.append(p)
        else:
            raise TypeError(f"not a term: {item!r}")
    return "".join(out)


def normalize_variables(t: Term) -> Term:
    """Copy with variables renamed to _1, _2, ... in first-occurrence order.
    Two alpha-equivalent terms normalize to structurally equal terms, which
    gives canonical keys for solution sets."""
    counter = FreshCounter(1)
    mapping: dict[int, Var] = {}
    for v in variables_of(t):
        fresh_id = counter.next()
        mapping[v.id] = Var(fresh_id, f"_{fresh_id}")
    return rename_term(t, mapping, counter) if mapping else t
