"""Hand-verified program/query pairs with their exact solution sequences.

Every expected value below was worked out by hand (trial division for the
prime cases, tracing clause order for enumeration order) and doubles as
the engine conformance corpus: lists, arithmetic, gcd, naive sort, and
symbolic terms. Solutions are rendered terms in the exact order the
engine must produce them; `halt` is the expected halt reason.
"""

from dataclasses import dataclass, field

from prolog_lab.engine import Limits


@dataclass(frozen=True)
class Case:
    name: str
    program: str
    query: str
    expected: tuple  # per-solution dicts of variable name -> rendered term
    halt: str = "Complete"
    limits: Limits = field(default_factory=Limits)


MEMBER = "member(X, [X | _]).\nmember(X, [_ | T]) :- member(X, T).\n"
APPEND = "append([], L, L).\nappend([H | T], L, [H | R]) :- append(T, L, R).\n"

CASES = (
    Case(
        "member_enumerate",
        MEMBER,
        "member(X, [a, b, c])",
        ({"X": "a"}, {"X": "b"}, {"X": "c"}),
    ),
    Case(
        "member_ground_once",
        MEMBER,
        "member(b, [a, b, c])",
        ({},),
    ),
    Case(
        "append_build",
        APPEND,
        "append([1, 2], [3], X)",
        ({"X": "[1, 2, 3]"},),
    ),
    Case(
        "append_split",
        APPEND,
        "append(X, Y, [1, 2])",
        (
            {"X": "[]", "Y": "[1, 2]"},
            {"X": "[1]", "Y": "[2]"},
            {"X": "[1, 2]", "Y": "[]"},
        ),
    ),
    Case(
        "reverse_accumulator",
        "rev(L, R) :- rev_(L, [], R).\n"
        "rev_([], A, A).\n"
        "rev_([H | T], A, R) :- rev_(T, [H | A], R).\n",
        "rev([1, 2, 3], R)",
        ({"R": "[3, 2, 1]"},),
    ),
    Case(
        "naive_sort",
        "nsort(L, S) :- perm(L, S), sorted(S).\n"
        "perm([], []).\n"
        "perm(L, [X | P]) :- select(X, L, R), perm(R, P).\n"
        "select(X, [X | T], T).\n"
        "select(X, [H | T], [H | R]) :- select(X, T, R).\n"
        "sorted([]).\n"
        "sorted([_]).\n"
        "sorted([A, B | T]) :- A =< B, sorted([B | T]).\n",
        "nsort([2, 1, 3], S)",
        ({"S": "[1, 2, 3]"},),
    ),
    Case(
        "gcd_basic",
        "gcd(X, 0, X) :- X > 0.\ngcd(X, Y, G) :- Y > 0, R is X mod Y, gcd(Y, R, G).\n",
        "gcd(12, 18, G)",
        ({"G": "6"},),
    ),
    Case(
        "gcd_coprime",
        "gcd(X, 0, X) :- X > 0.\ngcd(X, Y, G) :- Y > 0, R is X mod Y, gcd(Y, R, G).\n",
        "gcd(17, 5, G)",
        ({"G": "1"},),
    ),
    Case(
        "factorial",
        "fact(0, 1).\nfact(N, F) :- N > 0, M is N - 1, fact(M, G), F is N * G.\n",
        "fact(5, F)",
        ({"F": "120"},),
    ),
    Case(
        "fibonacci_naive",
        "fib(0, 0).\nfib(1, 1).\n"
        "fib(N, F) :- N > 1, A is N - 1, B is N - 2, fib(A, X), fib(B, Y), F is X + Y.\n",
        "fib(10, F)",
        ({"F": "55"},),
    ),
    Case(
        "between_enumerates",
        "",
        "between(1, 4, X)",
        ({"X": "1"}, {"X": "2"}, {"X": "3"}, {"X": "4"}),
    ),
    Case(
        "findall_squares",
        MEMBER,
        "findall(Y, (member(X, [1, 2, 3]), Y is X * X), L)",
        ({"L": "[1, 4, 9]"},),
    ),
    Case(
        "findall_empty",
        MEMBER,
        "findall(X, member(X, []), L)",
        ({"L": "[]"},),
    ),
    Case(
        "findall_nested",
        MEMBER,
        "findall(L, (member(X, [1, 2]), findall(Y, member(Y, [X, X]), L)), Ls)",
        ({"Ls": "[[1, 1], [2, 2]]"},),
    ),
    Case(
        "max_with_cut",
        MEMBER
        + "max(X, Y, X) :- X >= Y, !.\nmax(_, Y, Y).\n"
        + "pair(A - B) :- member(A - B, [3 - 7, 7 - 3, 5 - 5]).\n",
        "findall(M, (pair(P - Q), max(P, Q, M)), L)",
        ({"L": "[7, 7, 5]"},),
    ),
    Case(
        "cut_commits_first",
        "p(1).\np(2).\np(3).\nfirst(X) :- p(X), !.\n",
        "first(X)",
        ({"X": "1"},),
    ),
    Case(
        "negation_filter",
        MEMBER + "keep(X) :- member(X, [1, 2, 3]), \\+ X =:= 2.\n",
        "keep(X)",
        ({"X": "1"}, {"X": "3"}),
    ),
    Case(
        "if_then_else_sign",
        MEMBER
        + "sign(X, S) :- ( X < 0 -> S = -1 ; X =:= 0 -> S = 0 ; S = 1 ).\n",
        "findall(S, (member(X, [-5, 0, 9]), sign(X, S)), L)",
        ({"L": "[-1, 0, 1]"},),
    ),
    Case(
        # integer division truncates toward zero, mod follows the divisor sign
        "integer_division",
        "",
        "X is 7 // -2, Y is 7 mod -2, Z is -7 // 2, W is -7 mod 2",
        ({"X": "-3", "Y": "-1", "Z": "-3", "W": "1"},),
    ),
    Case(
        "univ_build",
        "",
        "T =.. [point, 1, 2]",
        ({"T": "point(1, 2)"},),
    ),
    Case(
        "univ_decompose",
        "",
        "foo(a, b) =.. L",
        ({"L": "[foo, a, b]"},),
    ),
    Case(
        "functor_and_arg",
        "",
        "functor(point(1, 2), N, A), arg(2, point(a, b), X)",
        ({"N": "point", "A": "2", "X": "b"},),
    ),
    Case(
        "dynamic_database",
        "seed_only(unused).\n",
        "assertz(c(0)), retract(c(X)), Y is X + 1, assertz(c(Y)), c(Z)",
        ({"X": "0", "Y": "1", "Z": "1"},),
    ),
    Case(
        "type_tests",
        "",
        "var(X), X = 3, nonvar(X), number(X), atom(foo), \\+ atom(3)",
        ({"X": "3"},),
    ),
    Case(
        "structural_equality",
        "",
        "foo(1, 2) == foo(1, 2), foo(1) \\== foo(2)",
        ({},),
    ),
    Case(
        "occurs_check_rejects",
        "",
        "X = f(X)",
        (),
    ),
    Case(
        "list_length",
        "len([], 0).\nlen([_ | T], N) :- len(T, M), N is M + 1.\n",
        "len([a, b, c, d], N)",
        ({"N": "4"},),
    ),
    Case(
        "mutual_recursion",
        "even(0).\neven(N) :- N > 0, M is N - 1, odd(M).\n"
        "odd(N) :- N > 0, M is N - 1, even(M).\n",
        "even(10)",
        ({},),
    ),
    Case(
        "solution_cap_truncates",
        "nat(0).\nnat(N) :- nat(M), N is M + 1.\n",
        "nat(X)",
        ({"X": "0"}, {"X": "1"}, {"X": "2"}, {"X": "3"}, {"X": "4"}),
        halt="SolutionCap",
        limits=Limits(max_solutions=5),
    ),
    Case(
        "step_cap_stops_loop",
        "loop :- loop.\n",
        "loop",
        (),
        halt="StepCap",
        limits=Limits(max_steps=1000),
    ),
    Case(
        "symbolic_derivative",
        "deriv(x, 1).\n"
        "deriv(N, 0) :- number(N).\n"
        "deriv(U + V, DU + DV) :- deriv(U, DU), deriv(V, DV).\n"
        "deriv(U * V, U * DV + V * DU) :- deriv(U, DU), deriv(V, DV).\n",
        "deriv(x + 3, D)",
        ({"D": "+(1, 0)"},),
    ),
    Case(
        "symbolic_derivative_product",
        "deriv(x, 1).\n"
        "deriv(N, 0) :- number(N).\n"
        "deriv(U + V, DU + DV) :- deriv(U, DU), deriv(V, DV).\n"
        "deriv(U * V, U * DV + V * DU) :- deriv(U, DU), deriv(V, DV).\n",
        "deriv(x * x + 2, D)",
        ({"D": "+(+(*(x, 1), *(x, 1)), 0)"},),
    ),
    Case(
        "quicksort",
        APPEND
        + "qsort([], []).\n"
        + "qsort([H | T], S) :- part(T, H, L, G), qsort(L, SL), qsort(G, SG), "
        + "append(SL, [H | SG], S).\n"
        + "part([], _, [], []).\n"
        + "part([X | Xs], P, [X | L], G) :- X =< P, part(Xs, P, L, G).\n"
        + "part([X | Xs], P, L, [X | G]) :- X > P, part(Xs, P, L, G).\n",
        "qsort([3, 1, 2], S)",
        ({"S": "[1, 2, 3]"},),
    ),
    Case(
        "element_multiset_order",
        "element_of([X | _], X).\nelement_of([_ | T], X) :- element_of(T, X).\n",
        "element_of([2, 5, 2], X)",
        ({"X": "2"}, {"X": "5"}, {"X": "2"}),
    ),
    Case(
        "grandparent_join",
        "parent(tom, bob).\nparent(tom, liz).\nparent(bob, ann).\n"
        "grandparent(X, Z) :- parent(X, Y), parent(Y, Z).\n",
        "grandparent(tom, W)",
        ({"W": "ann"},),
    ),
    Case(
        "call_partial_application",
        "add(X, Y, Z) :- Z is X + Y.\napply2(G, A, B) :- call(G, A, B).\n",
        "apply2(add(1), 2, R)",
        ({"R": "3"},),
    ),
)
