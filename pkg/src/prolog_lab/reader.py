"""Reader: tokenizer and operator-precedence parser with learner-grade
diagnostics.

The design goal is not speed but precision of error reporting: every
diagnostic carries a catalog code, a source span, a message, and a fix hint,
and the parser recovers at clause granularity (skip to the next '.') so one
typo does not hide the rest of the program.

Dialect notes, fixed by contract:
  * operators come from a fixed table (no user-defined operators, no op/3),
  * integers only (floats are rejected with a dedicated diagnostic),
  * double-quoted text denotes a list of character codes,
  * directives (':- goal.') are rejected: learner programs are facts/rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .terms import (
    Atom,
    Clause,
    Int,
    INT_MAX,
    INT_MIN,
    NIL,
    Program,
    Struct,
    Term,
    Var,
    make_list,
)

MAX_TERM_DEPTH = 500


@dataclass(frozen=True)
class SourceSpan:
    line: int  # 1-based
    col: int  # 1-based
    length: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str  # "error" | "warning"
    span: SourceSpan
    message: str
    fix_hint: str

    def __str__(self) -> str:
        return f"{self.span} {self.code}: {self.message} (hint: {self.fix_hint})"


# Catalog: code -> (severity, message template, fix hint). Messages are
# completed by .format(**details); the catalog itself is plain data so the
# service and docs can enumerate it.
CATALOG: dict[str, tuple[str, str, str]] = {
    "E-MISSING-PERIOD": (
        "error",
        "expected '.' at the end of the clause, found {found}",
        "end every clause with a period followed by whitespace",
    ),
    "E-UNBALANCED-PAREN": (
        "error",
        "unbalanced {kind}: {detail}",
        "make sure every opening bracket has a matching closing one",
    ),
    "E-OPERATOR-CLASH": (
        "error",
        "{detail}",
        "add parentheses to make the intended grouping explicit",
    ),
    "E-VAR-AS-FUNCTOR": (
        "error",
        "variable {name} cannot be used as a functor",
        "functor names are atoms; start the name with a lowercase letter",
    ),
    "E-SINGLETON-VAR": (
        "warning",
        "variable {name} occurs only once in this clause",
        "check for a misspelled variable, or rename it to _{name} if it is intentional",
    ),
    "E-UNEXPECTED-EOF": (
        "error",
        "unexpected end of input: {detail}",
        "complete the clause and end it with '.'",
    ),
    "E-UNTERMINATED-COMMENT": (
        "error",
        "block comment starting here is never closed",
        "close the comment with */",
    ),
    "E-UNTERMINATED-QUOTE": (
        "error",
        "quoted text starting here is never closed",
        "close the quote before the end of the line",
    ),
    "E-BAD-CHAR": (
        "error",
        "character {char} is not part of the language",
        "{hint}",
    ),
    "E-FLOAT-UNSUPPORTED": (
        "error",
        "floating point numbers are not supported",
        "this lab computes with 64-bit integers only",
    ),
    "E-INT-TOO-LARGE": (
        "error",
        "integer literal does not fit into a signed 64-bit word",
        "integers must lie within [-9223372036854775808, 9223372036854775807]",
    ),
    "E-DIRECTIVE-UNSUPPORTED": (
        "error",
        "directives are not supported",
        "write facts and rules only; programs are loaded without executing goals",
    ),
    "E-BAD-CLAUSE-HEAD": (
        "error",
        "a clause head must be an atom or a compound term, not {what}",
        "name the predicate with a lowercase atom",
    ),
    "E-BAD-GOAL": (
        "error",
        "{what} cannot be called as a goal",
        "goals are atoms, compound terms, or variables bound at run time",
    ),
    "E-TERM-TOO-DEEP": (
        "error",
        "term nesting is too deep",
        f"terms nested beyond {MAX_TERM_DEPTH} levels are rejected",
    ),
}


def make_diagnostic(code: str, span: SourceSpan, **details) -> Diagnostic:
    severity, template, hint = CATALOG[code]
    message = template.format(**details) if details else template
    if code == "E-BAD-CHAR":
        hint = details.get("hint", "remove it")
    if code == "E-SINGLETON-VAR":
        hint = hint.format(**details)
    return Diagnostic(code, severity, span, message, hint)


# --- fixed operator table ---------------------------------------------------

# name -> (priority, type). Infix types: xfx (non-assoc), xfy (right), yfx
# (left). Prefix types: fy (arg may have equal priority), fx (strictly lower).
INFIX_OPS: dict[str, tuple[int, str]] = {
    ":-": (1200, "xfx"),
    ";": (1100, "xfy"),
    "->": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "is": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "=..": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}

PREFIX_OPS: dict[str, tuple[int, str]] = {
    ":-": (1200, "fx"),
    "\\+": (900, "fy"),
    "-": (200, "fy"),
}

ARG_PRIORITY = 999  # arguments and list elements parse below ','/2


# --- tokens -----------------------------------------------------------------

_GRAPHIC = set("#$&*+-./:<=>?@^~\\")
_SOLO = {"!", ";"}
_UNESCAPES = {
    "\\": "\\",
    "'": "'",
    '"': '"',
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "a": "\a",
    "b": "\b",
    "f": "\f",
    "v": "\v",
}


class Token:
    __slots__ = ("kind", "value", "line", "col", "length", "adjacent")

    def __init__(self, kind: str, value, line: int, col: int, length: int, adjacent: bool = False):
        self.kind = kind  # atom | var | int | string | punct | end | eof
        self.value = value
        self.line = line
        self.col = col
        self.length = length
        self.adjacent = adjacent  # for '(' only: no layout before it

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, self.length)

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "end":
            return "'.'"
        if self.kind == "string":
            return "a string"
        return f"'{self.value}'"


class Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.diagnostics: list[Diagnostic] = []

    def _span(self, start_line: int, start_col: int, length: int) -> SourceSpan:
        return SourceSpan(start_line, start_col, max(length, 1))

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        text = self.text
        while True:
            # layout and comments
            while self.pos < len(text):
                c = text[self.pos]
                if c in " \t\r\n":
                    self._advance()
                elif c == "%":
                    while self.pos < len(text) and text[self.pos] != "\n":
                        self._advance()
                elif c == "/" and self._peek(1) == "*":
                    line, col = self.line, self.col
                    self._advance(2)
                    closed = False
                    while self.pos < len(text):
                        if text[self.pos] == "*" and self._peek(1) == "/":
                            self._advance(2)
                            closed = True
                            break
                        self._advance()
                    if not closed:
                        self.diagnostics.append(
                            make_diagnostic("E-UNTERMINATED-COMMENT", self._span(line, col, 2))
                        )
                else:
                    break
            if self.pos >= len(text):
                out.append(Token("eof", None, self.line, self.col, 0))
                return out

            line, col = self.line, self.col
            c = text[self.pos]

            if c == "(":
                adjacent = bool(out) and out[-1].kind in ("atom", "var") and self._ends_at(out[-1], line, col)
                self._advance()
                out.append(Token("punct", "(", line, col, 1, adjacent=adjacent))
            elif c in ")[],|":
                self._advance()
                out.append(Token("punct", c, line, col, 1))
            elif c in _SOLO:
                self._advance()
                out.append(Token("atom", c, line, col, 1))
            elif c.isdigit():
                start = self.pos
                while self._peek().isdigit():
                    self._advance()
                # float literals get their own diagnostic, then parse as the
                # integer part so later errors stay meaningful
                if self._peek() == "." and self._peek(1).isdigit():
                    self._advance()
                    while self._peek().isdigit():
                        self._advance()
                    lexeme = text[start : self.pos]
                    self.diagnostics.append(
                        make_diagnostic("E-FLOAT-UNSUPPORTED", self._span(line, col, len(lexeme)))
                    )
                    out.append(Token("int", int(lexeme.split(".")[0]), line, col, len(lexeme)))
                    continue
                lexeme = text[start : self.pos]
                value = int(lexeme)
                if value > INT_MAX:
                    self.diagnostics.append(
                        make_diagnostic("E-INT-TOO-LARGE", self._span(line, col, len(lexeme)))
                    )
                    value = INT_MAX
                out.append(Token("int", value, line, col, len(lexeme)))
            elif c == "_" or c.isalpha():
                start = self.pos
                if not c.isascii():
                    self._advance()
                    self.diagnostics.append(
                        make_diagnostic(
                            "E-BAD-CHAR",
                            self._span(line, col, 1),
                            char=repr(c),
                            hint="only ASCII names are supported; quote the atom if you need other characters",
                        )
                    )
                    continue
                while True:
                    ch = self._peek()
                    if ch and ch.isascii() and (ch.isalnum() or ch == "_"):
                        self._advance()
                    else:
                        break
                lexeme = text[start : self.pos]
                kind = "var" if (lexeme[0] == "_" or lexeme[0].isupper()) else "atom"
                out.append(Token(kind, lexeme, line, col, len(lexeme)))
            elif c == "'" or c == '"':
                quote = c
                self._advance()
                chars: list[str] = []
                closed = False
                while self.pos < len(text):
                    ch = text[self.pos]
                    if ch == quote:
                        if self._peek(1) == quote:  # doubled quote
                            chars.append(quote)
                            self._advance(2)
                            continue
                        self._advance()
                        closed = True
                        break
                    if ch == "\n":
                        break
                    if ch == "\\":
                        esc = self._peek(1)
                        if esc == "\n":  # line continuation
                            self._advance(2)
                            continue
                        if esc in _UNESCAPES:
                            chars.append(_UNESCAPES[esc])
                            self._advance(2)
                            continue
                        self.diagnostics.append(
                            make_diagnostic(
                                "E-BAD-CHAR",
                                self._span(self.line, self.col, 2),
                                char=f"'\\{esc}'",
                                hint="supported escapes: \\\\ \\' \\\" \\n \\t \\r \\a \\b \\f \\v",
                            )
                        )
                        self._advance(2)
                        continue
                    chars.append(ch)
                    self._advance()
                if not closed:
                    self.diagnostics.append(
                        make_diagnostic("E-UNTERMINATED-QUOTE", self._span(line, col, 1))
                    )
                value = "".join(chars)
                if quote == "'":
                    out.append(Token("atom", value, line, col, max(self.pos_col_delta(line, col), 2)))
                else:
                    out.append(Token("string", value, line, col, max(self.pos_col_delta(line, col), 2)))
            elif c in _GRAPHIC:
                # end-of-clause: a solitary '.' followed by layout, EOF or %
                nxt = self._peek(1)
                if c == "." and (nxt == "" or nxt in " \t\r\n%"):
                    self._advance()
                    out.append(Token("end", ".", line, col, 1))
                    continue
                start = self.pos
                while self._peek() in _GRAPHIC:
                    if self._peek() == "/" and self._peek(1) == "*":
                        break  # let the comment scanner have it
                    self._advance()
                lexeme = text[start : self.pos]
                out.append(Token("atom", lexeme, line, col, len(lexeme)))
            else:
                self._advance()
                hint = "remove it"
                if c in "{}":
                    hint = "curly-brace terms are not part of this dialect"
                elif c == "`":
                    hint = "back-quoted strings are not supported; use double quotes"
                self.diagnostics.append(
                    make_diagnostic("E-BAD-CHAR", self._span(line, col, 1), char=repr(c), hint=hint)
                )

    def pos_col_delta(self, line: int, col: int) -> int:
        return self.col - col if line == self.line else 1

    @staticmethod
    def _ends_at(tok: Token, line: int, col: int) -> bool:
        return tok.line == line and tok.col + tok.length == col


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tk = Tokenizer(text)
    toks = tk.tokens()
    return toks, tk.diagnostics


# --- parser -----------------------------------------------------------------


class _ClauseError(Exception):
    """Raised after recording a diagnostic; recovery skips to the next '.'"""


@dataclass
class ParseResult:
    program: Optional[Program]
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.program is not None

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "warning"]


class _Parser:
    def __init__(self, tokens: list[Token], diagnostics: list[Diagnostic], var_counter_start: int = 0):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics
        self.var_id = var_counter_start
        # per-clause variable context: name -> Var, plus occurrence bookkeeping
        self.vars: dict[str, Var] = {}
        self.var_occurrences: dict[str, list[SourceSpan]] = {}
        self.depth = 0

    # -- token helpers

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, code: str, span: SourceSpan, **details) -> _ClauseError:
        self.diagnostics.append(make_diagnostic(code, span, **details))
        return _ClauseError()

    # -- term parsing

    def fresh_var(self, name: str, span: SourceSpan) -> Var:
        if name == "_":
            self.var_id += 1
            return Var(self.var_id, "_")
        got = self.vars.get(name)
        if got is None:
            self.var_id += 1
            got = Var(self.var_id, name)
            self.vars[name] = got
        self.var_occurrences.setdefault(name, []).append(span)
        return got

    def reset_clause_context(self) -> None:
        self.vars = {}
        self.var_occurrences = {}

    def parse_term(self, max_prec: int) -> Term:
        self.depth += 1
        try:
            if self.depth > MAX_TERM_DEPTH:
                raise self.error("E-TERM-TOO-DEEP", self.peek().span)
            left, left_prec = self._parse_primary(max_prec)
            while True:
                tok = self.peek()
                name = None
                if tok.kind == "atom" and tok.value in INFIX_OPS:
                    name = tok.value
                elif tok.kind == "punct" and tok.value == ",":
                    name = ","
                if name is None:
                    return left
                prec, typ = INFIX_OPS[name]
                if prec > max_prec:
                    return left
                allowed_left = prec if typ == "yfx" else prec - 1
                if left_prec > allowed_left:
                    raise self.error(
                        "E-OPERATOR-CLASH",
                        tok.span,
                        detail=f"operator '{name}' cannot follow a term of equal or higher priority",
                    )
                self.next()
                right_max = prec if typ == "xfy" else prec - 1
                right = self.parse_term(right_max)
                left = Struct(name, (left, right), tok.span)
                left_prec = prec
        finally:
            self.depth -= 1

    def _parse_primary(self, max_prec: int) -> tuple[Term, int]:
        tok = self.next()
        if tok.kind == "int":
            return Int(tok.value, tok.span), 0
        if tok.kind == "string":
            return make_list([Int(ord(ch)) for ch in tok.value]), 0
        if tok.kind == "var":
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.value == "(" and nxt.adjacent:
                raise self.error("E-VAR-AS-FUNCTOR", tok.span, name=tok.value)
            return self.fresh_var(tok.value, tok.span), 0
        if tok.kind == "atom":
            return self._parse_atom_primary(tok, max_prec)
        if tok.kind == "punct":
            if tok.value == "(":
                inner = self.parse_term(1200)
                self._expect_close(")", tok)
                return inner, 0
            if tok.value == "[":
                return self._parse_list(tok), 0
            raise self.error(
                "E-OPERATOR-CLASH",
                tok.span,
                detail=f"expected a term, found '{tok.value}'",
            )
        if tok.kind == "end":
            raise self.error(
                "E-OPERATOR-CLASH", tok.span, detail="expected a term before '.'"
            )
        raise self.error("E-UNEXPECTED-EOF", tok.span, detail="a term was expected here")

    def _parse_atom_primary(self, tok: Token, max_prec: int) -> tuple[Term, int]:
        name = tok.value
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.value == "(" and nxt.adjacent:
            self.next()
            args = self._parse_args(nxt)
            return Struct(name, tuple(args), tok.span), 0
        if name in PREFIX_OPS and self._starts_term(nxt):
            prec, typ = PREFIX_OPS[name]
            if prec <= max_prec:
                if name == "-" and nxt.kind == "int":
                    self.next()
                    return Int(-nxt.value, tok.span), 0
                arg = self.parse_term(prec if typ == "fy" else prec - 1)
                return Struct(name, (arg,), tok.span), prec
        if name in INFIX_OPS and name not in PREFIX_OPS and self._starts_term(nxt):
            # a bare infix operator where a term should begin
            raise self.error(
                "E-OPERATOR-CLASH",
                tok.span,
                detail=f"operator '{name}' cannot start a term; a term seems to be missing before it",
            )
        return Atom(name, tok.span), 0

    def _starts_term(self, tok: Token) -> bool:
        if tok.kind in ("int", "var", "string", "atom"):
            return True
        return tok.kind == "punct" and tok.value in ("(", "[")

    def _parse_args(self, open_tok: Token) -> list[Term]:
        args = [self.parse_term(ARG_PRIORITY)]
        while True:
            tok = self.next()
            if tok.kind == "punct" and tok.value == ")":
                return args
            if tok.kind == "punct" and tok.value == ",":
                args.append(self.parse_term(ARG_PRIORITY))
                continue
            if tok.kind in ("end", "eof"):
                raise self.error(
                    "E-UNBALANCED-PAREN",
                    open_tok.span,
                    kind="parentheses",
                    detail="this '(' is never closed",
                )
            raise self.error(
                "E-OPERATOR-CLASH",
                tok.span,
                detail=f"expected ',' or ')' in the argument list, found {tok.describe()}",
            )

    def _parse_list(self, open_tok: Token) -> Term:
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.value == "]":
            self.next()
            return Atom("[]", open_tok.span)
        items = [self.parse_term(ARG_PRIORITY)]
        tail: Term = Atom("[]")
        while True:
            tok = self.next()
            if tok.kind == "punct" and tok.value == "]":
                break
            if tok.kind == "punct" and tok.value == ",":
                items.append(self.parse_term(ARG_PRIORITY))
                continue
            if tok.kind == "punct" and tok.value == "|":
                tail = self.parse_term(ARG_PRIORITY)
                closer = self.next()
                if not (closer.kind == "punct" and closer.value == "]"):
                    raise self.error(
                        "E-UNBALANCED-PAREN",
                        open_tok.span,
                        kind="brackets",
                        detail="this '[' is never closed",
                    )
                break
            if tok.kind in ("end", "eof"):
                raise self.error(
                    "E-UNBALANCED-PAREN",
                    open_tok.span,
                    kind="brackets",
                    detail="this '[' is never closed",
                )
            raise self.error(
                "E-OPERATOR-CLASH",
                tok.span,
                detail=f"expected ',', '|' or ']' in the list, found {tok.describe()}",
            )
        return make_list(items, tail)

    def _expect_close(self, closer: str, open_tok: Token) -> None:
        tok = self.next()
        if tok.kind == "punct" and tok.value == closer:
            return
        raise self.error(
            "E-UNBALANCED-PAREN",
            open_tok.span,
            kind="parentheses",
            detail="this '(' is never closed",
        )

    # -- clause level

    def skip_to_end(self) -> None:
        while True:
            tok = self.next()
            if tok.kind in ("end", "eof"):
                return

    def at_eof(self) -> bool:
        return self.peek().kind == "eof"

    def parse_clause(self) -> Optional[Clause]:
        """One clause, or None when a diagnostic was recorded instead."""
        self.reset_clause_context()
        try:
            term = self.parse_term(1200)
            tok = self.next()
            if tok.kind != "end":
                if tok.kind == "eof":
                    raise self.error(
                        "E-UNEXPECTED-EOF", tok.span, detail="the last clause is missing its '.'"
                    )
                raise self.error("E-MISSING-PERIOD", tok.span, found=tok.describe())
            clause = self._to_clause(term)
            self._check_singletons()
            return clause
        except _ClauseError:
            self.skip_to_end()
            return None

    def _to_clause(self, term: Term) -> Clause:
        if isinstance(term, Struct) and term.name == ":-":
            if len(term.args) == 1:
                raise self.error(
                    "E-DIRECTIVE-UNSUPPORTED", term.span or SourceSpan(1, 1, 1)
                )
            head, body_term = term.args
            body = self._flatten_body(body_term)
        else:
            head, body = term, ()
        if isinstance(head, Var):
            raise self.error(
                "E-BAD-CLAUSE-HEAD", head_span(head) or SourceSpan(1, 1, 1), what="a variable"
            )
        if isinstance(head, Int):
            raise self.error(
                "E-BAD-CLAUSE-HEAD", head.span or SourceSpan(1, 1, 1), what="a number"
            )
        return Clause(head, body)

    def _flatten_body(self, term: Term) -> tuple:
        goals: list[Term] = []
        stack = [term]
        while stack:
            t = stack.pop()
            if isinstance(t, Struct) and t.name == "," and len(t.args) == 2:
                stack.append(t.args[1])
                stack.append(t.args[0])
                continue
            if isinstance(t, Int):
                raise self.error(
                    "E-BAD-GOAL", t.span or SourceSpan(1, 1, 1), what="a number"
                )
            goals.append(t)
        # Reconstruct textual order: we appended left-to-right already.
        return tuple(goals)

    def _check_singletons(self) -> None:
        for name, spans in self.var_occurrences.items():
            if len(spans) == 1 and not name.startswith("_"):
                self.diagnostics.append(
                    make_diagnostic("E-SINGLETON-VAR", spans[0], name=name)
                )


def head_span(t: Term) -> Optional[SourceSpan]:
    return getattr(t, "span", None)


def parse_program(text: str) -> ParseResult:
    """Parse a full program. On any error-severity diagnostic the program is
    None; warnings alone do not invalidate the result. The parser recovers at
    clause granularity, so diagnostics for several clauses accumulate."""
    tokens, diagnostics = tokenize(text)
    parser = _Parser(tokens, diagnostics)
    clauses: list[Clause] = []
    while not parser.at_eof():
        clause = parser.parse_clause()
        if clause is not None:
            clauses.append(clause)
    if any(d.severity == "error" for d in diagnostics):
        return ParseResult(None, diagnostics)
    return ParseResult(Program(clauses), diagnostics)


@dataclass
class QueryResult:
    goals: Optional[tuple]
    variables: list[Var]  # named query variables, first-occurrence order
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.goals is not None


def parse_query(text: str) -> QueryResult:
    """Parse one query: a goal or conjunction, with an optional final '.'"""
    tokens, diagnostics = tokenize(text)
    parser = _Parser(tokens, diagnostics)
    try:
        term = parser.parse_term(1200)
        tok = parser.next()
        if tok.kind == "end":
            tok = parser.next()
        if tok.kind != "eof":
            raise parser.error("E-MISSING-PERIOD", tok.span, found=tok.describe())
        goals = parser._flatten_body(term)
    except _ClauseError:
        return QueryResult(None, [], diagnostics)
    if any(d.severity == "error" for d in diagnostics):
        return QueryResult(None, [], diagnostics)
    variables = [v for v in parser.vars.values()]
    return QueryResult(goals, variables, diagnostics)


def parse_term_text(text: str) -> tuple[Optional[Term], list[Diagnostic]]:
    """Parse a single term (no trailing '.'). Used for bundle templates and
    canonical-rendering round trips."""
    tokens, diagnostics = tokenize(text)
    parser = _Parser(tokens, diagnostics)
    try:
        term = parser.parse_term(1200)
        tok = parser.next()
        if tok.kind == "end":
            tok = parser.next()
        if tok.kind != "eof":
            raise parser.error("E-MISSING-PERIOD", tok.span, found=tok.describe())
    except _ClauseError:
        return None, diagnostics
    if any(d.severity == "error" for d in diagnostics):
        return None, diagnostics
    return term, diagnostics


def render_clause(clause: Clause) -> str:
    """Clause text that reparses to an alpha-equivalent clause. The head and
    goals are rendered canonically; ':-' and ',' appear infix so the result
    reads like source."""
    from .terms import render_term

    if not clause.body:
        return render_term(clause.head) + "."
    body = ", ".join(render_term(g) for g in clause.body)
    return f"{render_term(clause.head)} :- {body}."


def render_program(program: Program) -> str:
    return "\n".join(render_clause(c) for c in program.clauses)
