"""Parser and pretty-printer for the rule surface syntax.

A program is a comma-separated list of rules.  A rule is::

    head :- item and item and ...

where the body may be empty (a fact, written ``head :-``).  Body items are
plain atoms, ``@(T, atom)``, windowed forms
``time_win(p, f, s, @(T, atom) | diamond(atom) | box(atom))``
(``tuple_win`` for count-based windows), and the builtins
``COMP(op, a, b)`` / ``MATH(op, r, a, b)``.  Lines starting with ``%`` are
comments.  ``parse_program(format_program(p))`` is structurally equal to
``p``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    At,
    Atom,
    BodyItem,
    Comp,
    Math,
    Plain,
    Program,
    Rule,
    Var,
    WindowSpec,
    Windowed,
    body_item_vars,
    is_ground,
)

COMP_OPS = ("==", "!=", ">=", "<=", ">", "<", "s!=")
MATH_OPS = ("+", "-", "*", "/")
RESERVED = {"and", "time_win", "tuple_win", "diamond", "box", "COMP", "MATH"}


@dataclass
class ParseError(Exception):
    line: int
    column: int
    message: str
    snippet: str = ""

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}"
        if self.snippet:
            return f"{loc}: {self.message}\n    {self.snippet}"
        return f"{loc}: {self.message}"


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>%[^\n]*)
    | (?P<arrow>:-)
    | (?P<sneq>s!=)
    | (?P<op>==|!=|>=|<=|>|<)
    | (?P<math>[+\-*/])
    | (?P<punct>[(),@])
    | (?P<number>\d+\.\d+|\d+\.|\.\d+|\d+)
    | (?P<variable>[A-Z][A-Za-z0-9_]*)
    | (?P<ident>[a-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            snippet = source.splitlines()[line - 1] if source.splitlines() else ""
            raise ParseError(line, col, f"unexpected character {source[pos]!r}", snippet)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append((kind, text, line, pos - line_start + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.lines = source.splitlines()
        self.tokens = _tokenize(source)
        self.pos = 0
        self.arities: dict = {}

    # -- token plumbing ----------------------------------------------------

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok[0] != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok=None) -> ParseError:
        if tok is None:
            tok = self.peek()
        _, _, line, col = tok
        snippet = self.lines[line - 1] if 0 < line <= len(self.lines) else ""
        return ParseError(line, col, message, snippet)

    def expect(self, kind: str, text: str | None = None):
        tok = self.peek()
        if tok[0] != kind or (text is not None and tok[1] != text):
            want = text if text is not None else kind
            raise self.error(f"expected {want!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    # -- grammar -----------------------------------------------------------

    def program(self) -> Program:
        rules = []
        while self.peek()[0] != "eof":
            rules.append(self.rule())
            if self.peek()[0] == "punct" and self.peek()[1] == ",":
                self.advance()
            elif self.peek()[0] != "eof":
                raise self.error("expected ',' between rules")
        return Program(rules, dict(self.arities))

    def rule(self) -> Rule:
        head_tok = self.peek()
        head = self.head()
        self.expect("arrow")
        body = []
        nxt = self.peek()
        if not (nxt[0] == "eof" or (nxt[0] == "punct" and nxt[1] == ",")):
            body.append(self.body_item())
            while self.peek()[0] == "ident" and self.peek()[1] == "and":
                self.advance()
                body.append(self.body_item())
        rule = Rule(head, tuple(body))
        self._check_rule(rule, head_tok)
        return rule

    def head(self):
        tok = self.peek()
        if tok[0] == "punct" and tok[1] == "@":
            return self.at_form()
        if tok[0] == "ident":
            return Plain(self.atom())
        raise self.error("expected a rule head")

    def at_form(self) -> At:
        self.expect("punct", "@")
        self.expect("punct", "(")
        t = self.at_time_term()
        self.expect("punct", ",")
        a = self.atom()
        self.expect("punct", ")")
        return At(t, a)

    def at_time_term(self):
        tok = self.peek()
        term = self.term()
        if not (type(term) is Var or type(term) is float):
            raise self.error("@-operator time must be a variable or a number", tok)
        return term

    def body_item(self) -> BodyItem:
        tok = self.peek()
        if tok[0] == "punct" and tok[1] == "@":
            return self.at_form()
        if tok[0] == "ident" and tok[1] in ("time_win", "tuple_win"):
            return self.window()
        if tok[0] == "variable" and tok[1] in ("COMP", "MATH"):
            return self.builtin()
        if tok[0] == "ident":
            if tok[1] in ("diamond", "box"):
                raise self.error(f"{tok[1]!r} requires an enclosing window")
            if tok[1] == "and":
                raise self.error("expected a body item")
            return Plain(self.atom())
        raise self.error("expected a body item")

    def window(self) -> Windowed:
        kind_tok = self.advance()
        kind = "time" if kind_tok[1] == "time_win" else "tuple"
        self.expect("punct", "(")
        past = self.window_int("window length")
        self.expect("punct", ",")
        future = self.window_int("window future length")
        self.expect("punct", ",")
        step = self.window_int("window step")
        self.expect("punct", ",")
        tok = self.peek()
        if tok[0] == "punct" and tok[1] == "@":
            inner = self.at_form()
            op, time, atom = "at", inner.time, inner.atom
        elif tok[0] == "ident" and tok[1] in ("diamond", "box"):
            op = self.advance()[1]
            time = None
            self.expect("punct", "(")
            atom = self.atom()
            self.expect("punct", ")")
        else:
            raise self.error("expected @(...), diamond(...) or box(...) inside window")
        self.expect("punct", ")")
        try:
            spec = WindowSpec(kind, past, future, step)
        except ValueError as exc:
            raise self.error(str(exc), kind_tok) from None
        return Windowed(spec, op, time, atom)

    def window_int(self, what: str) -> int:
        tok = self.peek()
        if tok[0] != "number":
            raise self.error(f"{what} must be a number")
        self.advance()
        value = float(tok[1])
        if not value.is_integer() or value < 0:
            raise self.error(f"{what} must be a nonnegative integer", tok)
        return int(value)

    def builtin(self) -> BodyItem:
        name_tok = self.advance()
        self.expect("punct", "(")
        op_tok = self.advance()
        if name_tok[1] == "COMP":
            if op_tok[1] not in COMP_OPS or op_tok[0] not in ("op", "sneq"):
                raise self.error(f"unknown comparison operator {op_tok[1]!r}", op_tok)
            self.expect("punct", ",")
            lhs = self.term()
            self.expect("punct", ",")
            rhs = self.term()
            self.expect("punct", ")")
            return Comp(op_tok[1], lhs, rhs)
        if op_tok[1] not in MATH_OPS or op_tok[0] != "math":
            raise self.error(f"unknown math operator {op_tok[1]!r}", op_tok)
        self.expect("punct", ",")
        result = self.term()
        self.expect("punct", ",")
        a = self.term()
        self.expect("punct", ",")
        b = self.term()
        self.expect("punct", ")")
        return Math(op_tok[1], result, a, b)

    def atom(self) -> Atom:
        name_tok = self.expect("ident")
        name = name_tok[1]
        if name in RESERVED:
            raise self.error(f"{name!r} is reserved", name_tok)
        args = []
        if self.peek()[0] == "punct" and self.peek()[1] == "(":
            self.advance()
            args.append(self.term())
            while self.peek()[0] == "punct" and self.peek()[1] == ",":
                self.advance()
                args.append(self.term())
            self.expect("punct", ")")
        arity = len(args)
        seen = self.arities.get(name)
        if seen is None:
            self.arities[name] = arity
        elif seen != arity:
            raise self.error(
                f"predicate {name!r} used with arity {arity}, previously {seen}",
                name_tok,
            )
        return (name,) + tuple(args)

    def term(self):
        tok = self.peek()
        if tok[0] == "number":
            self.advance()
            return float(tok[1])
        if tok[0] == "math" and tok[1] == "-":
            self.advance()
            num = self.expect("number")
            return -float(num[1])
        if tok[0] == "variable":
            self.advance()
            return Var(tok[1])
        if tok[0] == "ident":
            if tok[1] in RESERVED:
                raise self.error(f"{tok[1]!r} is reserved", tok)
            self.advance()
            return tok[1]
        raise self.error("expected a term")

    # -- per-rule checks ----------------------------------------------------

    def _check_rule(self, rule: Rule, head_tok):
        head_vars = set(body_item_vars(rule.head))
        if rule.is_fact():
            if head_vars:
                raise self.error(
                    f"fact head must be ground, has variable {sorted(head_vars)[0]}",
                    head_tok,
                )
            return
        bound = set()
        for item in rule.body:
            bound |= body_item_vars(item)
        unsafe = head_vars - bound
        if unsafe:
            raise self.error(
                f"unsafe head variable {sorted(unsafe)[0]} "
                "(must occur in a body atom or as a MATH result)",
                head_tok,
            )


def parse_program(source: str) -> Program:
    """Parse a full program; raises ParseError with position info."""
    return _Parser(source).program()


def parse_extended_atom(source: str) -> BodyItem:
    """Parse a single body item (extended atom or builtin)."""
    p = _Parser(source)
    item = p.body_item()
    if p.peek()[0] != "eof":
        raise p.error("trailing input after extended atom")
    return item


# -- pretty printer ---------------------------------------------------------


def format_term(t) -> str:
    if type(t) is Var:
        return t.name
    if type(t) is str:
        return t
    if float(t).is_integer():
        return str(int(t))
    return repr(float(t))


def format_atom(atom: Atom) -> str:
    if len(atom) == 1:
        return atom[0]
    return f"{atom[0]}({', '.join(format_term(a) for a in atom[1:])})"


def format_body_item(item: BodyItem) -> str:
    if isinstance(item, Plain):
        return format_atom(item.atom)
    if isinstance(item, At):
        return f"@({format_term(item.time)}, {format_atom(item.atom)})"
    if isinstance(item, Windowed):
        name = "time_win" if item.spec.kind == "time" else "tuple_win"
        if item.op == "at":
            inner = f"@({format_term(item.time)}, {format_atom(item.atom)})"
        else:
            inner = f"{item.op}({format_atom(item.atom)})"
        return f"{name}({item.spec.past}, {item.spec.future}, {item.spec.step}, {inner})"
    if isinstance(item, Comp):
        return f"COMP({item.op}, {format_term(item.lhs)}, {format_term(item.rhs)})"
    if isinstance(item, Math):
        return (
            f"MATH({item.op}, {format_term(item.result)}, "
            f"{format_term(item.a)}, {format_term(item.b)})"
        )
    raise TypeError(f"not a body item: {item!r}")


def format_rule(rule: Rule) -> str:
    head = format_body_item(rule.head)
    if rule.is_fact():
        return f"{head} :-"
    return f"{head} :- " + " and ".join(format_body_item(i) for i in rule.body)


def format_program(program: Program) -> str:
    if not program.rules:
        return ""
    return ",\n".join(format_rule(r) for r in program.rules) + "\n"
