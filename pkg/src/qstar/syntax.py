"""Abstract syntax, concrete syntax, and alpha-conversion machinery.

The term language has two kinds of variables: classical variables
(lowercase identifiers, bound by abstractions) and quantum variables
(written ``@r``, never bound, naming coordinates of a quantum register).
Uppercase identifiers are unitary gate names; ``0`` and ``1`` are boolean
constants.  Terms are:

    M ::= x | @r | !M | 0 | 1 | U | new M | M N | meas M
        | if M then M else M | <M1, ..., Mn>  (n >= 2) | \\p. M

with abstraction patterns ``p ::= x | <x1, ..., xn> | !x``.

Terms are plain frozen dataclasses compared structurally; alpha-equality
and alpha-canonical renaming are separate operations.  Substitution is
capture-avoiding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional


# ---------------------------------------------------------------------------
# patterns


class Pattern:
    """Base class for abstraction patterns."""

    def bound_names(self) -> tuple[str, ...]:
        raise NotImplementedError


@dataclass(frozen=True)
class VarPattern(Pattern):
    """Linear pattern ``x``: the bound variable is used exactly once."""

    name: str

    def bound_names(self) -> tuple[str, ...]:
        return (self.name,)


@dataclass(frozen=True)
class TuplePattern(Pattern):
    """Linear pattern ``<x1, ..., xn>`` binding n >= 2 distinct variables."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 2:
            raise ValueError("tuple pattern needs at least two variables")
        if len(set(self.names)) != len(self.names):
            raise ValueError("tuple pattern variables must be distinct")

    def bound_names(self) -> tuple[str, ...]:
        return self.names


@dataclass(frozen=True)
class BangPattern(Pattern):
    """Non-linear pattern ``!x``: the bound variable may be used freely."""

    name: str

    def bound_names(self) -> tuple[str, ...]:
        return (self.name,)


# ---------------------------------------------------------------------------
# terms


class Term:
    """Base class for terms."""

    def children(self) -> tuple["Term", ...]:
        raise NotImplementedError


@dataclass(frozen=True)
class ClassicalVar(Term):
    name: str

    def children(self) -> tuple[Term, ...]:
        return ()


@dataclass(frozen=True)
class QuantumVar(Term):
    name: str

    def children(self) -> tuple[Term, ...]:
        return ()


@dataclass(frozen=True)
class BoolConst(Term):
    value: int  # 0 or 1

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise ValueError("boolean constant must be 0 or 1")

    def children(self) -> tuple[Term, ...]:
        return ()


@dataclass(frozen=True)
class UnitaryName(Term):
    """A gate name; its meaning is resolved against a gate registry."""

    name: str

    def children(self) -> tuple[Term, ...]:
        return ()


@dataclass(frozen=True)
class Bang(Term):
    """``!M``: a duplicable thunk.  Reduction never enters a Bang."""

    body: Term

    def children(self) -> tuple[Term, ...]:
        return (self.body,)


@dataclass(frozen=True)
class New(Term):
    """``new M``: allocate a fresh qubit initialised from a boolean."""

    arg: Term

    def children(self) -> tuple[Term, ...]:
        return (self.arg,)


@dataclass(frozen=True)
class Meas(Term):
    """``meas M``: destructively measure a qubit."""

    arg: Term

    def children(self) -> tuple[Term, ...]:
        return (self.arg,)


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term

    def children(self) -> tuple[Term, ...]:
        return (self.fun, self.arg)


@dataclass(frozen=True)
class IfThenElse(Term):
    cond: Term
    then: Term
    orelse: Term

    def children(self) -> tuple[Term, ...]:
        # Only the condition is reachable by reduction; the branches are
        # still children for structural traversals.
        return (self.cond, self.then, self.orelse)


@dataclass(frozen=True)
class Tuple(Term):
    items: tuple[Term, ...]

    def __post_init__(self) -> None:
        if len(self.items) < 2:
            raise ValueError("tuples need at least two components")

    def children(self) -> tuple[Term, ...]:
        return self.items


@dataclass(frozen=True)
class Lambda(Term):
    pattern: Pattern
    body: Term

    def children(self) -> tuple[Term, ...]:
        return (self.body,)


# ---------------------------------------------------------------------------
# free variables and sizes


def free_classical_vars(term: Term) -> frozenset[str]:
    """Classical variables occurring free in ``term``."""
    if isinstance(term, ClassicalVar):
        return frozenset((term.name,))
    if isinstance(term, Lambda):
        return free_classical_vars(term.body) - set(term.pattern.bound_names())
    out: frozenset[str] = frozenset()
    for child in term.children():
        out |= free_classical_vars(child)
    return out


def free_quantum_vars(term: Term) -> frozenset[str]:
    """Quantum variables occurring in ``term`` (they are never bound)."""
    if isinstance(term, QuantumVar):
        return frozenset((term.name,))
    out: frozenset[str] = frozenset()
    for child in term.children():
        out |= free_quantum_vars(child)
    return out


def quantum_vars_in_order(term: Term) -> list[str]:
    """Quantum variables in order of first left-to-right occurrence."""
    seen: list[str] = []

    def walk(t: Term) -> None:
        if isinstance(t, QuantumVar):
            if t.name not in seen:
                seen.append(t.name)
            return
        for child in t.children():
            walk(child)

    walk(term)
    return seen


def term_size(term: Term) -> int:
    """Number of AST nodes.

    Every variable, constant, gate name, Bang, New, Meas, tuple
    constructor, application, abstraction, and if counts as one node.
    Abstraction patterns are part of the abstraction node.
    """
    return 1 + sum(term_size(c) for c in term.children())


def subterms(term: Term) -> Iterator[Term]:
    """Pre-order iterator over all subterms, including ``term`` itself."""
    yield term
    for child in term.children():
        yield from subterms(child)


# ---------------------------------------------------------------------------
# fresh names, renaming, substitution


def _fresh_name(base: str, avoid: set[str]) -> str:
    if base not in avoid:
        return base
    i = 0
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def rename_quantum_vars(term: Term, mapping: dict[str, str]) -> Term:
    """Apply a bijective renaming to the quantum variables of ``term``."""
    if isinstance(term, QuantumVar):
        return QuantumVar(mapping.get(term.name, term.name))
    return _rebuild(term, [rename_quantum_vars(c, mapping) for c in term.children()])


def _rebuild(term: Term, kids: list[Term]) -> Term:
    """Reassemble a term node with replaced children (same shapes)."""
    if isinstance(term, Bang):
        return Bang(kids[0])
    if isinstance(term, New):
        return New(kids[0])
    if isinstance(term, Meas):
        return Meas(kids[0])
    if isinstance(term, App):
        return App(kids[0], kids[1])
    if isinstance(term, IfThenElse):
        return IfThenElse(kids[0], kids[1], kids[2])
    if isinstance(term, Tuple):
        return Tuple(tuple(kids))
    if isinstance(term, Lambda):
        return Lambda(term.pattern, kids[0])
    if kids:
        raise AssertionError(f"unexpected children for {term!r}")
    return term


def substitute(term: Term, subst: dict[str, Term]) -> Term:
    """Simultaneous capture-avoiding substitution of classical variables.

    ``subst`` maps variable names to replacement terms.  Binders that
    would capture a free variable of a replacement are renamed first.
    """
    if not subst:
        return term
    if isinstance(term, ClassicalVar):
        return subst.get(term.name, term)
    if isinstance(term, Lambda):
        live = {x: s for x, s in subst.items()
                if x not in term.pattern.bound_names()
                and x in free_classical_vars(term.body)}
        if not live:
            return term
        # rename any binder that would capture a free variable of a
        # replacement term
        capture_risk: set[str] = set()
        for s in live.values():
            capture_risk |= free_classical_vars(s)
        pattern = term.pattern
        body = term.body
        if capture_risk & set(pattern.bound_names()):
            avoid = (capture_risk | free_classical_vars(body)
                     | set(live) | set(pattern.bound_names()))
            renaming: dict[str, Term] = {}
            new_names: list[str] = []
            for name in pattern.bound_names():
                if name in capture_risk:
                    fresh = _fresh_name(name, avoid)
                    avoid.add(fresh)
                    renaming[name] = ClassicalVar(fresh)
                    new_names.append(fresh)
                else:
                    new_names.append(name)
            body = substitute(body, renaming)
            if isinstance(pattern, VarPattern):
                pattern = VarPattern(new_names[0])
            elif isinstance(pattern, BangPattern):
                pattern = BangPattern(new_names[0])
            else:
                pattern = TuplePattern(tuple(new_names))
        return Lambda(pattern, substitute(body, live))
    return _rebuild(term, [substitute(c, subst) for c in term.children()])


def substitute_one(term: Term, name: str, replacement: Term) -> Term:
    """Capture-avoiding substitution of a single classical variable."""
    return substitute(term, {name: replacement})


# ---------------------------------------------------------------------------
# alpha-equality and alpha-canonical form


def alpha_equal(a: Term, b: Term) -> bool:
    """Structural equality up to renaming of bound classical variables."""

    def go(a: Term, b: Term, env_a: dict[str, int], env_b: dict[str, int],
           depth: int) -> bool:
        if type(a) is not type(b):
            return False
        if isinstance(a, ClassicalVar):
            assert isinstance(b, ClassicalVar)
            if a.name in env_a or b.name in env_b:
                return env_a.get(a.name) == env_b.get(b.name)
            return a.name == b.name
        if isinstance(a, QuantumVar):
            return a.name == b.name  # type: ignore[union-attr]
        if isinstance(a, BoolConst):
            return a.value == b.value  # type: ignore[union-attr]
        if isinstance(a, UnitaryName):
            return a.name == b.name  # type: ignore[union-attr]
        if isinstance(a, Lambda):
            assert isinstance(b, Lambda)
            if type(a.pattern) is not type(b.pattern):
                return False
            names_a = a.pattern.bound_names()
            names_b = b.pattern.bound_names()
            if len(names_a) != len(names_b):
                return False
            ea = dict(env_a)
            eb = dict(env_b)
            d = depth
            for na, nb in zip(names_a, names_b):
                ea[na] = d
                eb[nb] = d
                d += 1
            return go(a.body, b.body, ea, eb, d)
        kids_a = a.children()
        kids_b = b.children()
        if len(kids_a) != len(kids_b):
            return False
        return all(go(ka, kb, env_a, env_b, depth)
                   for ka, kb in zip(kids_a, kids_b))

    return go(a, b, {}, {}, 0)


def alpha_canonical(term: Term) -> Term:
    """Rename bound classical variables to a canonical scheme.

    Binders are renamed to ``x0, x1, ...`` in pre-order binding order,
    skipping any name that occurs free in ``term``.  Alpha-equivalent
    terms map to the same result, and the result is a fixed point.
    """
    free = free_classical_vars(term)
    counter = [0]

    def next_name() -> str:
        while True:
            name = f"x{counter[0]}"
            counter[0] += 1
            if name not in free:
                return name

    def go(t: Term, env: dict[str, str]) -> Term:
        if isinstance(t, ClassicalVar):
            return ClassicalVar(env.get(t.name, t.name))
        if isinstance(t, Lambda):
            env2 = dict(env)
            fresh = [next_name() for _ in t.pattern.bound_names()]
            for old, new in zip(t.pattern.bound_names(), fresh):
                env2[old] = new
            if isinstance(t.pattern, VarPattern):
                pattern: Pattern = VarPattern(fresh[0])
            elif isinstance(t.pattern, BangPattern):
                pattern = BangPattern(fresh[0])
            else:
                pattern = TuplePattern(tuple(fresh))
            return Lambda(pattern, go(t.body, env2))
        return _rebuild(t, [go(c, env) for c in t.children()])

    return go(term, {})


# ---------------------------------------------------------------------------
# concrete syntax: printing


_KEYWORDS = frozenset({"new", "meas", "if", "then", "else"})


def _print_pattern(p: Pattern) -> str:
    if isinstance(p, VarPattern):
        return p.name
    if isinstance(p, BangPattern):
        return "!" + p.name
    assert isinstance(p, TuplePattern)
    return "<" + ", ".join(p.names) + ">"


def _print_atom(t: Term) -> str:
    if isinstance(t, ClassicalVar):
        return t.name
    if isinstance(t, QuantumVar):
        return "@" + t.name
    if isinstance(t, BoolConst):
        return str(t.value)
    if isinstance(t, UnitaryName):
        return t.name
    if isinstance(t, Bang):
        return "!" + _print_atom(t.body)
    if isinstance(t, New):
        return "new " + _print_atom(t.arg)
    if isinstance(t, Meas):
        return "meas " + _print_atom(t.arg)
    if isinstance(t, Tuple):
        return "<" + ", ".join(print_term(x) for x in t.items) + ">"
    return "(" + print_term(t) + ")"


def _print_app(t: Term) -> str:
    if isinstance(t, App):
        return _print_app(t.fun) + " " + _print_atom(t.arg)
    return _print_atom(t)


def print_term(t: Term) -> str:
    """Render a term to its canonical concrete syntax.

    ``parse_term(print_term(t))`` is alpha-equal to ``t`` (and equal on
    the nose for alpha-canonical terms).
    """
    if isinstance(t, Lambda):
        return "\\" + _print_pattern(t.pattern) + ". " + print_term(t.body)
    if isinstance(t, IfThenElse):
        return ("if " + print_term(t.cond) + " then " + print_term(t.then)
                + " else " + print_term(t.orelse))
    return _print_app(t)


# ---------------------------------------------------------------------------
# concrete syntax: parsing


class ParseError(Exception):
    """Raised on malformed input; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


_SIMPLE_TOKENS = {
    "\\": "LAMBDA",
    ".": "DOT",
    ",": "COMMA",
    "<": "LANGLE",
    ">": "RANGLE",
    "(": "LPAREN",
    ")": "RPAREN",
    "!": "BANG",
    "@": "AT",
}


def _tokenize(source: str) -> list[tuple[str, str, int, int]]:
    """Split source into (kind, text, line, column) tuples."""
    tokens = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch in _SIMPLE_TOKENS:
            tokens.append((_SIMPLE_TOKENS[ch], ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            if text not in ("0", "1"):
                raise ParseError(f"unexpected number {text!r}", line, col)
            tokens.append(("CONST", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_'"):
                j += 1
            text = source[i:j]
            if text in _KEYWORDS:
                kind = text.upper()
            elif text[0].isupper():
                kind = "GATE"
            else:
                kind = "IDENT"
            tokens.append((kind, text, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(("EOF", "", line, col))
    return tokens


_ATOM_START = frozenset({
    "IDENT", "GATE", "AT", "CONST", "BANG", "NEW", "MEAS", "IF",
    "LANGLE", "LPAREN",
})


class _Parser:
    def __init__(self, source: str) -> None:
        self.tokens = _tokenize(source)
        self.pos = 0
        # side table: id(node) -> (line, column) of the node's first token
        self.locations: dict[int, tuple[int, int]] = {}

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str, int, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> tuple[str, str, int, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"expected {what}, found {tok[1]!r}" if tok[1]
                             else f"expected {what}, found end of input",
                             tok[2], tok[3])
        return self.next()

    def located(self, term: Term, tok: tuple[str, str, int, int]) -> Term:
        self.locations[id(term)] = (tok[2], tok[3])
        return term

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok[0] == "LAMBDA":
            self.next()
            pattern = self.parse_pattern()
            self.expect("DOT", "'.'")
            body = self.parse_term()
            return self.located(Lambda(pattern, body), tok)
        return self.parse_app()

    def parse_pattern(self) -> Pattern:
        tok = self.peek()
        if tok[0] == "IDENT":
            self.next()
            return VarPattern(tok[1])
        if tok[0] == "BANG":
            self.next()
            name = self.expect("IDENT", "a variable")
            return BangPattern(name[1])
        if tok[0] == "LANGLE":
            self.next()
            names = [self.expect("IDENT", "a variable")[1]]
            while self.peek()[0] == "COMMA":
                self.next()
                names.append(self.expect("IDENT", "a variable")[1])
            self.expect("RANGLE", "'>'")
            if len(names) < 2:
                raise ParseError("tuple pattern needs at least two variables",
                                 tok[2], tok[3])
            if len(set(names)) != len(names):
                raise ParseError("tuple pattern variables must be distinct",
                                 tok[2], tok[3])
            return TuplePattern(tuple(names))
        raise ParseError(f"expected a pattern, found {tok[1]!r}",
                         tok[2], tok[3])

    def parse_app(self) -> Term:
        tok = self.peek()
        term = self.parse_atom()
        while self.peek()[0] in _ATOM_START:
            arg = self.parse_atom()
            term = self.located(App(term, arg), tok)
        return term

    def parse_atom(self) -> Term:
        tok = self.next()
        kind, text, line, col = tok
        if kind == "IDENT":
            return self.located(ClassicalVar(text), tok)
        if kind == "GATE":
            return self.located(UnitaryName(text), tok)
        if kind == "AT":
            name = self.peek()
            if name[0] not in ("IDENT", "GATE"):
                raise ParseError("expected a quantum variable name after '@'",
                                 name[2], name[3])
            self.next()
            return self.located(QuantumVar(name[1]), tok)
        if kind == "CONST":
            return self.located(BoolConst(int(text)), tok)
        if kind == "BANG":
            return self.located(Bang(self.parse_atom()), tok)
        if kind == "NEW":
            return self.located(New(self.parse_atom()), tok)
        if kind == "MEAS":
            return self.located(Meas(self.parse_atom()), tok)
        if kind == "IF":
            cond = self.parse_term()
            self.expect("THEN", "'then'")
            then = self.parse_term()
            self.expect("ELSE", "'else'")
            orelse = self.parse_term()
            return self.located(IfThenElse(cond, then, orelse), tok)
        if kind == "LANGLE":
            items = [self.parse_term()]
            while self.peek()[0] == "COMMA":
                self.next()
                items.append(self.parse_term())
            self.expect("RANGLE", "'>'")
            if len(items) < 2:
                raise ParseError("tuples need at least two components",
                                 line, col)
            return self.located(Tuple(tuple(items)), tok)
        if kind == "LPAREN":
            term = self.parse_term()
            self.expect("RPAREN", "')'")
            return term
        if kind == "EOF":
            raise ParseError("unexpected end of input", line, col)
        raise ParseError(f"unexpected {text!r}", line, col)


def parse_term(source: str) -> Term:
    """Parse a single term; raises :class:`ParseError` on bad input."""
    term, _ = parse_term_with_locations(source)
    return term


def parse_term_with_locations(
    source: str,
) -> tuple[Term, dict[int, tuple[int, int]]]:
    """Parse a term and return a side table mapping ``id(node)`` to the
    (line, column) of the node's first token, for error reporting."""
    parser = _Parser(source)
    tok = parser.peek()
    if tok[0] == "EOF":
        raise ParseError("empty input", tok[2], tok[3])
    term = parser.parse_term()
    trailing = parser.peek()
    if trailing[0] != "EOF":
        raise ParseError(f"unexpected {trailing[1]!r} after term",
                         trailing[2], trailing[3])
    return term, parser.locations


def parse_file(path: str) -> Term:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_term(handle.read())
