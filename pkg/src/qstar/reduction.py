r"""Configurations and the labelled small-step reduction relation.

A configuration is a triple of a quantum register, the set of quantum
variables it covers, and a term whose quantum variables all come from
that set.  Configurations are kept in canonical form: quantum variables
are renamed to ``r0, r1, ...`` in order of first left-to-right
occurrence in the term (register-only leftovers follow in lexicographic
order of their original names), and bound classical variables are
alpha-canonical.  Two configurations are equal when their terms and
variable sets coincide and their registers agree componentwise within
``REGISTER_TOLERANCE``; there is no quotient by global phase.

Reduction labels:

    l.beta   (\x. M) N          -> M{N/x}
    c.beta   (\!x. M) !N        -> M{N/x}
    q.beta   (\<xs>. M) <@rs>   -> M{rs/xs}    (simultaneous)
    if1/if0  if c then M else N -> M or N
    Uq       U @r / U <@rs>     -> argument, register hit by the gate
    new      new c              -> @r fresh, register extended
    meas     meas @r            -> !c with probability p_c, register
                                   projected and renormalized
    l.cm     L ((\p. M) N)      -> (\p. L M) N    (p a linear pattern)
    r.cm     ((\p. M) N) L      -> (\p. M L) N

``K`` is {l.cm, r.cm}; ``N`` is every non-measurement label outside K;
``nM`` is everything but measurement.  Reduction is a surface relation:
it descends into applications, tuples, new, meas, if conditions, and
under binders, but never into a Bang or an if branch.  Measurement
branches with probability zero are kept and carry the zero register.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import quantum
from .quantum import REGISTER_TOLERANCE, QuantumRegister, UnitaryGate
from .syntax import (
    App, Bang, BangPattern, BoolConst, ClassicalVar, IfThenElse, Lambda,
    Meas, New, QuantumVar, Term, Tuple, TuplePattern, UnitaryName,
    VarPattern, _rebuild, alpha_canonical, free_quantum_vars, print_term,
    quantum_vars_in_order, rename_quantum_vars, substitute, term_size,
)
from .wellform import Environment, WellFormError, check_wf


class ReductionError(Exception):
    pass


# ---------------------------------------------------------------------------
# labels


K_LABELS = frozenset({"l.cm", "r.cm"})
NM_LABELS = frozenset({"Uq", "new", "l.beta", "c.beta", "q.beta",
                       "l.cm", "r.cm", "if1", "if0"})
N_LABELS = NM_LABELS - K_LABELS


@dataclass(frozen=True)
class ReductionLabel:
    """The rule applied by a step; measurement carries its qubit and,
    once an outcome is fixed, which branch was taken."""

    kind: str
    qvar: Optional[str] = None
    outcome: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind == "meas":
            if self.qvar is None:
                raise ValueError("measurement labels need a qubit name")
        elif self.kind not in NM_LABELS:
            raise ValueError(f"unknown label kind {self.kind!r}")

    @property
    def is_measurement(self) -> bool:
        return self.kind == "meas"

    @property
    def in_K(self) -> bool:
        return self.kind in K_LABELS

    @property
    def in_N(self) -> bool:
        return self.kind in N_LABELS

    def __str__(self) -> str:
        if self.kind == "meas":
            tail = "" if self.outcome is None else f"={self.outcome}"
            return f"meas({self.qvar}){tail}"
        return self.kind


@dataclass(frozen=True)
class Redex:
    """A reducible position: the path of child indices from the root
    plus the label of the contraction that applies there."""

    position: tuple[int, ...]
    label: ReductionLabel


# ---------------------------------------------------------------------------
# configurations


class Configuration:
    """Canonical [register, quantum variables, term] triple.

    Build instances with :meth:`make` (which canonicalizes) or
    :func:`initial` for a closed term with the scalar register.
    """

    __slots__ = ("register", "term", "_text")

    def __init__(self, register: QuantumRegister, term: Term) -> None:
        self.register = register
        self.term = term
        self._text: Optional[str] = None

    @staticmethod
    def make(register: QuantumRegister, term: Term) -> "Configuration":
        """Canonicalize and validate a configuration."""
        in_term = quantum_vars_in_order(term)
        term_set = set(in_term)
        reg_set = set(register.qvars)
        if not term_set <= reg_set:
            missing = sorted(term_set - reg_set)
            raise ReductionError(
                f"term mentions quantum variables {missing} not in the "
                "register")
        leftover = sorted(reg_set - term_set)
        mapping = {old: f"r{i}" for i, old in enumerate(in_term + leftover)}
        register = register.rename(mapping)
        register.validate()
        term = alpha_canonical(rename_quantum_vars(term, mapping))
        return Configuration(register, term)

    @property
    def qvars(self) -> tuple[str, ...]:
        return self.register.qvars

    def text(self) -> str:
        if self._text is None:
            self._text = print_term(self.term)
        return self._text

    def describe(self, digits: int = 6) -> str:
        qv = "{" + ", ".join(self.qvars) + "}"
        return f"[{self.register.ket_text(digits)}, {qv}, {self.text()}]"

    def to_json(self) -> dict:
        data = self.register.to_json()
        data["term"] = self.text()
        return data

    @staticmethod
    def from_json(data: dict) -> "Configuration":
        from .syntax import parse_term
        register = QuantumRegister.from_json(data)
        return Configuration.make(register, parse_term(data["term"]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (self.term == other.term
                and self.register.approx_equal(other.register))

    def __hash__(self) -> int:
        return hash((self.term, self.qvars))

    def __repr__(self) -> str:
        return f"Configuration({self.describe()})"


def initial(term: Term) -> Configuration:
    """The configuration [1, {}, term] for a term without free quantum
    variables."""
    if free_quantum_vars(term):
        raise ReductionError("initial configurations need a term without "
                             "quantum variables")
    return Configuration.make(QuantumRegister.empty(), term)


def fresh_qvar(taken: tuple[str, ...]) -> str:
    """Smallest canonical name not already used."""
    used = set(taken)
    i = 0
    while f"r{i}" in used:
        i += 1
    return f"r{i}"


# ---------------------------------------------------------------------------
# redex enumeration


def _is_qvar_tuple(term: Term) -> bool:
    return (isinstance(term, Tuple)
            and all(isinstance(x, QuantumVar) for x in term.items))


def _is_commutable_redex(term: Term) -> bool:
    """Is ``term`` of the shape (\\p. M) N with p a linear pattern?"""
    return (isinstance(term, App) and isinstance(term.fun, Lambda)
            and isinstance(term.fun.pattern, (VarPattern, TuplePattern)))


@lru_cache(maxsize=65536)
def _term_redexes(term: Term, gate_arities: frozenset[tuple[str, int]],
                  ) -> tuple[Redex, ...]:
    arity = dict(gate_arities)
    out: list[Redex] = []

    def visit(t: Term, pos: tuple[int, ...]) -> None:
        # contractions at this position, most specific first:
        # beta before commutation, l.cm before r.cm
        if isinstance(t, App):
            fun, arg = t.fun, t.arg
            if isinstance(fun, Lambda):
                pat = fun.pattern
                if isinstance(pat, VarPattern):
                    out.append(Redex(pos, ReductionLabel("l.beta")))
                elif isinstance(pat, BangPattern) and isinstance(arg, Bang):
                    out.append(Redex(pos, ReductionLabel("c.beta")))
                elif (isinstance(pat, TuplePattern) and _is_qvar_tuple(arg)
                      and len(arg.items) == len(pat.names)):
                    out.append(Redex(pos, ReductionLabel("q.beta")))
            elif isinstance(fun, UnitaryName):
                want = arity.get(fun.name)
                if isinstance(arg, QuantumVar) and want == 1:
                    out.append(Redex(pos, ReductionLabel("Uq")))
                elif (_is_qvar_tuple(arg) and want == len(arg.items)):
                    out.append(Redex(pos, ReductionLabel("Uq")))
            if _is_commutable_redex(arg):
                out.append(Redex(pos, ReductionLabel("l.cm")))
            if _is_commutable_redex(fun):
                out.append(Redex(pos, ReductionLabel("r.cm")))
            visit(fun, pos + (0,))
            visit(arg, pos + (1,))
            return
        if isinstance(t, IfThenElse):
            if isinstance(t.cond, BoolConst):
                kind = "if1" if t.cond.value == 1 else "if0"
                out.append(Redex(pos, ReductionLabel(kind)))
            visit(t.cond, pos + (0,))  # branches stay frozen
            return
        if isinstance(t, New):
            if isinstance(t.arg, BoolConst):
                out.append(Redex(pos, ReductionLabel("new")))
            visit(t.arg, pos + (0,))
            return
        if isinstance(t, Meas):
            if isinstance(t.arg, QuantumVar):
                out.append(Redex(pos, ReductionLabel("meas", t.arg.name)))
            visit(t.arg, pos + (0,))
            return
        if isinstance(t, Tuple):
            for i, item in enumerate(t.items):
                visit(item, pos + (i,))
            return
        if isinstance(t, Lambda):
            visit(t.body, pos + (0,))
            return
        # variables, constants, gate names, and Bang are inert

    visit(term, ())
    return tuple(out)


def enumerate_redexes(config: Configuration,
                      gates: dict[str, UnitaryGate] | None = None,
                      ) -> tuple[Redex, ...]:
    """All redexes of a configuration in pre-order (root first).

    Measurement redexes appear once per position; the outcome is chosen
    at contraction time.
    """
    registry = quantum.gate_registry() if gates is None else gates
    arities = frozenset((g.name, g.arity) for g in registry.values())
    return _term_redexes(config.term, arities)


def is_normal_form(config: Configuration,
                   gates: dict[str, UnitaryGate] | None = None) -> bool:
    return not enumerate_redexes(config, gates)


# ---------------------------------------------------------------------------
# contraction


def subterm_at(term: Term, position: tuple[int, ...]) -> Term:
    for idx in position:
        term = term.children()[idx]
    return term


def replace_at(term: Term, position: tuple[int, ...],
               replacement: Term) -> Term:
    if not position:
        return replacement
    idx = position[0]
    kids = list(term.children())
    kids[idx] = replace_at(kids[idx], position[1:], replacement)
    return _rebuild(term, kids)


# Toggled by the harness and test suites: when a list, every contraction
# re-checks well-formedness of its results and appends a witness for any
# violation instead of failing silently.
SUBJECT_REDUCTION_LOG: Optional[list] = None


def _check_subject_reduction(source: Configuration, label: ReductionLabel,
                             result: Configuration,
                             gates: dict[str, UnitaryGate] | None) -> None:
    if SUBJECT_REDUCTION_LOG is None:
        return
    env = Environment(quantum=frozenset(result.qvars))
    try:
        check_wf(env, result.term, gates)
    except WellFormError as err:
        SUBJECT_REDUCTION_LOG.append((source, label, result, str(err)))
    qv_used = free_quantum_vars(result.term)
    if qv_used != set(result.qvars):
        SUBJECT_REDUCTION_LOG.append(
            (source, label, result,
             "register variables do not match the term"))


def contract(config: Configuration, redex: Redex,
             outcome: Optional[int] = None,
             gates: dict[str, UnitaryGate] | None = None,
             ) -> list[tuple[float, Configuration, ReductionLabel]]:
    """Perform one contraction.

    Returns a list of (probability, configuration, label) triples: a
    single entry with probability 1.0 for non-measurement steps, and one
    entry per outcome (0 first) for measurements unless ``outcome`` pins
    the branch.  Probability-0 measurement branches are retained with
    the zero register.
    """
    registry = quantum.gate_registry() if gates is None else gates
    term = config.term
    register = config.register
    sub = subterm_at(term, redex.position)
    kind = redex.label.kind

    def rebuild(new_sub: Term, new_register: QuantumRegister,
                label: ReductionLabel, probability: float = 1.0,
                ) -> tuple[float, Configuration, ReductionLabel]:
        new_term = replace_at(term, redex.position, new_sub)
        result = Configuration.make(new_register, new_term)
        _check_subject_reduction(config, label, result, gates)
        return (probability, result, label)

    if kind == "l.beta":
        assert isinstance(sub, App) and isinstance(sub.fun, Lambda)
        pat = sub.fun.pattern
        assert isinstance(pat, VarPattern)
        reduct = substitute(sub.fun.body, {pat.name: sub.arg})
        return [rebuild(reduct, register, redex.label)]

    if kind == "c.beta":
        assert (isinstance(sub, App) and isinstance(sub.fun, Lambda)
                and isinstance(sub.arg, Bang))
        pat = sub.fun.pattern
        assert isinstance(pat, BangPattern)
        reduct = substitute(sub.fun.body, {pat.name: sub.arg.body})
        return [rebuild(reduct, register, redex.label)]

    if kind == "q.beta":
        assert (isinstance(sub, App) and isinstance(sub.fun, Lambda)
                and isinstance(sub.arg, Tuple))
        pat = sub.fun.pattern
        assert isinstance(pat, TuplePattern)
        mapping = {x: item for x, item in zip(pat.names, sub.arg.items)}
        reduct = substitute(sub.fun.body, mapping)
        return [rebuild(reduct, register, redex.label)]

    if kind in ("if1", "if0"):
        assert isinstance(sub, IfThenElse)
        chosen = sub.then if kind == "if1" else sub.orelse
        return [rebuild(chosen, register, redex.label)]

    if kind == "Uq":
        assert isinstance(sub, App) and isinstance(sub.fun, UnitaryName)
        gate = registry.get(sub.fun.name)
        if gate is None:
            raise ReductionError(f"unknown gate {sub.fun.name}")
        if isinstance(sub.arg, QuantumVar):
            targets: tuple[str, ...] = (sub.arg.name,)
        else:
            assert isinstance(sub.arg, Tuple)
            targets = tuple(x.name for x in sub.arg.items)  # type: ignore[union-attr]
        new_register = register.apply_unitary(gate, targets)
        return [rebuild(sub.arg, new_register, redex.label)]

    if kind == "new":
        assert isinstance(sub, New) and isinstance(sub.arg, BoolConst)
        name = fresh_qvar(register.qvars)
        new_register = register.tensor_fresh(name, sub.arg.value)
        return [rebuild(QuantumVar(name), new_register, redex.label)]

    if kind == "l.cm":
        assert isinstance(sub, App) and isinstance(sub.arg, App)
        inner = sub.arg
        assert isinstance(inner.fun, Lambda)
        lam = inner.fun
        reduct = App(Lambda(lam.pattern, App(sub.fun, lam.body)), inner.arg)
        return [rebuild(reduct, register, redex.label)]

    if kind == "r.cm":
        assert isinstance(sub, App) and isinstance(sub.fun, App)
        inner = sub.fun
        assert isinstance(inner.fun, Lambda)
        lam = inner.fun
        reduct = App(Lambda(lam.pattern, App(lam.body, sub.arg)), inner.arg)
        return [rebuild(reduct, register, redex.label)]

    if kind == "meas":
        assert isinstance(sub, Meas) and isinstance(sub.arg, QuantumVar)
        qvar = sub.arg.name
        results = []
        outcomes = (0, 1) if outcome is None else (outcome,)
        for c in outcomes:
            p, post = register.normalized_measure(qvar, c)
            label = ReductionLabel("meas", qvar, c)
            results.append(rebuild(Bang(BoolConst(c)), post, label, p))
        return results

    raise ReductionError(f"cannot contract label {kind!r}")


def successors(config: Configuration,
               gates: dict[str, UnitaryGate] | None = None,
               ) -> list[tuple[float, Configuration, ReductionLabel]]:
    """All one-step reducts with probabilities, expanding both outcomes
    of each measurement redex."""
    out = []
    for redex in enumerate_redexes(config, gates):
        out.extend(contract(config, redex, gates=gates))
    return out


# ---------------------------------------------------------------------------
# size measures used by the commutation termination argument


def abstraction_size(term: Term) -> int:
    """Sum of the body sizes of all abstraction subterms.

    Commutation steps preserve :func:`~qstar.syntax.term_size` and
    strictly increase this measure, which stays below size squared, so
    K-only reduction terminates.
    """
    total = 0
    if isinstance(term, Lambda):
        total += term_size(term.body)
    for child in term.children():
        total += abstraction_size(child)
    return total
