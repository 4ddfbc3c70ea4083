r"""Linearity checking: environments, derivations, and the checker.

An environment splits into three disjoint name sets: linear classical
variables (must be used exactly once), quantum variables (likewise),
and banged classical variables (usable any number of times, including
zero).  A term is well-formed under an environment when a derivation
exists in the following rule system, written with ``!D`` for the banged
part and ``L`` for linear resources:

    const:  !D |- c            for constants and known gate names
    qvar:   !D, r |- @r
    cvar:   !D, x |- x         x linear
    der:    !D, !x |- x        x banged
    prom:   !D |- M            ==>  !D |- !M
    new:    G |- M             ==>  G |- new M
    meas:   G |- M             ==>  G |- meas M
    app:    L1,!D |- M  and  L2,!D |- N, L1 and L2 disjoint
                               ==>  L1,L2,!D |- M N
    tens:   Li,!D |- Mi, pairwise disjoint
                               ==>  L1..Lk,!D |- <M1, ..., Mk>
    lam1:   G, x1..xn |- M     ==>  G |- \<x1, ..., xn>. M
    lam2:   G, x |- M          ==>  G |- \x. M
    lam3:   G, !x |- M         ==>  G |- \!x. M
    if:     L,!D |- N  and  !D |- M1  and  !D |- M2
                               ==>  L,!D |- if N then M1 else M2

The banged part of the environment propagates to every premise; linear
resources split exactly.  Because each linear resource must reach the
unique leaf that uses it, the split is determined by the free-variable
sets of the subterms, which is what the checker computes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import quantum
from .syntax import (
    App, Bang, BangPattern, BoolConst, ClassicalVar, IfThenElse, Lambda,
    Meas, New, QuantumVar, Term, Tuple, TuplePattern, UnitaryName,
    VarPattern, free_classical_vars, free_quantum_vars, print_term,
)


class WellFormError(Exception):
    """A linearity or scoping violation; carries the offending subterm."""

    def __init__(self, message: str, subterm: Term | None = None) -> None:
        super().__init__(message)
        self.subterm = subterm


@dataclass(frozen=True)
class Environment:
    """Typing environment with disjoint linear/quantum/banged name sets."""

    linear: frozenset[str] = frozenset()
    quantum: frozenset[str] = frozenset()
    banged: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.linear & self.banged:
            raise ValueError("a classical variable cannot be both linear "
                             "and banged")
        object.__setattr__(self, "linear", frozenset(self.linear))
        object.__setattr__(self, "quantum", frozenset(self.quantum))
        object.__setattr__(self, "banged", frozenset(self.banged))

    def is_exponential(self) -> bool:
        """True when the environment holds no linear resources."""
        return not self.linear and not self.quantum

    def describe(self) -> str:
        parts = ([f"!{x}" for x in sorted(self.banged)]
                 + sorted(self.linear)
                 + [f"@{r}" for r in sorted(self.quantum)])
        return ", ".join(parts) if parts else "-"


@dataclass(frozen=True)
class Derivation:
    """A derivation tree; the conclusion is ``env |- term``."""

    rule: str
    env: Environment
    term: Term
    premises: tuple["Derivation", ...] = field(default=())

    def pretty(self, indent: int = 0) -> str:
        lines = [" " * indent
                 + f"{self.rule}: {self.env.describe()} |- {print_term(self.term)}"]
        for premise in self.premises:
            lines.append(premise.pretty(indent + 2))
        return "\n".join(lines)


def _linear_usage(term: Term, banged: frozenset[str],
                  ) -> tuple[frozenset[str], frozenset[str]]:
    """Free linear classical variables and quantum variables of a term."""
    return free_classical_vars(term) - banged, free_quantum_vars(term)


def check_wf(env: Environment, term: Term,
             gates: dict[str, quantum.UnitaryGate] | None = None,
             ) -> Derivation:
    """Check ``env |- term`` and return the derivation.

    Raises :class:`WellFormError` when no rule applies: a linear or
    quantum variable is duplicated, dropped, banged, or placed in an
    if branch, or a gate name is unknown.
    """
    registry = quantum.gate_registry() if gates is None else gates

    def derive(linear: frozenset[str], qvars: frozenset[str],
               banged: frozenset[str], t: Term) -> Derivation:
        env_here = Environment(linear, qvars, banged)

        if isinstance(t, (BoolConst, UnitaryName)):
            if isinstance(t, UnitaryName) and t.name not in registry:
                raise WellFormError(f"unknown gate name {t.name}", t)
            if linear or qvars:
                raise WellFormError(
                    f"unused linear resources {sorted(linear | qvars)} at "
                    f"constant {print_term(t)}", t)
            return Derivation("const", env_here, t)

        if isinstance(t, QuantumVar):
            if qvars != {t.name} or linear:
                raise WellFormError(
                    f"quantum variable @{t.name} does not match its "
                    f"resources", t)
            return Derivation("qvar", env_here, t)

        if isinstance(t, ClassicalVar):
            if t.name in banged:
                if linear or qvars:
                    raise WellFormError(
                        f"unused linear resources {sorted(linear | qvars)} "
                        f"at variable {t.name}", t)
                return Derivation("der", env_here, t)
            if linear == {t.name} and not qvars:
                return Derivation("cvar", env_here, t)
            if t.name not in linear:
                raise WellFormError(f"unbound variable {t.name}", t)
            raise WellFormError(
                f"unused linear resources "
                f"{sorted((linear - {t.name}) | qvars)} at variable "
                f"{t.name}", t)

        if isinstance(t, Bang):
            if linear or qvars:
                raise WellFormError(
                    "linear resources "
                    f"{sorted(linear | qvars)} cannot appear under '!'", t)
            premise = derive(frozenset(), frozenset(), banged, t.body)
            return Derivation("prom", env_here, t, (premise,))

        if isinstance(t, New):
            premise = derive(linear, qvars, banged, t.arg)
            return Derivation("new", env_here, t, (premise,))

        if isinstance(t, Meas):
            premise = derive(linear, qvars, banged, t.arg)
            return Derivation("meas", env_here, t, (premise,))

        if isinstance(t, (App, Tuple)):
            parts = list(t.children())
            usages = [_linear_usage(part, banged) for part in parts]
            for i in range(len(parts)):
                for j in range(i + 1, len(parts)):
                    clash = ((usages[i][0] & usages[j][0])
                             | (usages[i][1] & usages[j][1]))
                    if clash:
                        raise WellFormError(
                            f"linear resources {sorted(clash)} used more "
                            f"than once in {print_term(t)}", t)
            used_c = frozenset().union(*(u[0] for u in usages))
            used_q = frozenset().union(*(u[1] for u in usages))
            if used_c != linear or used_q != qvars:
                missing = sorted((linear - used_c) | (qvars - used_q))
                extra = sorted((used_c - linear) | (used_q - qvars))
                if extra:
                    raise WellFormError(
                        f"unbound variables {extra} in {print_term(t)}", t)
                raise WellFormError(
                    f"unused linear resources {missing} at "
                    f"{print_term(t)}", t)
            premises = tuple(
                derive(u[0], u[1], banged, part)
                for part, u in zip(parts, usages))
            rule = "app" if isinstance(t, App) else "tens"
            return Derivation(rule, env_here, t, premises)

        if isinstance(t, IfThenElse):
            for branch in (t.then, t.orelse):
                uc, uq = _linear_usage(branch, banged)
                if uc or uq:
                    raise WellFormError(
                        f"linear resources {sorted(uc | uq)} inside an if "
                        f"branch of {print_term(t)}", t)
            cond = derive(linear, qvars, banged, t.cond)
            exp = frozenset()
            then = derive(exp, exp, banged, t.then)
            orelse = derive(exp, exp, banged, t.orelse)
            return Derivation("if", env_here, t, (cond, then, orelse))

        if isinstance(t, Lambda):
            bound = set(t.pattern.bound_names())
            shadow = bound & (linear | banged | qvars)
            if shadow:
                raise WellFormError(
                    f"pattern rebinds names {sorted(shadow)} already in the "
                    f"environment (rename the binder)", t)
            if isinstance(t.pattern, BangPattern):
                premise = derive(linear, qvars,
                                 banged | {t.pattern.name}, t.body)
                return Derivation("lam3", env_here, t, (premise,))
            if isinstance(t.pattern, VarPattern):
                premise = derive(linear | {t.pattern.name}, qvars,
                                 banged, t.body)
                return Derivation("lam2", env_here, t, (premise,))
            assert isinstance(t.pattern, TuplePattern)
            premise = derive(linear | bound, qvars, banged, t.body)
            return Derivation("lam1", env_here, t, (premise,))

        raise WellFormError(f"unrecognized term {t!r}", t)

    return derive(env.linear, env.quantum, env.banged, term)


def is_well_formed(env: Environment, term: Term,
                   gates: dict[str, quantum.UnitaryGate] | None = None,
                   ) -> bool:
    try:
        check_wf(env, term, gates)
        return True
    except WellFormError:
        return False


def is_wf_configuration_term(
        term: Term,
        gates: dict[str, quantum.UnitaryGate] | None = None) -> bool:
    """True when ``term`` is well-formed under exactly its own quantum
    variables and no classical ones (the shape configurations need)."""
    env = Environment(quantum=free_quantum_vars(term))
    return is_well_formed(env, term, gates)


# ---------------------------------------------------------------------------
# independent derivation replay


def validate_derivation(deriv: Derivation,
                        gates: dict[str, quantum.UnitaryGate] | None = None,
                        ) -> None:
    """Re-check a derivation node by node against the rule schemas.

    This validator shares no logic with :func:`check_wf`: it only looks
    at each node's rule name, environments, and term shape.  Raises
    :class:`WellFormError` on the first node that does not instantiate
    its rule.
    """
    registry = quantum.gate_registry() if gates is None else gates

    def bad(msg: str, node: Derivation) -> WellFormError:
        return WellFormError(
            f"derivation node {node.rule} at {print_term(node.term)}: {msg}",
            node.term)

    def check(node: Derivation) -> None:
        env, t = node.env, node.term
        rule = node.rule
        n_premises = len(node.premises)

        if rule == "const":
            if not isinstance(t, (BoolConst, UnitaryName)) or n_premises:
                raise bad("malformed const node", node)
            if isinstance(t, UnitaryName) and t.name not in registry:
                raise bad(f"unknown gate {t.name}", node)
            if not env.is_exponential():
                raise bad("const requires an exponential environment", node)
        elif rule == "qvar":
            if (not isinstance(t, QuantumVar) or n_premises
                    or env.quantum != {t.name} or env.linear):
                raise bad("malformed qvar node", node)
        elif rule == "cvar":
            if (not isinstance(t, ClassicalVar) or n_premises
                    or env.linear != {t.name} or env.quantum):
                raise bad("malformed cvar node", node)
        elif rule == "der":
            if (not isinstance(t, ClassicalVar) or n_premises
                    or t.name not in env.banged
                    or not env.is_exponential()):
                raise bad("malformed der node", node)
        elif rule == "prom":
            if (not isinstance(t, Bang) or n_premises != 1
                    or not env.is_exponential()):
                raise bad("malformed prom node", node)
            premise = node.premises[0]
            if premise.term != t.body or premise.env != env:
                raise bad("prom premise mismatch", node)
        elif rule in ("new", "meas"):
            want = New if rule == "new" else Meas
            if not isinstance(t, want) or n_premises != 1:
                raise bad(f"malformed {rule} node", node)
            premise = node.premises[0]
            if premise.term != t.arg or premise.env != env:
                raise bad(f"{rule} premise mismatch", node)
        elif rule in ("app", "tens"):
            want = App if rule == "app" else Tuple
            if not isinstance(t, want):
                raise bad(f"malformed {rule} node", node)
            parts = t.children()
            if n_premises != len(parts):
                raise bad("premise count mismatch", node)
            lin: set[str] = set()
            qvs: set[str] = set()
            for premise, part in zip(node.premises, parts):
                if premise.term != part:
                    raise bad("premise term mismatch", node)
                if premise.env.banged != env.banged:
                    raise bad("banged context must propagate", node)
                if premise.env.linear & lin or premise.env.quantum & qvs:
                    raise bad("premise environments overlap", node)
                lin |= premise.env.linear
                qvs |= premise.env.quantum
            if frozenset(lin) != env.linear or frozenset(qvs) != env.quantum:
                raise bad("premise environments do not partition the "
                          "conclusion", node)
        elif rule == "if":
            if not isinstance(t, IfThenElse) or n_premises != 3:
                raise bad("malformed if node", node)
            cond, then, orelse = node.premises
            if (cond.term, then.term, orelse.term) != (t.cond, t.then,
                                                       t.orelse):
                raise bad("premise term mismatch", node)
            if cond.env != env:
                raise bad("condition premise must carry the whole "
                          "environment", node)
            branch_env = Environment(banged=env.banged)
            if then.env != branch_env or orelse.env != branch_env:
                raise bad("branch premises must be exponential", node)
        elif rule in ("lam1", "lam2", "lam3"):
            if not isinstance(t, Lambda) or n_premises != 1:
                raise bad(f"malformed {rule} node", node)
            pattern = t.pattern
            shape_ok = (
                (rule == "lam1" and isinstance(pattern, TuplePattern))
                or (rule == "lam2" and isinstance(pattern, VarPattern))
                or (rule == "lam3" and isinstance(pattern, BangPattern)))
            if not shape_ok:
                raise bad("rule does not match the binder shape", node)
            premise = node.premises[0]
            if premise.term != t.body:
                raise bad("premise term mismatch", node)
            bound = frozenset(pattern.bound_names())
            if bound & (env.linear | env.banged | env.quantum):
                raise bad("binder shadows the environment", node)
            if rule == "lam3":
                want = Environment(env.linear, env.quantum,
                                   env.banged | bound)
            else:
                want = Environment(env.linear | bound, env.quantum,
                                   env.banged)
            if premise.env != want:
                raise bad("premise environment mismatch", node)
        else:
            raise bad(f"unknown rule {rule!r}", node)

        for premise in node.premises:
            check(premise)

    check(deriv)
