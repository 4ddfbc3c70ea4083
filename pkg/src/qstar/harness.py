r"""Verification harness: corpora and metatheory checks.

The harness machine-checks the calculus's metatheory on finite corpora:

* quasi one-step diamond: any two distinct one-step reducts of a
  configuration rejoin in at most one further step, with label classes
  and probabilities constrained per clause;
* strategy independence: exhaustive computation trees built under
  different strategies assign the same probability and leaf count to
  every normal form;
* commutation termination: K-only reduction (the two commutation rules)
  terminates within size^2 steps, keeping the term size constant while
  the total abstraction body size strictly grows;
* measurement algebra: completeness of the two measurement projections
  and their commutations with tensoring, with unitaries on other
  qubits, and with one another.

Enumerated corpora are exhaustive over a deliberately small term
signature (documented at :func:`generate_corpus`): exhaustiveness over
a tractable fragment beats sampling over an intractable one.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import quantum, reduction
from .computation import (
    LEFTMOST, RIGHTMOST, Strategy, build_computation, delta,
    leaf_distribution, count_any, prob_any,
)
from .quantum import QuantumRegister, UnitaryGate, measurement_matrix, random_register
from .reduction import (
    Configuration, Redex, ReductionLabel, abstraction_size, contract,
    enumerate_redexes, initial,
)
from .syntax import (
    App, Bang, BangPattern, BoolConst, ClassicalVar, IfThenElse, Lambda,
    Meas, New, QuantumVar, Term, Tuple, TuplePattern, UnitaryName,
    VarPattern, alpha_canonical, parse_term, print_term, term_size,
)

JOIN_PROBABILITY_TOLERANCE = 1e-10
DISTRIBUTION_TOLERANCE = 1e-9

ENUMERATION_GATES = ("H", "X", "CNOT")
MAX_ENUMERATION_SIZE = 14
MAX_NEW_SITES = 3


# ---------------------------------------------------------------------------
# reference terms


def hadamard_coin_term() -> Term:
    """Prepare |0>, rotate by H, measure, and branch on the outcome."""
    return parse_term(r"(\!x. if x then 0 else 1) (meas (H (new 0)))")


def bounded_coin_term(rounds: int) -> Term:
    """Flip a fair coin up to ``rounds`` times; return 0 on the first 1,
    and 1 if every flip came up 0."""
    if rounds < 1:
        raise ValueError("need at least one round")
    term: Term = BoolConst(1)
    flip = parse_term(r"meas (H (new 0))")
    for _ in range(rounds):
        term = App(Lambda(BangPattern("x"),
                          IfThenElse(ClassicalVar("x"), BoolConst(0), term)),
                   flip)
    return term


def recursive_coin_term() -> Term:
    """The unbounded coin: flip until a 1 comes up, then return 0.

    Built from a self-application fixpoint, so its computation tree is
    infinite; observations converge to 1 at [1, {}, 0] geometrically.
    """
    src = r"""
    (\!w. (\!f. \!x. if x then 0 else f (meas (H (new 0)))) !(w !w))
    !(\!w. (\!f. \!x. if x then 0 else f (meas (H (new 0)))) !(w !w))
    (meas (H (new 0)))
    """
    return parse_term(src)


# ---------------------------------------------------------------------------
# corpus enumeration


@dataclass(frozen=True)
class Corpus:
    """A list of well-formed starting configurations plus provenance."""

    configurations: tuple[Configuration, ...]
    provenance: str

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configurations)


# The enumerated universe.  Exhaustive enumeration of *all* well-formed
# closed terms is hopeless: measured with a counting recurrence, the full
# grammar has ~1.4e10 terms of size <= 12, and even a junk-free fragment
# has ~7e7.  The corpus grammar below keeps every contraction rule and
# every redex-overlap class reachable while cutting terms that are stuck
# wherever they differ from a kept term:
#
# * terms carry sorts: B (boolean data), Q (qubit), P (qubit pair),
#   F (abstraction), V (variable), A (application or mixed conditional),
#   G (banged argument);
# * data positions (new/meas/gate arguments, pair items, conditions)
#   accept the matching sort or a bare variable -- a mismatched term is
#   stuck at that position forever, and reducible data arguments are
#   already covered by the sorted reducible forms (meas/gate chains,
#   conditionals);
# * gates appear applied, never as stand-alone values: H and X to Q/V
#   arguments, CNOT to P/V arguments;
# * tuples and tuple patterns are binary; items are Q/V (a tuple of
#   non-qubits is never consumed by any rule);
# * !M appears only as an application argument (elsewhere it is inert:
#   reduction never enters a Bang) and M is of sort B, Q, F, or V;
# * function arguments of sort F are omitted: passing an abstraction is
#   covered by the !M route, which reduction treats the same way;
# * roots are not abstractions: a root lambda is never applied, so its
#   body behavior is covered by the applied form ``(\p. M) N``;
# * per-term budgets: at most 2 abstractions, 1 conditional, 1 banged
#   binder in scope, and MAX_NEW_SITES qubit allocations.
#
# Within this grammar the enumeration is exhaustive up to the size
# bound, and every member is well-formed by construction (linear
# variables split exactly across applications and pairs; conditional
# branches use none).

_SORTS = "BQPFVA"


def _enumerate_terms(max_size: int,
                     gate_names: tuple[str, ...] = ENUMERATION_GATES,
                     max_lambdas: int = 2, max_ifs: int = 1,
                     max_news: int = MAX_NEW_SITES) -> Iterator[Term]:
    """Exhaustively enumerate the corpus grammar (see above) up to
    ``max_size`` AST nodes.  Yields each term exactly once; binder
    names are position-canonical, so no two yields are alpha-equal."""
    from .quantum import GATES
    unary_gates = tuple(g for g in gate_names if GATES[g].arity == 1)
    pair_gates = tuple(g for g in gate_names if GATES[g].arity == 2)
    memo: dict[tuple, list[Term]] = {}

    # gen(...) returns terms using EXACTLY the stated number of new
    # sites, lambdas, and ifs, so unions over budgets never duplicate.
    def gen(n: int, linear: tuple[int, ...], nb: int, news: int,
            lams: int, ifs: int, sort: str) -> list[Term]:
        if n <= 0 or news < 0 or lams < 0 or ifs < 0:
            return []
        key = (n, linear, nb, news, lams, ifs, sort)
        cached = memo.get(key)
        if cached is not None:
            return cached
        out: list[Term] = []
        zero = not (news or lams or ifs)

        if n == 1:
            if zero:
                if sort == "B" and not linear:
                    out.append(BoolConst(0))
                    out.append(BoolConst(1))
                elif sort == "V":
                    if len(linear) == 1:
                        out.append(ClassicalVar(f"l{linear[0]}"))
                    elif not linear and nb:
                        out.append(ClassicalVar("b0"))
            memo[key] = out
            return out
        rest = n - 1

        def pull(m: int, ctx: tuple[int, ...], w: int, la: int, fi: int,
                 sorts: str) -> Iterator[Term]:
            for s in sorts:
                yield from gen(m, ctx, nb, w, la, fi, s)

        if sort == "G":
            if not linear:
                out.extend(Bang(t)
                           for t in pull(rest, (), news, lams, ifs, "BQFV"))
        elif sort == "Q":
            out.extend(New(t)
                       for t in pull(rest, linear, news - 1, lams, ifs,
                                     "BV"))
            if n >= 3:
                for g in unary_gates:
                    out.extend(App(UnitaryName(g), t)
                               for t in pull(n - 2, linear, news, lams,
                                             ifs, "QV"))
        elif sort == "B":
            out.extend(Meas(t)
                       for t in pull(rest, linear, news, lams, ifs, "QV"))
        elif sort == "F":
            if lams >= 1:
                v = max(linear, default=-1) + 1
                for body in pull(rest, linear + (v,), news, lams - 1, ifs,
                                 _SORTS):
                    out.append(Lambda(VarPattern(f"l{v}"), body))
                for body in pull(rest, linear + (v, v + 1), news, lams - 1,
                                 ifs, _SORTS):
                    out.append(Lambda(TuplePattern((f"l{v}", f"l{v + 1}")),
                                      body))
                if nb == 0:
                    for s in _SORTS:
                        for body in gen(rest, linear, 1, news, lams - 1,
                                        ifs, s):
                            out.append(Lambda(BangPattern("b0"), body))
        if sort == "P" and n >= 3:
            for g in pair_gates:
                out.extend(App(UnitaryName(g), t)
                           for t in pull(n - 2, linear, news, lams, ifs,
                                         "PV"))

        # binary splits: pairs (sort P) and applications (sort A)
        if sort in "PA":
            fun_sorts, arg_sorts = (("QV", "QV") if sort == "P"
                                    else ("FVA", "BQPVAG"))
            build = (lambda a, b: Tuple((a, b))) if sort == "P" else App
            for n1 in range(1, rest):
                n2 = rest - n1
                for k in range(len(linear) + 1):
                    for left in itertools.combinations(linear, k):
                        right = tuple(x for x in linear if x not in left)
                        for w1, l1, f1 in itertools.product(
                                range(news + 1), range(lams + 1),
                                range(ifs + 1)):
                            for a in pull(n1, left, w1, l1, f1, fun_sorts):
                                for b in pull(n2, right, news - w1,
                                              lams - l1, ifs - f1,
                                              arg_sorts):
                                    out.append(build(a, b))

        # conditionals: branch sorts must be compatible
        if sort in "BQPFA" and n >= 4 and ifs >= 1:
            pairs = ([(sort, sort), (sort, "V"), ("V", sort)]
                     if sort != "A"
                     else [("A", "A"), ("A", "V"), ("V", "A"), ("V", "V")])
            for n1 in range(1, rest - 1):
                for n2 in range(1, rest - n1):
                    n3 = rest - n1 - n2
                    for w1, l1, f1 in itertools.product(
                            range(news + 1), range(lams + 1), range(ifs)):
                        for w2, l2, f2 in itertools.product(
                                range(news - w1 + 1), range(lams - l1 + 1),
                                range(ifs - f1)):
                            f3 = ifs - 1 - f1 - f2
                            for s1, s2 in pairs:
                                for c in pull(n1, linear, w1, l1, f1, "BV"):
                                    for t in gen(n2, (), nb, w2, l2, f2,
                                                 s1):
                                        for e in gen(n3, (), nb, news - w1
                                                     - w2, lams - l1 - l2,
                                                     f3, s2):
                                            out.append(IfThenElse(c, t, e))

        memo[key] = out
        return out

    for n in range(1, max_size + 1):
        for news, lams, ifs in itertools.product(
                range(max_news + 1), range(max_lambdas + 1),
                range(max_ifs + 1)):
            for sort in "BQPA":   # no abstraction roots
                yield from gen(n, (), 0, news, lams, ifs, sort)


def _count_new_sites(term: Term) -> int:
    total = 1 if isinstance(term, New) else 0
    return total + sum(_count_new_sites(c) for c in term.children())


def generate_corpus(mode: str, size_bound: int = 8, seed: int = 0,
                    gate_names: tuple[str, ...] = ENUMERATION_GATES,
                    ) -> Corpus:
    """Build a corpus of starting configurations.

    ``enumerated``: every closed well-formed term of the restricted
    signature with at most ``size_bound`` AST nodes and at most
    ``MAX_NEW_SITES`` qubit allocations, as [1, {}, term].

    ``paper_examples``: the Hadamard coin and a three-round bounded
    coin.

    ``random``: a seed-determined sample of the enumerated corpus at
    the given bound (useful for quick spot checks).
    """
    if mode == "paper_examples":
        configs = (initial(hadamard_coin_term()),
                   initial(bounded_coin_term(3)))
        return Corpus(configs, "paper_examples")
    if mode not in ("enumerated", "random"):
        raise ValueError(f"unknown corpus mode {mode!r}")
    if size_bound > MAX_ENUMERATION_SIZE:
        raise ValueError(
            f"size bound {size_bound} exceeds the enumeration maximum "
            f"{MAX_ENUMERATION_SIZE}")
    configs = [initial(t) for t in _enumerate_terms(size_bound, gate_names)]
    if mode == "random":
        rng = np.random.default_rng(seed)
        keep = min(len(configs), max(1, len(configs) // 10))
        index = rng.choice(len(configs), size=keep, replace=False)
        configs = [configs[i] for i in sorted(index)]
        return Corpus(tuple(configs), f"random(size<={size_bound}, "
                                      f"seed={seed})")
    return Corpus(tuple(configs), f"enumerated(size<={size_bound})")


def reachable_configurations(config: Configuration, depth: int,
                             gates: dict[str, UnitaryGate] | None = None,
                             limit: int = 200000,
                             ) -> list[Configuration]:
    """All configurations reachable within ``depth`` steps, including
    ``config``, de-duplicated up to configuration equality."""
    seen: dict[Configuration, None] = {config: None}
    frontier = [config]
    for _ in range(depth):
        if not frontier:
            break
        next_frontier = []
        for cfg in frontier:
            for _, successor, _ in reduction.successors(cfg, gates):
                if successor not in seen:
                    if len(seen) >= limit:
                        raise RuntimeError(
                            "reachable set exceeded the exploration limit")
                    seen[successor] = None
                    next_frontier.append(successor)
        frontier = next_frontier
    return list(seen)


# ---------------------------------------------------------------------------
# shared reduction graph

# A suite over a large corpus touches the same configurations over and
# over: as successors of many different roots, and once per strategy.
# ReductionGraph caches the contraction relation per distinct
# configuration and computes per-strategy tree statistics by memoized
# recursion over that graph.  The statistics agree with the literal
# computation tree because leftmost, rightmost, and hashed-random
# strategies all choose deterministically per configuration, so the
# subtree under a configuration is the same wherever it appears
# (scripted strategies are stateful and are rejected here).


class ReductionGraph:
    """Cached one-step reduction relation plus per-strategy analyses."""

    def __init__(self, gates: dict[str, UnitaryGate] | None = None,
                 depth_bound: int = 64) -> None:
        self.gates = gates
        self.depth_bound = depth_bound
        # config -> tuple, per redex, of
        #   (redex, ((prob, successor, label), ...))
        self._succ: dict[Configuration, tuple] = {}
        # (strategy kind, seed) -> config -> (dist | None, height | None)
        self._stats: dict[tuple, dict] = {}

    def successors(self, config: Configuration) -> tuple:
        cached = self._succ.get(config)
        if cached is None:
            cached = self._succ[config] = tuple(
                (redex, tuple(contract(config, redex, gates=self.gates)))
                for redex in enumerate_redexes(config, self.gates))
        return cached

    def is_normal_form(self, config: Configuration) -> bool:
        return not self.successors(config)

    def reachable(self, seeds, out: dict[Configuration, None]) -> None:
        """Add everything reachable from any seed within the depth bound
        to ``out`` (a dict used as an ordered set).  One breadth-first
        pass from all seeds at once: level d holds exactly the
        configurations whose distance from the nearest seed is d."""
        frontier: list[Configuration] = []
        for config in seeds:
            if config not in out:
                out[config] = None
                frontier.append(config)
        for _ in range(self.depth_bound):
            if not frontier:
                return
            fresh: list[Configuration] = []
            for cfg in frontier:
                for _, branches in self.successors(cfg):
                    for _, nxt, _ in branches:
                        if nxt not in out:
                            out[nxt] = None
                            fresh.append(nxt)
            frontier = fresh

    def _strategy_key(self, strategy: Strategy) -> tuple:
        if strategy.kind == "scripted":
            raise ValueError(
                "scripted strategies are stateful; analyze them with "
                "build_computation instead")
        return (strategy.kind, strategy.seed)

    def tree_stats(self, config: Configuration, strategy: Strategy,
                   ) -> tuple[Optional[dict], Optional[int]]:
        """Leaf statistics of the computation tree rooted at ``config``
        under ``strategy``: a map ``leaf -> (probability mass, leaf
        count)`` and the tree height, or ``(None, None)`` when the tree
        is not maximal within the depth bound (including divergence).

        Successful results and cycles are intrinsic to a configuration
        and are memoized across calls; running out of depth budget
        depends on where the configuration sits under this root, so
        those failures propagate without being memoized.
        """
        memo = self._stats.setdefault(self._strategy_key(strategy), {})
        choose = strategy.chooser()
        on_stack: set[Configuration] = set()

        def visit(cfg: Configuration, budget: int) -> tuple:
            hit = memo.get(cfg)
            if hit is not None:
                return hit
            succ = self.successors(cfg)
            if not succ:
                result = ({cfg: (1.0, 1)}, 0)
                memo[cfg] = result
                return result
            if cfg in on_stack:
                # the tree under cfg contains cfg again: divergent
                memo[cfg] = (None, None)
                return (None, None)
            if budget == 0:
                return (None, None)   # depth-relative: not memoized
            on_stack.add(cfg)
            try:
                redexes = enumerate_redexes(cfg, self.gates)
                redex, branches = succ[redexes.index(choose(cfg, redexes))]
                measured = redex.label.is_measurement
                dist: dict = {}
                height = 0
                for prob, child, _ in branches:
                    child_dist, child_height = visit(child, budget - 1)
                    if child_dist is None:
                        return (None, None)
                    height = max(height, child_height)
                    for leaf, (mass, count) in child_dist.items():
                        mass = mass * prob if measured else mass
                        old = dist.get(leaf, (0.0, 0))
                        dist[leaf] = (old[0] + mass, old[1] + count)
            finally:
                on_stack.discard(cfg)
            result = (dist, height + 1)
            memo[cfg] = result
            return result

        dist, height = visit(config, self.depth_bound)
        if height is not None and height > self.depth_bound:
            # assembled from memoized subtrees that fit their own
            # budgets but overflow this root's
            return (None, None)
        return (dist, height)


def summarize_stats(dist: dict) -> tuple[float, int]:
    """(prob_any, count_any) aggregates of a tree_stats distribution:
    probability mass weighted by the normalization indicator, and the
    raw leaf count."""
    prob = sum(mass * delta(leaf) for leaf, (mass, _) in dist.items())
    return (prob, sum(count for _, count in dist.values()))


# ---------------------------------------------------------------------------
# quasi one-step diamond


@dataclass(frozen=True)
class DiamondViolation:
    config: Configuration
    first: ReductionLabel
    second: ReductionLabel
    detail: str


def _label_class(label: ReductionLabel) -> str:
    if label.is_measurement:
        return "meas"
    return "K" if label.in_K else "N"


def _one_step(graph: ReductionGraph, config: Configuration, kinds: str,
              ) -> list[tuple[float, Configuration, ReductionLabel]]:
    """One-step reducts of ``config`` whose label class is in ``kinds``
    (a subset of {"K", "N", "meas"})."""
    out = []
    for _, branches in graph.successors(config):
        for prob, successor, label in branches:
            if _label_class(label) in kinds:
                out.append((prob, successor, label))
    return out


def _diamond_violations(graph: ReductionGraph, config: Configuration,
                        tol: float) -> list[DiamondViolation]:
    violations: list[DiamondViolation] = []
    steps = [(redex, prob, successor, label)
             for redex, branches in graph.successors(config)
             for prob, successor, label in branches]

    def joins(d: Configuration, d_kinds: str,
              e: Configuration, e_kinds: str) -> bool:
        d_next = {cfg for _, cfg, _ in _one_step(graph, d, d_kinds)}
        return any(cfg in d_next
                   for _, cfg, _ in _one_step(graph, e, e_kinds))

    for i, (rdx1, p1, d, lab1) in enumerate(steps):
        for j, (rdx2, p2, e, lab2) in enumerate(steps):
            if i == j or rdx1 == rdx2:
                continue  # same redex: two outcomes of one measurement
            c1, c2 = _label_class(lab1), _label_class(lab2)
            if c1 == "meas" and c2 != "meas":
                continue  # covered as the mirrored pair

            if c1 == "meas" and c2 == "meas":
                # distinct redexes measuring r (prob p1) and q (prob p2);
                # joined when D measures q, E measures r, the results
                # coincide, and the path probabilities agree
                if lab1.qvar == lab2.qvar:
                    ok = False
                    detail = "one qubit measured at two positions"
                else:
                    ok = False
                    detail = "no meas/meas join with p*t = s*u"
                    d_meas = [(t, cfg) for t, cfg, lab
                              in _one_step(graph, d, "meas")
                              if (lab.qvar, lab.outcome)
                              == (lab2.qvar, lab2.outcome)]
                    for u, cfg_e, lab_e in _one_step(graph, e, "meas"):
                        if (lab_e.qvar, lab_e.outcome) != (lab1.qvar,
                                                           lab1.outcome):
                            continue
                        if any(cfg_d == cfg_e
                               and abs(p1 * t - p2 * u) <= tol
                               for t, cfg_d in d_meas):
                            ok = True
                            break
            elif c2 == "meas":
                # E measured lab2.qvar with probability p2; D must admit
                # the same measurement at the same probability, joining
                # with one step of D's own class from E
                ok = False
                detail = f"no {c1}/meas join with matching probability"
                e_next = {cfg for _, cfg, _ in _one_step(graph, e, c1)}
                for prob, cfg, lab in _one_step(graph, d, "meas"):
                    if ((lab.qvar, lab.outcome) == (lab2.qvar, lab2.outcome)
                            and abs(prob - p2) <= tol and cfg in e_next):
                        ok = True
                        break
            elif c1 == "K" and c2 == "K":
                ok = d == e or joins(d, "K", e, "K")
                detail = "no one-step K/K join"
            elif c1 == "N" and c2 == "N":
                ok = d == e or joins(d, "N", e, "N")
                detail = "no one-step N/N join"
            else:
                # one K step and one N step; orient so k is the K-reduct
                k, m = (d, e) if c1 == "K" else (e, d)
                direct = any(cfg == m for _, cfg, _
                             in _one_step(graph, k, "N"))
                ok = direct or joins(k, "N", m, "K")
                detail = "no K/N join"

            if not ok:
                violations.append(DiamondViolation(config, lab1, lab2,
                                                   detail))
    return violations


def check_quasi_diamond(config: Configuration,
                        gates: dict[str, UnitaryGate] | None = None,
                        tol: float = JOIN_PROBABILITY_TOLERANCE,
                        ) -> list[DiamondViolation]:
    """Check every ordered pair of one-step reducts of ``config``.

    Writing D and E for the reducts of the first and second step and
    classifying labels as K (commutation), N (other non-measurement),
    or measurement:

    * K/K: D = E, or they rejoin by one K step each;
    * K/N: the K-reduct steps to the N-reduct by one N step, or they
      rejoin by an N step from the K-reduct and a K step from the other;
    * N/N: D = E, or they rejoin by one N step each;
    * K/meas and N/meas (E measured with probability s): D admits the
      same measurement with the same probability s, rejoining with one
      K (resp. N) step from E;
    * meas/meas on distinct qubits (probabilities p and s): D measures
      the second qubit with some probability t, E measures the first
      with probability u, p t = s u, and the results coincide.

    The two outcomes of one measurement redex do not rejoin and are not
    compared.  Returns all violations found (empty means the property
    holds at ``config``).
    """
    return _diamond_violations(ReductionGraph(gates), config, tol)


# ---------------------------------------------------------------------------
# strategy independence


@dataclass(frozen=True)
class ConfluenceReport:
    config: Configuration
    strategies: tuple[str, ...]
    maximal: bool
    max_tv_distance: float
    count_mismatches: int
    prob_any_spread: float
    count_any_values: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return (self.maximal
                and self.max_tv_distance <= DISTRIBUTION_TOLERANCE
                and self.count_mismatches == 0
                and self.prob_any_spread <= DISTRIBUTION_TOLERANCE)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "strategies": list(self.strategies),
            "maximal": self.maximal,
            "max_tv_distance": self.max_tv_distance,
            "count_mismatches": self.count_mismatches,
            "prob_any_spread": self.prob_any_spread,
            "count_any_values": list(self.count_any_values),
            "passed": self.passed,
        }


def default_strategies(seed: int = 0) -> tuple[Strategy, ...]:
    return (LEFTMOST, RIGHTMOST,
            Strategy("random", seed=seed),
            Strategy("random", seed=seed + 1),
            Strategy("random", seed=seed + 2))


def check_strong_confluence(config: Configuration,
                            strategies: tuple[Strategy, ...],
                            depth: int,
                            gates: dict[str, UnitaryGate] | None = None,
                            ) -> ConfluenceReport:
    """Compare exhaustive trees under each strategy.

    When some strategy fails to reach a maximal tree within ``depth``,
    the report is marked non-maximal and the comparison is advisory
    (the caller usually skips those configurations).
    """
    distributions = []
    prob_anys = []
    count_anys = []
    all_maximal = True
    for strategy in strategies:
        result = build_computation(config, strategy, depth, gates)
        all_maximal = all_maximal and result.maximal
        distributions.append(leaf_distribution(result.tree, gates))
        prob_anys.append(prob_any(result.tree, gates))
        count_anys.append(count_any(result.tree, gates))

    max_tv = 0.0
    mismatches = 0
    base = distributions[0]
    for other in distributions[1:]:
        keys = set(base) | set(other)
        tv = 0.5 * sum(abs(base.get(k, (0.0, 0))[0]
                           - other.get(k, (0.0, 0))[0]) for k in keys)
        max_tv = max(max_tv, tv)
        for k in keys:
            if base.get(k, (0.0, 0))[1] != other.get(k, (0.0, 0))[1]:
                mismatches += 1
    spread = max(prob_anys) - min(prob_anys)
    return ConfluenceReport(
        config, tuple(s.describe() for s in strategies), all_maximal,
        max_tv, mismatches, spread, tuple(count_anys))


# ---------------------------------------------------------------------------
# K-only termination


@dataclass(frozen=True)
class KTerminationReport:
    config: Configuration
    longest_sequence: int
    bound: int
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations and self.longest_sequence < self.bound


def check_K_termination(config: Configuration,
                        gates: dict[str, UnitaryGate] | None = None,
                        ) -> KTerminationReport:
    """Explore every K-only reduction sequence from ``config``.

    Asserts along every edge that the term size is constant and the
    abstraction size strictly increases, and that no sequence reaches
    size^2 steps.
    """
    size = term_size(config.term)
    bound = max(size * size, 1)
    violations: list[str] = []
    longest = 0
    # depth-first over the K-reduction DAG, memoizing longest suffix
    suffix: dict[Configuration, int] = {}

    def explore(cfg: Configuration, depth: int) -> int:
        nonlocal longest
        longest = max(longest, depth)
        if depth > bound:
            violations.append(
                f"K sequence exceeded {bound} steps at {cfg.describe()}")
            return 0
        if cfg in suffix:
            longest = max(longest, depth + suffix[cfg])
            return suffix[cfg]
        best = 0
        here_size = term_size(cfg.term)
        here_abs = abstraction_size(cfg.term)
        for redex in enumerate_redexes(cfg, gates):
            if not redex.label.in_K:
                continue
            (_, successor, _), = contract(cfg, redex, gates=gates)
            if term_size(successor.term) != here_size:
                violations.append(
                    f"term size changed on a K step at {cfg.describe()}")
            if abstraction_size(successor.term) <= here_abs:
                violations.append(
                    "abstraction size did not increase on a K step at "
                    f"{cfg.describe()}")
            if abstraction_size(successor.term) > here_size * here_size:
                violations.append(
                    "abstraction size exceeded size^2 at "
                    f"{successor.describe()}")
            best = max(best, 1 + explore(successor, depth + 1))
        suffix[cfg] = best
        return best

    explore(config, 0)
    return KTerminationReport(config, longest, bound, tuple(violations))


# ---------------------------------------------------------------------------
# measurement algebra


@dataclass(frozen=True)
class MeasurementAlgebraReport:
    registers_checked: int
    max_defect: float
    tolerance: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def check_measurement_algebra(count: int = 1000, seed: int = 0,
                              max_qubits: int = 4,
                              tol: float = JOIN_PROBABILITY_TOLERANCE,
                              ) -> MeasurementAlgebraReport:
    """Check the measurement identities on random registers.

    Identities, for a register Q, distinct qubits r != q, a one-qubit
    unitary U on a third wire, and outcomes c, d:

    1. completeness: M0*M0 + M1*M1 = Id (explicit matrices);
    2. raw and normalized measurement commute with tensoring a fresh
       qubit in a basis state;
    3. normalized measurements of distinct qubits commute;
    4. p(r,c) s(q,d) = p(q,d) s(r,c), where p are probabilities in Q
       and s the probabilities after the other measurement;
    5. unitaries on untouched qubits commute with measurement.
    """
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    max_defect = 0.0

    def note(defect: float, message: str) -> None:
        nonlocal max_defect
        max_defect = max(max_defect, defect)
        if defect > tol:
            failures.append(f"{message} (defect {defect:.3g})")

    for n in range(1, max_qubits + 1):
        defect = quantum.completeness_defect(n)
        note(defect, f"completeness fails at {n} qubits")

    checked = 0
    for _ in range(count):
        n = int(rng.integers(1, max_qubits + 1))
        qvars = tuple(f"q{i}" for i in range(n))
        reg = random_register(rng, qvars)
        checked += 1
        r = qvars[int(rng.integers(n))]
        c = int(rng.integers(2))

        # completeness as vectors: |M0 Q|^2 + |M1 Q|^2 = 1
        p0 = reg.raw_measure(r, 0).norm() ** 2
        p1 = reg.raw_measure(r, 1).norm() ** 2
        note(abs(p0 + p1 - 1.0), "outcome probabilities do not sum to 1")

        # tensor commutation, raw and normalized
        fresh = f"s{n}"
        d = int(rng.integers(2))
        extended = reg.tensor_fresh(fresh, d)
        lhs = extended.raw_measure(r, c)
        rhs = reg.raw_measure(r, c).tensor_fresh(fresh, d)
        note(float(np.max(np.abs(lhs.amplitudes - rhs.amplitudes))),
             "raw measurement does not commute with tensoring")
        pl, left = extended.normalized_measure(r, c)
        pr, right = reg.normalized_measure(r, c)
        note(abs(pl - pr), "tensoring changed an outcome probability")
        if pl > 0:
            note(float(np.max(np.abs(
                left.amplitudes - right.tensor_fresh(fresh, d).amplitudes))),
                "normalized measurement does not commute with tensoring")

        if n >= 2:
            q = next(x for x in qvars if x != r)
            e = int(rng.integers(2))
            # commutation of normalized measurements
            p_r, after_r = reg.normalized_measure(r, c)
            s_q, both_rq = after_r.normalized_measure(q, e)
            p_q, after_q = reg.normalized_measure(q, e)
            s_r, both_qr = after_q.normalized_measure(r, c)
            if p_r * s_q > tol and p_q * s_r > tol:
                note(float(np.max(np.abs(
                    both_rq.amplitudes - both_qr.amplitudes))),
                    "measurements of distinct qubits do not commute")
            # probability product identity
            note(abs(p_r * s_q - p_q * s_r),
                 "probability product identity fails")

        if n >= 2:
            # a unitary on a qubit other than r commutes with measuring r
            others = [x for x in qvars if x != r]
            target = others[int(rng.integers(len(others)))]
            gate = quantum.GATES["H" if rng.integers(2) else "T"]
            rotated = reg.apply_unitary(gate, (target,))
            p_a, a = rotated.normalized_measure(r, c)
            p_b, b = reg.normalized_measure(r, c)
            note(abs(p_a - p_b),
                 "a unitary on another qubit changed the probability")
            if p_a > 0:
                b_rot = b.apply_unitary(gate, (target,))
                note(float(np.max(np.abs(a.amplitudes - b_rot.amplitudes))),
                     "unitary and measurement on disjoint qubits "
                     "do not commute")

    return MeasurementAlgebraReport(checked, max_defect, tol,
                                    tuple(failures))


# ---------------------------------------------------------------------------
# suite driver


@dataclass
class SuiteResult:
    name: str
    checked: int
    failures: list[str] = field(default_factory=list)
    skipped: int = 0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"suite": self.name, "checked": self.checked,
                "failures": self.failures, "skipped": self.skipped,
                "seconds": round(self.seconds, 3), "passed": self.passed}


def run_diamond_suite(corpus: Corpus, depth: int = 64,
                      gates: dict[str, UnitaryGate] | None = None,
                      jobs: int = 1) -> SuiteResult:
    """Quasi-diamond check over every configuration reachable from the
    corpus within ``depth`` steps.

    Corpus roots start with empty registers, so measurement redexes --
    and with them the probability identity of the meas/meas clause --
    only occur on configurations strictly inside the reduction, which
    is why the whole reachable set is checked rather than the roots
    alone.
    """
    start = time.monotonic()
    graph = ReductionGraph(gates, depth)
    reach: dict[Configuration, None] = {}
    graph.reachable(corpus, reach)
    configs = list(reach)
    failures = []
    for violations in _map_maybe_parallel(
            lambda cfg: _diamond_violations(
                graph, cfg, JOIN_PROBABILITY_TOLERANCE),
            configs, jobs):
        for v in violations:
            failures.append(
                f"{v.config.describe()}: [{v.first}] vs [{v.second}]: "
                f"{v.detail}")
    return SuiteResult("diamond", len(configs), failures,
                       seconds=time.monotonic() - start)


def run_confluence_suite(corpus: Corpus, depth: int = 64, seed: int = 0,
                         gates: dict[str, UnitaryGate] | None = None,
                         jobs: int = 1) -> SuiteResult:
    """Strategy-independence over the corpus: leftmost, rightmost, and
    three seeded random strategies must assign every normal form the
    same probability and leaf count, and agree on the aggregate halting
    probability and leaf count.  Configurations that do not reach
    maximal trees within ``depth`` under all five strategies are
    counted as skipped."""
    start = time.monotonic()
    graph = ReductionGraph(gates, depth)
    strategies = default_strategies(seed)
    failures: list[str] = []
    skipped = 0
    checked = 0

    def analyze(config: Configuration) -> Optional[list[dict]]:
        per = []
        for strategy in strategies:
            dist, _ = graph.tree_stats(config, strategy)
            if dist is None:
                return None
            per.append(dist)
        return per

    for config, per in zip(corpus, _map_maybe_parallel(
            analyze, list(corpus), jobs)):
        if per is None:
            skipped += 1
            continue
        checked += 1
        base = per[0]
        base_prob_any, base_count_any = summarize_stats(base)
        max_tv = 0.0
        mismatches = 0
        spread = 0.0
        for other in per[1:]:
            keys = base.keys() | other.keys()
            tv = 0.5 * sum(
                abs(base.get(k, (0.0, 0))[0] - other.get(k, (0.0, 0))[0])
                * delta(k) for k in keys)
            max_tv = max(max_tv, tv)
            mismatches += sum(
                1 for k in keys
                if base.get(k, (0.0, 0))[1] != other.get(k, (0.0, 0))[1])
            prob_any_o, count_any_o = summarize_stats(other)
            spread = max(spread, abs(prob_any_o - base_prob_any))
            if count_any_o != base_count_any:
                mismatches += 1
        if (max_tv > DISTRIBUTION_TOLERANCE or mismatches
                or spread > DISTRIBUTION_TOLERANCE):
            failures.append(
                f"{config.describe()}: tv={max_tv:.3g}"
                f" count_mismatches={mismatches}"
                f" prob_any_spread={spread:.3g}")
    return SuiteResult("confluence", checked, failures, skipped,
                       time.monotonic() - start)


def run_ktermination_suite(corpus: Corpus,
                           gates: dict[str, UnitaryGate] | None = None,
                           jobs: int = 1) -> SuiteResult:
    """K-only normalization over the corpus.  The longest-suffix table
    is shared across roots, so every distinct configuration's K steps
    are checked exactly once."""
    start = time.monotonic()
    graph = ReductionGraph(gates)
    failures: list[str] = []
    suffix: dict[Configuration, int] = {}
    on_stack: set[Configuration] = set()

    def k_suffix(cfg: Configuration) -> int:
        hit = suffix.get(cfg)
        if hit is not None:
            return hit
        if cfg in on_stack:
            failures.append(f"K-only reduction cycles at {cfg.describe()}")
            return 0
        on_stack.add(cfg)
        here_size = term_size(cfg.term)
        here_abs = abstraction_size(cfg.term)
        best = 0
        for redex, branches in graph.successors(cfg):
            if not redex.label.in_K:
                continue
            (_, nxt, _), = branches
            if term_size(nxt.term) != here_size:
                failures.append(
                    f"term size changed on a K step at {cfg.describe()}")
            if abstraction_size(nxt.term) <= here_abs:
                failures.append(
                    "abstraction size did not increase on a K step at "
                    f"{cfg.describe()}")
            best = max(best, 1 + k_suffix(nxt))
        on_stack.discard(cfg)
        suffix[cfg] = best
        return best

    checked = 0
    for config in corpus:
        checked += 1
        size = term_size(config.term)
        longest = k_suffix(config)
        if longest >= max(size * size, 1):
            failures.append(
                f"{config.describe()}: a K-only sequence of length "
                f"{longest} reached the size^2 bound {size * size}")
    return SuiteResult("ktermination", checked, failures,
                       seconds=time.monotonic() - start)


def run_measurement_suite(count: int = 1000, seed: int = 0) -> SuiteResult:
    start = time.monotonic()
    report = check_measurement_algebra(count, seed)
    return SuiteResult("measurement-algebra", report.registers_checked,
                       list(report.failures),
                       seconds=time.monotonic() - start)


def _map_maybe_parallel(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
