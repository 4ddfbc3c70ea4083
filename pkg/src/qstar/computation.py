"""Probabilistic computation trees and their quantitative measures.

A computation tree records one run policy applied to a configuration:
each node holds a configuration; a Unary node performed one
non-measurement step, and a Binary node performed a measurement and
branches on the outcome (0 on the left) with the two outcome
probabilities.  Leaves carry no step.  A tree is maximal when every
leaf is in normal form; depth-bounded construction can leave reducible
leaves, which the measures treat as contributing nothing.

The probability measure of reaching a normal form D weights each leaf
by its path probability and by delta(C) (0 for a zero register, else
1), so mass lost into impossible measurement branches is visible.  The
count measure counts matching leaves with no delta factor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

from .quantum import UnitaryGate
from .reduction import (
    Configuration, Redex, ReductionLabel, contract, enumerate_redexes,
)

PROBABILITY_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class Leaf:
    config: Configuration


@dataclass(frozen=True)
class Unary:
    """One non-measurement step from ``config`` to ``child``'s root."""

    config: Configuration
    label: ReductionLabel
    child: "ProbComputation"

    def __post_init__(self) -> None:
        if self.label.is_measurement:
            raise ValueError("Unary nodes cannot hold measurement steps")


@dataclass(frozen=True)
class Binary:
    """A measurement of ``qvar`` at ``config``: outcome 0 with
    probability ``p`` on the left, outcome 1 with probability ``q``."""

    config: Configuration
    p: float
    q: float
    qvar: str
    left: "ProbComputation"
    right: "ProbComputation"

    def __post_init__(self) -> None:
        for val in (self.p, self.q):
            if not -PROBABILITY_TOLERANCE <= val <= 1 + PROBABILITY_TOLERANCE:
                raise ValueError(f"branch probability {val} out of range")


ProbComputation = Union[Leaf, Unary, Binary]


def root(tree: ProbComputation) -> Configuration:
    return tree.config


def iter_nodes(tree: ProbComputation) -> Iterator[ProbComputation]:
    yield tree
    if isinstance(tree, Unary):
        yield from iter_nodes(tree.child)
    elif isinstance(tree, Binary):
        yield from iter_nodes(tree.left)
        yield from iter_nodes(tree.right)


def iter_leaves(tree: ProbComputation,
                ) -> Iterator[tuple[float, int, Leaf]]:
    """Leaves with their path probability and measurement count."""

    def walk(node: ProbComputation, prob: float,
             measurements: int) -> Iterator[tuple[float, int, Leaf]]:
        if isinstance(node, Leaf):
            yield prob, measurements, node
        elif isinstance(node, Unary):
            yield from walk(node.child, prob, measurements)
        else:
            yield from walk(node.left, prob * node.p, measurements + 1)
            yield from walk(node.right, prob * node.q, measurements + 1)

    return walk(tree, 1.0, 0)


def is_maximal(tree: ProbComputation,
               gates: dict[str, UnitaryGate] | None = None) -> bool:
    """Every leaf is in normal form."""
    return all(not enumerate_redexes(leaf.config, gates)
               for _, _, leaf in iter_leaves(tree))


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class Strategy:
    """A deterministic redex-selection policy.

    ``leftmost`` and ``rightmost`` pick the first and last redex in the
    pre-order enumeration.  ``random`` hashes the configuration text
    with the seed, so the same configuration always gets the same choice
    and runs are reproducible across processes.  ``scripted`` replays
    recorded redex indices in construction order and falls back to
    leftmost when exhausted.
    """

    kind: str = "leftmost"
    seed: int = 0
    script: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in ("leftmost", "rightmost", "random", "scripted"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    def chooser(self) -> Callable[[Configuration, tuple[Redex, ...]], Redex]:
        if self.kind == "leftmost":
            return lambda config, redexes: redexes[0]
        if self.kind == "rightmost":
            return lambda config, redexes: redexes[-1]
        if self.kind == "random":
            seed = self.seed

            def choose(config: Configuration,
                       redexes: tuple[Redex, ...]) -> Redex:
                digest = hashlib.sha256(
                    f"{seed}|{config.text()}|{len(redexes)}".encode()
                ).digest()
                return redexes[int.from_bytes(digest[:8], "big")
                               % len(redexes)]

            return choose
        script = iter(self.script)

        def scripted(config: Configuration,
                     redexes: tuple[Redex, ...]) -> Redex:
            idx = next(script, 0)
            if not 0 <= idx < len(redexes):
                raise ValueError(
                    f"scripted index {idx} out of range for "
                    f"{len(redexes)} redexes at {config.text()}")
            return redexes[idx]

        return scripted

    def describe(self) -> str:
        if self.kind == "random":
            return f"random(seed={self.seed})"
        if self.kind == "scripted":
            return f"scripted{list(self.script)}"
        return self.kind


LEFTMOST = Strategy("leftmost")
RIGHTMOST = Strategy("rightmost")


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class BuildResult:
    """A constructed tree plus the bound it was built under."""

    tree: ProbComputation
    depth_bound: int
    maximal: bool


def build_computation(config: Configuration, strategy: Strategy,
                      max_depth: int,
                      gates: dict[str, UnitaryGate] | None = None,
                      ) -> BuildResult:
    """Run ``strategy`` from ``config``, branching on every measurement,
    for at most ``max_depth`` steps along any path."""
    if max_depth < 0:
        raise ValueError("depth bound must be non-negative")
    choose = strategy.chooser()
    truncated = [False]

    def grow(cfg: Configuration, budget: int) -> ProbComputation:
        redexes = enumerate_redexes(cfg, gates)
        if not redexes:
            return Leaf(cfg)
        if budget == 0:
            truncated[0] = True
            return Leaf(cfg)
        redex = choose(cfg, redexes)
        branches = contract(cfg, redex, gates=gates)
        if redex.label.is_measurement:
            (p, left_cfg, _), (q, right_cfg, _) = branches
            return Binary(cfg, p, q, redex.label.qvar or "",
                          grow(left_cfg, budget - 1),
                          grow(right_cfg, budget - 1))
        (_, child_cfg, label), = branches
        return Unary(cfg, label, grow(child_cfg, budget - 1))

    tree = grow(config, max_depth)
    return BuildResult(tree, max_depth, not truncated[0])


# ---------------------------------------------------------------------------
# measures


def delta(config: Configuration) -> int:
    """0 for a zero register, 1 otherwise."""
    return 0 if config.register.is_zero() else 1


def _require_normal(config: Configuration,
                    gates: dict[str, UnitaryGate] | None) -> None:
    if enumerate_redexes(config, gates):
        raise ValueError(
            f"{config.describe()} is not in normal form")


def prob_of(tree: ProbComputation, config: Configuration,
            gates: dict[str, UnitaryGate] | None = None) -> float:
    """Probability that the run ends in the normal form ``config``.

    Leaves equal to ``config`` contribute their path probability times
    delta, so zero-register leaves never carry probability.
    """
    _require_normal(config, gates)
    total = 0.0
    for prob, _, leaf in iter_leaves(tree):
        if leaf.config == config:
            total += prob * delta(leaf.config)
    return total


def count_of(tree: ProbComputation, config: Configuration,
             gates: dict[str, UnitaryGate] | None = None) -> int:
    """Number of leaves equal to ``config``; zero-register leaves count."""
    _require_normal(config, gates)
    return sum(1 for _, _, leaf in iter_leaves(tree)
               if leaf.config == config)


def prob_any(tree: ProbComputation,
             gates: dict[str, UnitaryGate] | None = None) -> float:
    """Probability of ending in any normal form."""
    return sum(prob * delta(leaf.config)
               for prob, _, leaf in iter_leaves(tree)
               if not enumerate_redexes(leaf.config, gates))


def count_any(tree: ProbComputation,
              gates: dict[str, UnitaryGate] | None = None) -> int:
    """Number of normal-form leaves."""
    return sum(1 for _, _, leaf in iter_leaves(tree)
               if not enumerate_redexes(leaf.config, gates))


def leaf_distribution(tree: ProbComputation,
                      gates: dict[str, UnitaryGate] | None = None,
                      ) -> dict[Configuration, tuple[float, int]]:
    """Per-normal-form (probability, count) pairs over the leaves."""
    out: dict[Configuration, tuple[float, int]] = {}
    for prob, _, leaf in iter_leaves(tree):
        if enumerate_redexes(leaf.config, gates):
            continue
        old_p, old_n = out.get(leaf.config, (0.0, 0))
        out[leaf.config] = (old_p + prob * delta(leaf.config), old_n + 1)
    return out


# ---------------------------------------------------------------------------
# weight and branch degree


def branch_degree(tree: ProbComputation) -> int:
    """Number of leaves; always at least 1."""
    if isinstance(tree, Leaf):
        return 1
    if isinstance(tree, Unary):
        return branch_degree(tree.child)
    return branch_degree(tree.left) + branch_degree(tree.right)


def weight(tree: ProbComputation) -> int:
    """Total measure charged by non-commutation steps.

    A commutation step is free; any other unary step or a measurement
    costs the branch degree below it.  Grafting a non-commutation step
    above a tree p therefore increases the weight by branch_degree(p).
    """
    if isinstance(tree, Leaf):
        return 0
    if isinstance(tree, Unary):
        below = weight(tree.child)
        if tree.label.in_K:
            return below
        return branch_degree(tree.child) + below
    bd = branch_degree(tree.left) + branch_degree(tree.right)
    return bd + weight(tree.left) + weight(tree.right)


# ---------------------------------------------------------------------------
# the prefix order on computations


def is_subcomputation(small: ProbComputation, big: ProbComputation,
                      tol: float = PROBABILITY_TOLERANCE) -> bool:
    """Prefix order: ``small`` is ``big`` truncated at some nodes.

    A leaf is below any tree with the same root configuration; inner
    nodes must match shape, configuration, and (for measurements) both
    branch probabilities, with children related recursively.
    """
    if isinstance(small, Leaf):
        return small.config == root(big)
    if isinstance(small, Unary):
        return (isinstance(big, Unary) and small.config == big.config
                and is_subcomputation(small.child, big.child, tol))
    if isinstance(small, Binary):
        return (isinstance(big, Binary) and small.config == big.config
                and abs(small.p - big.p) <= tol
                and abs(small.q - big.q) <= tol
                and is_subcomputation(small.left, big.left, tol)
                and is_subcomputation(small.right, big.right, tol))
    return False


# ---------------------------------------------------------------------------
# serialization


def tree_to_json(tree: ProbComputation) -> dict:
    if isinstance(tree, Leaf):
        return {"kind": "leaf", "config": tree.config.to_json()}
    if isinstance(tree, Unary):
        return {"kind": "unary", "config": tree.config.to_json(),
                "label": str(tree.label),
                "child": tree_to_json(tree.child)}
    return {"kind": "binary", "config": tree.config.to_json(),
            "qvar": tree.qvar, "p": tree.p, "q": tree.q,
            "left": tree_to_json(tree.left),
            "right": tree_to_json(tree.right)}


def tree_trace(tree: ProbComputation, digits: int = 6) -> str:
    """Indented one-node-per-line rendering of a tree."""
    lines: list[str] = []

    def walk(node: ProbComputation, indent: int, prefix: str) -> None:
        pad = "  " * indent
        lines.append(f"{pad}{prefix}{node.config.describe(digits)}")
        if isinstance(node, Unary):
            walk(node.child, indent + 1, f"{node.label} -> ")
        elif isinstance(node, Binary):
            walk(node.left, indent + 1,
                 f"meas({node.qvar})=0 p={node.p:.{digits}g} -> ")
            walk(node.right, indent + 1,
                 f"meas({node.qvar})=1 p={node.q:.{digits}g} -> ")

    walk(tree, 0, "")
    return "\n".join(lines)
