"""Mixed states: probability distributions over configurations.

A mixed state is a finitely supported map from configurations to
probabilities in (0, 1] summing to 1.  One mixed step advances every
entry simultaneously: normal-form entries persist, any other entry is
contracted at the redex chosen by the strategy, a measurement splitting
its mass between the two outcomes.  Entries that land on the same
canonical configuration merge by adding probabilities; branches with
probability exactly zero disappear from the support.  Tiny positive
probabilities are never pruned; :meth:`MixedState.negligible_entries`
reports them instead.

The observation of a normal form can only grow along a mixed run, so
its limit is a supremum; :func:`limit_observe` reports the monotone
sequence at a schedule of step counts.
"""

from __future__ import annotations

from typing import Iterator, Optional

from .computation import Strategy
from .quantum import UnitaryGate
from .reduction import Configuration, contract, enumerate_redexes

DISTRIBUTION_TOLERANCE = 1e-9


class MixedStateError(Exception):
    pass


class MixedState:
    """An immutable-by-convention distribution over configurations."""

    __slots__ = ("_entries",)

    def __init__(self, entries: dict[Configuration, float],
                 validate: bool = True) -> None:
        self._entries = {cfg: float(p) for cfg, p in entries.items()
                         if p != 0.0}
        if validate:
            self.validate()

    @staticmethod
    def point(config: Configuration) -> "MixedState":
        """The Dirac distribution on one configuration."""
        return MixedState({config: 1.0})

    @staticmethod
    def from_pairs(pairs: list[tuple[float, Configuration]],
                   validate: bool = True) -> "MixedState":
        merged: dict[Configuration, float] = {}
        for p, cfg in pairs:
            if p == 0.0:
                continue
            merged[cfg] = merged.get(cfg, 0.0) + p
        return MixedState(merged, validate)

    def validate(self) -> None:
        for cfg, p in self._entries.items():
            if not 0.0 < p <= 1.0 + DISTRIBUTION_TOLERANCE:
                raise MixedStateError(
                    f"probability {p} out of (0, 1] at {cfg.describe()}")
        total = sum(self._entries.values())
        if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
            raise MixedStateError(
                f"probabilities sum to {total:.12g}, expected 1")

    def probability(self, config: Configuration) -> float:
        return self._entries.get(config, 0.0)

    def support(self) -> list[Configuration]:
        return sorted(self._entries,
                      key=lambda cfg: (cfg.text(), cfg.qvars))

    def items(self) -> Iterator[tuple[Configuration, float]]:
        for cfg in self.support():
            yield cfg, self._entries[cfg]

    def __len__(self) -> int:
        return len(self._entries)

    def total(self) -> float:
        return sum(self._entries.values())

    def negligible_entries(self, threshold: float = 1e-12,
                           ) -> list[tuple[Configuration, float]]:
        """Support entries whose probability is below ``threshold``."""
        return [(cfg, p) for cfg, p in self.items() if p < threshold]

    def approx_equal(self, other: "MixedState",
                     tol: float = DISTRIBUTION_TOLERANCE) -> bool:
        keys = set(self._entries) | set(other._entries)
        return all(abs(self.probability(k) - other.probability(k)) <= tol
                   for k in keys)

    def is_all_normal(self,
                      gates: dict[str, UnitaryGate] | None = None) -> bool:
        return all(not enumerate_redexes(cfg, gates)
                   for cfg in self._entries)

    def to_json(self) -> list[dict]:
        out = []
        for cfg, p in self.items():
            data = cfg.to_json()
            data["probability"] = p
            out.append(data)
        return out

    def describe(self, digits: int = 6) -> str:
        parts = [f"{p:.{digits}g}: {cfg.describe(digits)}"
                 for cfg, p in self.items()]
        return "{" + ", ".join(parts) + "}"

    def __repr__(self) -> str:
        return f"MixedState({self.describe()})"


def mixed_step(state: MixedState, strategy: Strategy,
               gates: dict[str, UnitaryGate] | None = None) -> MixedState:
    """Advance every non-normal entry by one step and merge."""
    choose = strategy.chooser()
    pairs: list[tuple[float, Configuration]] = []
    for cfg, p in state.items():
        redexes = enumerate_redexes(cfg, gates)
        if not redexes:
            pairs.append((p, cfg))
            continue
        redex = choose(cfg, redexes)
        for branch_p, successor, _ in contract(cfg, redex, gates=gates):
            pairs.append((p * branch_p, successor))
    result = MixedState.from_pairs(pairs, validate=False)
    try:
        result.validate()
    except MixedStateError as err:
        raise MixedStateError(
            f"mass not conserved by mixed step: {err}") from err
    return result


def run_mixed(state: MixedState, strategy: Strategy, steps: int,
              gates: dict[str, UnitaryGate] | None = None,
              ) -> list[MixedState]:
    """The trajectory [state, step(state), ..., step^steps(state)]."""
    if steps < 0:
        raise ValueError("step count must be non-negative")
    trajectory = [state]
    for _ in range(steps):
        state = mixed_step(state, strategy, gates)
        trajectory.append(state)
    return trajectory


def observe(state: MixedState, config: Configuration,
            gates: dict[str, UnitaryGate] | None = None) -> float:
    """Mass at a normal form; rejects reducible observables."""
    if enumerate_redexes(config, gates):
        raise ValueError(f"{config.describe()} is not in normal form")
    return state.probability(config)


def limit_observe(state: MixedState, strategy: Strategy,
                  config: Configuration, schedule: list[int],
                  gates: dict[str, UnitaryGate] | None = None,
                  ) -> list[float]:
    """Observations of ``config`` at the given step counts.

    The schedule must be strictly increasing; because mass at a normal
    form never decreases, the result is monotone and its last increment
    bounds the distance to the supremum reached so far.
    """
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    if any(s < 0 for s in schedule):
        raise ValueError("schedule entries must be non-negative")
    if enumerate_redexes(config, gates):
        raise ValueError(f"{config.describe()} is not in normal form")
    values = []
    step = 0
    for target in schedule:
        while step < target:
            state = mixed_step(state, strategy, gates)
            step += 1
        values.append(state.probability(config))
    return values
