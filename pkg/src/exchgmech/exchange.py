"""Exchange phases: Top Trading Cycle and pairwise mutually-beneficial swaps.

Both procedures always run on the agents' true types. Locations are the
tradeable goods; an agent "owns" whatever location the start assignment
gives it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import EPS, Assignment, Instance, Outcome, check_assignment, social_welfare, utility


@dataclass(frozen=True)
class TradeStep:
    cycle: tuple[int, ...]
    welfare_after: float

    def to_dict(self) -> dict:
        return {"cycle": list(self.cycle), "welfare_after": self.welfare_after}


@dataclass(frozen=True)
class ExchangeTrace:
    initial_welfare: float
    steps: tuple[TradeStep, ...]
    final_assignment: Assignment

    @property
    def final_welfare(self) -> float:
        return self.steps[-1].welfare_after if self.steps else self.initial_welfare

    def welfare_sequence(self) -> list[float]:
        return [self.initial_welfare] + [s.welfare_after for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "initial_welfare": self.initial_welfare,
            "steps": [s.to_dict() for s in self.steps],
            "final_assignment": list(self.final_assignment.perm),
        }


def _welfare(inst: Instance, perm: list[int], y: float) -> float:
    return social_welfare(Outcome(y, Assignment(tuple(perm))), inst)


def _favourite(inst: Instance, agent: int, held: int, available: list[int], y: float) -> int:
    """Most preferred location among ``available`` for ``agent`` currently holding ``held``.

    Ties within EPS go to the held location, then the smaller coordinate,
    then the smaller location index. Gains are compared in difference form,
    the same way :func:`beneficial_swap_exists` does.
    """
    t = inst.types[agent]
    utils = {loc: utility(y, inst.positions[loc], t, inst.d) for loc in available}
    best = max(utils.values())
    if best - utils[held] <= EPS:
        return held
    tied = [
        loc
        for loc in available
        if best - utils[loc] <= EPS and utils[loc] - utils[held] > EPS
    ]
    return min(tied, key=lambda loc: (inst.positions[loc], loc))


def _canonical(cycle: list[int]) -> tuple[int, ...]:
    k = cycle.index(min(cycle))
    return tuple(cycle[k:] + cycle[:k])


def ttc(inst: Instance, start: Assignment, y: float) -> ExchangeTrace:
    """Run Top Trading Cycle from ``start`` with the facility fixed at ``y``."""
    check_assignment(start, inst)
    perm = list(start.perm)
    initial = _welfare(inst, perm, y)
    owner = {loc: agent for agent, loc in enumerate(perm)}
    remaining = set(range(inst.n))
    steps: list[TradeStep] = []

    while remaining:
        available = sorted(perm[a] for a in remaining)
        points_to = {
            a: owner[_favourite(inst, a, perm[a], available, y)] for a in sorted(remaining)
        }
        cycles = []
        seen: set[int] = set()
        for a in sorted(remaining):
            path, cur = [], a
            while cur not in seen and cur not in path:
                path.append(cur)
                cur = points_to[cur]
            if cur in path:
                cycles.append(_canonical(path[path.index(cur):]))
            seen.update(path)
        # a functional graph on a finite set always has a cycle
        assert cycles
        for cycle in sorted(cycles):
            if len(cycle) > 1:
                new = {a: perm[points_to[a]] for a in cycle}
                for a, loc in new.items():
                    perm[a] = loc
                    owner[loc] = a
                steps.append(TradeStep(cycle, _welfare(inst, perm, y)))
            remaining.difference_update(cycle)

    return ExchangeTrace(initial, tuple(steps), Assignment(tuple(perm)))


def _swap_gains(inst: Instance, perm, i: int, j: int, y: float) -> tuple[float, float]:
    xi, xj = inst.positions[perm[i]], inst.positions[perm[j]]
    ti, tj = inst.types[i], inst.types[j]
    gain_i = utility(y, xj, ti, inst.d) - utility(y, xi, ti, inst.d)
    gain_j = utility(y, xi, tj, inst.d) - utility(y, xj, tj, inst.d)
    return gain_i, gain_j


def beneficial_swap_exists(inst: Instance, asg: Assignment, y: float) -> tuple[int, int] | None:
    """First pair ``(i, j)``, ``i < j``, that both strictly gain by swapping locations."""
    check_assignment(asg, inst)
    for i in range(inst.n):
        for j in range(i + 1, inst.n):
            gi, gj = _swap_gains(inst, asg.perm, i, j, y)
            if gi > EPS and gj > EPS:
                return i, j
    return None


def swap_dynamics(inst: Instance, start: Assignment, y: float) -> ExchangeTrace:
    """Execute first-found beneficial swaps until none remains."""
    check_assignment(start, inst)
    perm = list(start.perm)
    initial = _welfare(inst, perm, y)
    steps: list[TradeStep] = []
    while (pair := beneficial_swap_exists(inst, Assignment(tuple(perm)), y)) is not None:
        i, j = pair
        perm[i], perm[j] = perm[j], perm[i]
        steps.append(TradeStep((i, j), _welfare(inst, perm, y)))
    return ExchangeTrace(initial, tuple(steps), Assignment(tuple(perm)))
