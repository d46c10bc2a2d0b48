"""Facility location mechanisms with exchangeable allocations.

``central_opt`` places the facility and relocates agents (central exchanges);
the other mechanisms only place the facility and leave trading to the agents
(individual exchanges, simulated with TTC on true types).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import (
    EPS,
    Assignment,
    Instance,
    InstanceError,
    Outcome,
    PreferenceType,
    as_profile,
    check_assignment,
    social_welfare,
)
from .exchange import ExchangeTrace, ttc

log = logging.getLogger(__name__)


class MechanismKind(enum.Enum):
    CENTRAL_OPT = "central-opt"
    NAIVE_OPT_LOCATION = "naive-opt"
    OPT_LOCATION_THEN_TTC = "opt-ttc"
    RANDOM_ENDPOINTS = "random-endpoints"

    @classmethod
    def parse(cls, token: str) -> "MechanismKind":
        try:
            return cls(token)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown mechanism {token!r} (choose from {choices})") from None


@dataclass(frozen=True)
class RandomizedOutcome:
    support: tuple[tuple[Outcome, float], ...]

    def __post_init__(self):
        if any(p <= 0 for _, p in self.support):
            raise InstanceError("support probabilities must be positive")
        if abs(math.fsum(p for _, p in self.support) - 1.0) > EPS:
            raise InstanceError("support probabilities must sum to 1")

    def expected_welfare(self, inst: Instance) -> float:
        return math.fsum(p * social_welfare(out, inst) for out, p in self.support)


def _reported(inst: Instance, reported) -> tuple[PreferenceType, ...]:
    reported = inst.types if reported is None else as_profile(reported)
    if len(reported) != inst.n:
        raise InstanceError(f"{len(reported)} reports for {inst.n} agents")
    return reported


def location_permutation(
    inst: Instance,
    target: Assignment,
    reported: Sequence[PreferenceType],
    y: float,
) -> Assignment:
    """Rematch agents to the type-designated locations of ``target`` by distance to ``y``.

    Like agents closest to ``y`` (at their original positions) get the Like
    locations closest to ``y``; Dislike agents farthest from ``y`` get the
    Dislike locations farthest from ``y``.
    """
    check_assignment(target, inst)
    reported = _reported(inst, reported)
    x = inst.positions
    dist = [abs(p - y) for p in x]
    perm = [-1] * inst.n
    for t, sign in ((PreferenceType.LIKE, 1), (PreferenceType.DISLIKE, -1)):
        agents = [i for i in range(inst.n) if reported[i] is t]
        locs = [target.perm[i] for i in agents]
        agents.sort(key=lambda i: (sign * dist[i], i))
        locs.sort(key=lambda j: (sign * dist[j], x[j], j))
        for i, j in zip(agents, locs):
            perm[i] = j
    return Assignment(tuple(perm))


def candidate_facilities(inst: Instance) -> list[float]:
    """Agent positions plus both endpoints, deduplicated, ascending."""
    return sorted(set(inst.positions) | {0.0, inst.d})


def best_window(
    inst: Instance,
    reported: Sequence[PreferenceType],
    facilities: Iterable[float] | None = None,
) -> tuple[float, list[int], float]:
    """Welfare-maximal facility and consecutive block of Like locations.

    Only blocks of consecutive locations (in coordinate order) are scanned,
    and by default only the candidate facilities. Returns
    ``(y, like_locations, welfare)``; ties go to the smallest ``y``, then the
    leftmost block.
    """
    reported = _reported(inst, reported)
    order = sorted(range(inst.n), key=lambda j: (inst.positions[j], j))
    k = sum(t is PreferenceType.LIKE for t in reported)
    facilities = candidate_facilities(inst) if facilities is None else sorted(facilities)
    scored = []
    for y in facilities:
        far = [abs(inst.positions[j] - y) for j in order]
        # welfare = sum of all distances + sum over the Like block of (d - 2 dist)
        base = math.fsum(far)
        bonus = [inst.d - 2 * f for f in far]
        for s in range(inst.n - k + 1):
            scored.append((y, s, base + math.fsum(bonus[s : s + k])))
    top = max(value for _, _, value in scored)
    y, s, _ = next(c for c in scored if c[2] >= top - EPS)
    like_locs = order[s : s + k]
    welfare = _block_welfare(inst, y, like_locs)
    return y, like_locs, welfare


def _block_welfare(inst: Instance, y: float, like_locs) -> float:
    like = set(like_locs)
    return math.fsum(
        inst.d - abs(x - y) if j in like else abs(x - y) for j, x in enumerate(inst.positions)
    )


def central_opt(
    inst: Instance, reported=None, *, verify: bool = False, facility: float | None = None
) -> Outcome:
    """Welfare-optimal facility plus relocation under the reported types.

    ``facility`` pins the facility and only optimizes the relocation. With
    ``verify=True`` (and ``n`` small enough) the result is checked against
    exhaustive enumeration; on disagreement the exhaustive optimum is used
    and a warning is logged.
    """
    reported = _reported(inst, reported)
    if facility is not None:
        Outcome(facility, Assignment.identity(inst.n)).check(inst)
        verify = False
    y, like_locs, value = best_window(
        inst, reported, None if facility is None else [facility]
    )
    like_agents = [i for i, t in enumerate(reported) if t is PreferenceType.LIKE]
    other_locs = sorted(set(range(inst.n)) - set(like_locs))
    other_agents = [i for i, t in enumerate(reported) if t is not PreferenceType.LIKE]
    target = [0] * inst.n
    for i, j in zip(like_agents + other_agents, list(like_locs) + other_locs):
        target[i] = j
    out = Outcome(y, location_permutation(inst, Assignment(tuple(target)), reported, y))

    if verify:
        from .audit import MAX_BRUTE_FORCE_N, brute_force_opt

        if inst.n <= MAX_BRUTE_FORCE_N:
            oracle = brute_force_opt(inst, reported)
            oracle_value = social_welfare(oracle, inst, reported)
            if abs(oracle_value - value) > EPS:
                log.warning(
                    "central_opt window search (%r) disagrees with brute force (%r) on %r",
                    value,
                    oracle_value,
                    inst,
                )
                y = oracle.facility
                out = Outcome(y, location_permutation(inst, oracle.assignment, reported, y))
    return out


def naive_opt_location(inst: Instance, reported=None) -> float:
    """Facility maximizing welfare with agents kept at their own locations."""
    reported = _reported(inst, reported)
    identity = Assignment.identity(inst.n)
    scored = [
        (y, social_welfare(Outcome(y, identity), inst, reported)) for y in candidate_facilities(inst)
    ]
    top = max(value for _, value in scored)
    return next(y for y, value in scored if value >= top - EPS)


def opt_location_then_ttc(inst: Instance, reported=None) -> tuple[float, ExchangeTrace]:
    """Facility at the post-exchange optimum for the reports, then TTC on true types."""
    y, _, _ = best_window(inst, _reported(inst, reported))
    return y, ttc(inst, Assignment.identity(inst.n), y)


def naive_opt_then_ttc(inst: Instance, reported=None) -> tuple[float, ExchangeTrace]:
    y = naive_opt_location(inst, reported)
    return y, ttc(inst, Assignment.identity(inst.n), y)


def random_endpoints(inst: Instance, reported=None) -> RandomizedOutcome:
    """Facility at 0 or at d with probability one half each; reports are ignored."""
    _reported(inst, reported)
    identity = Assignment.identity(inst.n)
    return RandomizedOutcome(((Outcome(0.0, identity), 0.5), (Outcome(inst.d, identity), 0.5)))
