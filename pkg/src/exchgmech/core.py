"""Domain types and welfare arithmetic for facility location games on a segment.

Agents sit at public positions on ``[0, d]`` and privately hold one of two
preference types: ``L`` (wants the facility close) or ``H`` (wants it far).
An :class:`Assignment` relocates agents onto a permutation of the original
location multiset; utilities are always evaluated on assigned locations.

Agent and location indices are 0-based throughout.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

#: Absolute tolerance used to classify welfare/utility ties.
EPS = 1e-9


class InstanceError(ValueError):
    """Raised for malformed instances, assignments or outcomes."""


class PreferenceType(enum.Enum):
    LIKE = "L"
    DISLIKE = "H"

    @classmethod
    def parse(cls, token: str) -> "PreferenceType":
        if token == "L":
            return cls.LIKE
        if token == "H":
            return cls.DISLIKE
        raise InstanceError(f"unknown preference token {token!r} (expected 'L' or 'H')")

    def flipped(self) -> "PreferenceType":
        return PreferenceType.DISLIKE if self is PreferenceType.LIKE else PreferenceType.LIKE

    def __str__(self) -> str:
        return self.value


L = PreferenceType.LIKE
H = PreferenceType.DISLIKE


def as_profile(types: Iterable[PreferenceType | str]) -> tuple[PreferenceType, ...]:
    """Coerce ``"LHL"``-style strings or token lists into a type tuple."""
    return tuple(t if isinstance(t, PreferenceType) else PreferenceType.parse(t) for t in types)


@dataclass(frozen=True)
class Instance:
    d: float
    positions: tuple[float, ...]
    types: tuple[PreferenceType, ...]

    def __post_init__(self):
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "positions", tuple(float(x) for x in self.positions))
        object.__setattr__(self, "types", as_profile(self.types))
        if not math.isfinite(self.d) or self.d <= 0:
            raise InstanceError(f"segment length must be positive, got {self.d}")
        if len(self.positions) == 0:
            raise InstanceError("instance needs at least one agent")
        if len(self.positions) != len(self.types):
            raise InstanceError(
                f"{len(self.positions)} positions but {len(self.types)} types"
            )
        for i, x in enumerate(self.positions):
            if not (0.0 <= x <= self.d):
                raise InstanceError(f"agent {i} position {x} outside [0, {self.d}]")

    @property
    def n(self) -> int:
        return len(self.positions)

    def with_types(self, types: Iterable[PreferenceType | str]) -> "Instance":
        return Instance(self.d, self.positions, as_profile(types))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "agents": [{"x": x, "type": t.value} for x, t in zip(self.positions, self.types)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        if not isinstance(data, dict):
            raise InstanceError("instance JSON must be an object")
        extra = set(data) - {"d", "agents"}
        if extra:
            raise InstanceError(f"unknown instance fields: {sorted(extra)}")
        if "d" not in data or "agents" not in data:
            raise InstanceError("instance JSON needs both 'd' and 'agents'")
        if not isinstance(data["agents"], list):
            raise InstanceError("'agents' must be a list")
        positions, types = [], []
        for k, agent in enumerate(data["agents"]):
            if not isinstance(agent, dict):
                raise InstanceError(f"agent {k} must be an object")
            extra = set(agent) - {"x", "type"}
            if extra:
                raise InstanceError(f"agent {k}: unknown fields {sorted(extra)}")
            if "x" not in agent or "type" not in agent:
                raise InstanceError(f"agent {k} needs both 'x' and 'type'")
            positions.append(_number(agent["x"], f"agent {k} x"))
            types.append(PreferenceType.parse(agent["type"]))
        return cls(_number(data["d"], "d"), tuple(positions), tuple(types))


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceError(f"{what} must be a number, got {value!r}")
    return float(value)


def parse_instance(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed instance JSON: {exc}") from exc
    return Instance.from_dict(data)


def render_instance(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), indent=2)


@dataclass(frozen=True)
class Assignment:
    """Agent ``i`` is relocated to original location ``perm[i]``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        if sorted(self.perm) != list(range(len(self.perm))):
            raise InstanceError(f"assignment {self.perm} is not a permutation")

    @classmethod
    def identity(cls, n: int) -> "Assignment":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.perm)

    def locations(self, inst: Instance) -> tuple[float, ...]:
        check_assignment(self, inst)
        return tuple(inst.positions[p] for p in self.perm)


def check_assignment(asg: Assignment, inst: Instance) -> None:
    if len(asg.perm) != inst.n:
        raise InstanceError(f"assignment has {len(asg.perm)} agents, instance has {inst.n}")


@dataclass(frozen=True)
class Outcome:
    facility: float
    assignment: Assignment

    def __post_init__(self):
        object.__setattr__(self, "facility", float(self.facility))
        if not math.isfinite(self.facility):
            raise InstanceError(f"facility {self.facility} is not finite")

    def check(self, inst: Instance) -> None:
        if not (0.0 <= self.facility <= inst.d):
            raise InstanceError(f"facility {self.facility} outside [0, {inst.d}]")
        check_assignment(self.assignment, inst)


@dataclass(frozen=True)
class Violation:
    agent: int
    report: PreferenceType
    truthful_utility: float
    deviating_utility: float
    # pipeline stage compared: "central", "post-ttc", "pre-exchange@y=0", ...
    scope: str = "post-ttc"

    @property
    def gain(self) -> float:
        return self.deviating_utility - self.truthful_utility

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "report": self.report.value,
            "truthful_utility": self.truthful_utility,
            "deviating_utility": self.deviating_utility,
            "gain": self.gain,
            "scope": self.scope,
        }


@dataclass(frozen=True)
class AuditReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def truthful(self) -> bool:
        return not self.violations

    @property
    def max_gain(self) -> float:
        return max((v.gain for v in self.violations), default=0.0)

    def to_dict(self) -> dict:
        return {
            "truthful": self.truthful,
            "max_gain": self.max_gain,
            "violations": [v.to_dict() for v in self.violations],
        }


def utility(y: float, loc: float, t: PreferenceType, d: float) -> float:
    """Utility of an agent of type ``t`` living at ``loc`` with the facility at ``y``."""
    if d <= 0:
        raise InstanceError(f"segment length must be positive, got {d}")
    if not (0.0 <= y <= d):
        raise InstanceError(f"facility {y} outside [0, {d}]")
    if not (0.0 <= loc <= d):
        raise InstanceError(f"location {loc} outside [0, {d}]")
    dist = abs(loc - y)
    return d - dist if t is PreferenceType.LIKE else dist


def agent_utilities(
    out: Outcome, inst: Instance, types: Sequence[PreferenceType] | None = None
) -> tuple[float, ...]:
    """Per-agent utilities at ``out``; ``types`` defaults to the true types."""
    out.check(inst)
    types = inst.types if types is None else types
    return tuple(
        utility(out.facility, inst.positions[p], t, inst.d)
        for p, t in zip(out.assignment.perm, types)
    )


def social_welfare(
    out: Outcome, inst: Instance, types: Sequence[PreferenceType] | None = None
) -> float:
    return math.fsum(agent_utilities(out, inst, types))


def endpoint_utility_sum(x: float, t: PreferenceType, d: float) -> float:
    """``u(0, x, t) + u(d, x, t)``; identically ``d`` on the segment."""
    return utility(0.0, x, t, d) + utility(d, x, t, d)
