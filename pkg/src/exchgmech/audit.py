"""Verification engines: exhaustive optimum, truthfulness auditing, ratio estimation.

Campaign helpers run many seeded trials; trial ``k`` always draws from
``numpy.random.default_rng([seed, k])`` so serial and pooled runs agree.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .core import (
    EPS,
    Assignment,
    AuditReport,
    Instance,
    InstanceError,
    Outcome,
    PreferenceType,
    Violation,
    as_profile,
    social_welfare,
    utility,
)
from .exchange import beneficial_swap_exists, swap_dynamics, ttc
from .mechanisms import (
    MechanismKind,
    candidate_facilities,
    central_opt,
    naive_opt_location,
    opt_location_then_ttc,
    random_endpoints,
)

MAX_BRUTE_FORCE_N = 8
WORKERS_ENV = "EXCHG_MECH_WORKERS"


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def brute_force_opt(inst: Instance, reported=None) -> Outcome:
    """Welfare-maximal outcome over every permutation and candidate facility.

    Ties go to the smallest facility, then the first permutation in
    lexicographic order.
    """
    if inst.n > MAX_BRUTE_FORCE_N:
        raise InstanceError(
            f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got n = {inst.n}"
        )
    types = inst.types if reported is None else as_profile(reported)
    x = np.array(inst.positions)
    perms = _permutations(inst.n)
    like = np.array([t is PreferenceType.LIKE for t in types])
    scored = []
    for y in candidate_facilities(inst):
        dist = np.abs(x - y)
        # utils[p, i] = utility of agent i placed at location perms[p, i]
        utils = np.where(like, inst.d - dist[perms], dist[perms])
        scored.append((y, utils.sum(axis=1)))
    top = max(welfare.max() for _, welfare in scored)
    for y, welfare in scored:
        hits = np.flatnonzero(welfare >= top - EPS)
        if hits.size:
            return Outcome(y, Assignment(tuple(perms[hits[0]])))
    raise AssertionError("unreachable: the maximum is always attained")


# --- mechanism pipelines ----------------------------------------------------

# scope label -> [(probability, outcome)], all evaluated with true types
Pipeline = dict[str, list[tuple[float, Outcome]]]


def _after_ttc(inst: Instance, out: Outcome) -> Outcome:
    return Outcome(out.facility, ttc(inst, out.assignment, out.facility).final_assignment)


def run_pipeline(kind: MechanismKind, inst: Instance, reported=None) -> Pipeline:
    """Outcomes of mechanism plus exchange phase, keyed by what gets compared.

    Reports only feed the mechanism; every exchange runs on ``inst.types``.
    """
    reported = inst.types if reported is None else as_profile(reported)
    identity = Assignment.identity(inst.n)
    if kind is MechanismKind.CENTRAL_OPT:
        out = central_opt(inst, reported)
        return {"central": [(1.0, out)], "post-ttc": [(1.0, _after_ttc(inst, out))]}
    if kind is MechanismKind.NAIVE_OPT_LOCATION:
        y = naive_opt_location(inst, reported)
        return {"post-ttc": [(1.0, _after_ttc(inst, Outcome(y, identity)))]}
    if kind is MechanismKind.OPT_LOCATION_THEN_TTC:
        y, trace = opt_location_then_ttc(inst, reported)
        return {"post-ttc": [(1.0, Outcome(y, trace.final_assignment))]}
    if kind is MechanismKind.RANDOM_ENDPOINTS:
        pipe: Pipeline = {"pre-exchange": [], "post-ttc": []}
        for out, p in random_endpoints(inst, reported).support:
            post = _after_ttc(inst, out)
            pipe["pre-exchange"].append((p, out))
            pipe["post-ttc"].append((p, post))
            pipe[f"pre-exchange@y={out.facility:g}"] = [(1.0, out)]
            pipe[f"post-ttc@y={out.facility:g}"] = [(1.0, post)]
        return pipe
    raise ValueError(kind)


def final_scope(kind: MechanismKind) -> str:
    return "central" if kind is MechanismKind.CENTRAL_OPT else "post-ttc"


def _expected_utility(inst: Instance, dist: list[tuple[float, Outcome]], agent: int) -> float:
    t = inst.types[agent]
    return math.fsum(
        p * utility(out.facility, inst.positions[out.assignment.perm[agent]], t, inst.d)
        for p, out in dist
    )


def expected_welfare(inst: Instance, dist: list[tuple[float, Outcome]]) -> float:
    return math.fsum(p * social_welfare(out, inst) for p, out in dist)


def audit_truthfulness(kind: MechanismKind, inst: Instance) -> AuditReport:
    """Try the single alternative report for every agent and record any strict gain."""
    truthful = run_pipeline(kind, inst)
    violations = []
    for i in range(inst.n):
        lie = inst.types[i].flipped()
        reported = inst.types[:i] + (lie,) + inst.types[i + 1 :]
        deviated = run_pipeline(kind, inst, reported)
        for scope, dist in truthful.items():
            honest = _expected_utility(inst, dist, i)
            cheat = _expected_utility(inst, deviated[scope], i)
            if cheat > honest + EPS:
                violations.append(Violation(i, lie, honest, cheat, scope))
    return AuditReport(tuple(violations))


# --- random instances -------------------------------------------------------


def random_instance(
    rng: np.random.Generator, n: int, d: float = 8.0, grid: float | None = None
) -> Instance:
    """Positions uniform on ``[0, d]`` (or on multiples of ``grid``), types fair coins."""
    if grid:
        steps = int(math.floor(d / grid))
        xs = rng.integers(0, steps + 1, size=n) * grid
    else:
        xs = rng.uniform(0.0, d, size=n)
    likes = rng.integers(0, 2, size=n)
    types = [PreferenceType.LIKE if b else PreferenceType.DISLIKE for b in likes]
    return Instance(d, tuple(float(v) for v in xs), tuple(types))


@dataclass(frozen=True)
class GeneratorConfig:
    n_min: int = 1
    n_max: int = 7
    d: float = 8.0
    seed: int = 0
    grid: float | None = None

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if not self.d > 0:
            raise ValueError(f"segment length must be positive, got {self.d}")

    def instance(self, trial: int) -> Instance:
        rng = np.random.default_rng([self.seed, trial])
        n = int(rng.integers(self.n_min, self.n_max + 1))
        return random_instance(rng, n, self.d, self.grid)

    def to_dict(self) -> dict:
        return {
            "generator": "uniform positions, fair-coin types",
            "n_min": self.n_min,
            "n_max": self.n_max,
            "d": self.d,
            "seed": self.seed,
            "grid": self.grid,
        }


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def parallel_map(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """Order-preserving map over a bounded process pool (serial when one worker)."""
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# --- ratio estimation -------------------------------------------------------


@dataclass(frozen=True)
class RatioEstimate:
    worst_ratio: float
    worst_instance: Instance
    trials: int

    def to_dict(self) -> dict:
        return {
            "worst_ratio": self.worst_ratio,
            "worst_instance": self.worst_instance.to_dict(),
            "trials": self.trials,
        }


def achieved_welfare(kind: MechanismKind, inst: Instance) -> float:
    """Expected welfare after the mechanism's exchange phase, under true reports."""
    return expected_welfare(inst, run_pipeline(kind, inst)[final_scope(kind)])


def optimal_welfare(inst: Instance, verify: bool = True) -> float:
    return social_welfare(central_opt(inst, verify=verify and inst.n <= MAX_BRUTE_FORCE_N), inst)


def instance_ratio(kind: MechanismKind, inst: Instance, verify: bool = True) -> float:
    achieved = achieved_welfare(kind, inst)
    opt = optimal_welfare(inst, verify)
    return opt / achieved if achieved > 0 else math.inf


def _ratio_trial(job) -> tuple[float, Instance]:
    kind, config, trial, verify = job
    inst = config.instance(trial)
    return instance_ratio(kind, inst, verify), inst


def estimate_ratio(
    kind: MechanismKind,
    trials: int,
    n_range: tuple[int, int] = (1, 8),
    seed: int = 0,
    *,
    d: float = 8.0,
    grid: float | None = None,
    verify: bool = True,
    workers: int | None = None,
) -> RatioEstimate:
    """Worst observed OPT / achieved ratio over seeded random instances."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = GeneratorConfig(n_range[0], n_range[1], d, seed, grid)
    results = parallel_map(
        _ratio_trial, [(kind, config, k, verify) for k in range(trials)], workers
    )
    worst_ratio, worst_inst = results[0]
    for ratio, inst in results[1:]:
        if ratio > worst_ratio:
            worst_ratio, worst_inst = ratio, inst
    return RatioEstimate(worst_ratio, worst_inst, trials)


# --- exchange monotonicity ---------------------------------------------------


def _non_decreasing(seq: list[float]) -> bool:
    return all(b >= a - EPS for a, b in zip(seq, seq[1:]))


def check_exchange_triple(inst: Instance, start: Assignment, y: float) -> str | None:
    """Name of the first broken exchange property for this triple, or None."""
    t = ttc(inst, start, y)
    if not _non_decreasing(t.welfare_sequence()):
        return "ttc welfare decreased"
    if beneficial_swap_exists(inst, t.final_assignment, y) is not None:
        return "ttc output admits a beneficial swap"
    s = swap_dynamics(inst, start, y)
    if not _non_decreasing(s.welfare_sequence()):
        return "swap dynamics welfare decreased"
    return None


def verify_lemma_monotonicity(
    trials: int, seed: int, n_range: tuple[int, int] = (1, 7), d: float = 8.0
) -> tuple[bool, dict | None]:
    """Check welfare never drops along TTC or swap traces on random triples.

    Returns ``(True, None)`` or ``(False, counterexample)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        inst = random_instance(rng, n, d)
        start = Assignment(tuple(int(p) for p in rng.permutation(n)))
        y = float(rng.uniform(0.0, d))
        problem = check_exchange_triple(inst, start, y)
        if problem:
            return False, {
                "trial": k,
                "problem": problem,
                "instance": inst.to_dict(),
                "start": list(start.perm),
                "facility": y,
            }
    return True, None


# --- audit campaigns --------------------------------------------------------


def _audit_trial(job) -> tuple[Instance, AuditReport]:
    kind, config, trial = job
    inst = config.instance(trial)
    return inst, audit_truthfulness(kind, inst)


def audit_campaign(
    kind: MechanismKind,
    trials: int,
    config: GeneratorConfig,
    *,
    extra_instances: Iterable[Instance] = (),
    workers: int | None = None,
    max_witnesses: int = 20,
) -> dict:
    """Truthfulness audit over seeded instances; returns a JSON-ready report."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    extra = list(extra_instances)
    audited = [(inst, audit_truthfulness(kind, inst)) for inst in extra]
    audited += parallel_map(_audit_trial, [(kind, config, k) for k in range(trials)], workers)

    witnesses = []
    violating = 0
    max_gain = 0.0
    for idx, (inst, report) in enumerate(audited):
        if report.truthful:
            continue
        violating += 1
        max_gain = max(max_gain, report.max_gain)
        if len(witnesses) < max_witnesses:
            witnesses.append({"case": idx, "instance": inst.to_dict(), **report.to_dict()})
    return {
        "mode": "truthfulness",
        "mechanism": kind.value,
        "trials": trials,
        "injected": len(extra),
        "config": config.to_dict(),
        "cases": len(audited),
        "violating_cases": violating,
        "truthful": violating == 0,
        "max_gain": max_gain,
        "witnesses": witnesses,
    }


def _ratio_campaign_trial(job) -> dict:
    kind, config, trial = job
    inst = config.instance(trial)
    opt = optimal_welfare(inst)
    achieved = achieved_welfare(kind, inst)
    return {
        "trial": trial,
        "n": inst.n,
        "opt_welfare": opt,
        "achieved_welfare": achieved,
        "ratio": opt / achieved if achieved > 0 else math.inf,
    }


def ratio_campaign(
    kind: MechanismKind, trials: int, config: GeneratorConfig, *, workers: int | None = None
) -> dict:
    """Per-trial OPT vs achieved welfare rows plus the worst ratio."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = parallel_map(
        _ratio_campaign_trial, [(kind, config, k) for k in range(trials)], workers
    )
    worst = max(rows, key=lambda r: (r["ratio"], -r["trial"]))
    return {
        "mode": "ratio",
        "mechanism": kind.value,
        "trials": trials,
        "config": config.to_dict(),
        "worst_ratio": worst["ratio"],
        "worst_trial": worst["trial"],
        "worst_instance": config.instance(worst["trial"]).to_dict(),
        "rows": rows,
    }
