"""Command-line front end: replay figures, run mechanisms, audit, generate instances.

Exit codes: 0 ok, 1 a checked number or expectation failed, 2 usage error,
3 unreadable/unwritable file, 4 malformed JSON, 5 instance validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audit import (
    GeneratorConfig,
    audit_campaign,
    audit_truthfulness,
    expected_welfare,
    ratio_campaign,
    run_pipeline,
)
from .core import EPS, Assignment, Instance, InstanceError, Outcome, agent_utilities, render_instance, social_welfare
from .exchange import ttc
from .figures import FIG1, FIG2, FIGURES
from .mechanisms import (
    MechanismKind,
    central_opt,
    naive_opt_location,
    opt_location_then_ttc,
)
from .report import fmt, render, table, to_json

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO, EXIT_JSON, EXIT_INVALID = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --- replay -----------------------------------------------------------------


def _check(name: str, expected, actual) -> dict:
    if isinstance(expected, float):
        ok = abs(actual - expected) <= EPS
    else:
        ok = expected == actual
    return {"check": name, "expected": expected, "actual": actual, "ok": ok}


def _flip(inst: Instance, agent: int) -> tuple:
    types = list(inst.types)
    types[agent] = types[agent].flipped()
    return tuple(types)


def replay_fig1() -> list[dict]:
    inst, a4 = FIG1, 3
    checks = []
    y = naive_opt_location(inst)
    final = ttc(inst, Assignment.identity(inst.n), y).final_assignment
    checks.append(_check("truthful facility", 5.0, y))
    checks.append(_check("agent 4 distance after TTC", 5.0, abs(inst.positions[final.perm[a4]] - y)))

    y = naive_opt_location(inst, _flip(inst, a4))
    final = ttc(inst, Assignment.identity(inst.n), y).final_assignment
    checks.append(_check("facility after agent 4 reports L", 7.0, y))
    checks.append(_check("agent 4 distance after TTC (misreport)", 7.0, abs(inst.positions[final.perm[a4]] - y)))

    out = central_opt(inst)
    checks.append(_check("central-opt facility", 8.0, out.facility))
    checks.append(_check("central-opt welfare", 35.0, social_welfare(out, inst)))
    checks.append(
        _check("central-opt locations by agent", [5.0, 0.0, 7.0, 1.0, 8.0], list(out.assignment.locations(inst)))
    )
    return checks


def replay_fig2() -> list[dict]:
    inst, a4 = FIG2, 3
    checks = []
    y, trace = opt_location_then_ttc(inst)
    u = agent_utilities(Outcome(y, trace.final_assignment), inst)
    checks.append(_check("truthful facility", 0.0, y))
    checks.append(_check("truthful trades", 0, len(trace.steps)))
    checks.append(_check("agent 4 utility (truthful)", 6.5, u[a4]))

    y, trace = opt_location_then_ttc(inst, _flip(inst, a4))
    u = agent_utilities(Outcome(y, trace.final_assignment), inst)
    checks.append(_check("facility after agent 4 reports L", 8.0, y))
    checks.append(_check("agent 4 utility (misreport)", 7.0, u[a4]))

    report = audit_truthfulness(MechanismKind.OPT_LOCATION_THEN_TTC, inst)
    checks.append(_check("verdict", "not truthful", "truthful" if report.truthful else "not truthful"))
    checks.append(_check("max gain", 0.5, report.max_gain))
    return checks


REPLAYS = {"fig1": replay_fig1, "fig2": replay_fig2}


def cmd_replay(args) -> int:
    checks = REPLAYS[args.figure]()
    ok = all(c["ok"] for c in checks)
    if args.format == "json":
        sys.stdout.write(to_json({"figure": args.figure, "ok": ok, "checks": checks}))
    else:
        rows = [[c["check"], c["expected"], c["actual"], "ok" if c["ok"] else "MISMATCH"] for c in checks]
        sys.stdout.write(table(["check", "expected", "actual", "status"], rows))
        sys.stdout.write(f"{args.figure}: {'all numbers reproduced' if ok else 'MISMATCH'}\n")
    return EXIT_OK if ok else EXIT_MISMATCH


# --- run --------------------------------------------------------------------


def load_instance(path: str) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read instance file {path}: {exc.strerror or exc}", EXIT_IO) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON in {path}: {exc}", EXIT_JSON) from exc
    try:
        return Instance.from_dict(data)
    except InstanceError as exc:
        raise CliError(f"invalid instance in {path}: {exc}", EXIT_INVALID) from exc


def _outcome_dict(inst: Instance, out: Outcome) -> dict:
    return {
        "facility": out.facility,
        "assignment": list(out.assignment.perm),
        "locations": list(out.assignment.locations(inst)),
        "utilities": list(agent_utilities(out, inst)),
        "welfare": social_welfare(out, inst),
    }


def run_mechanism(kind: MechanismKind, inst: Instance, facility: float | None = None) -> dict:
    """Mechanism plus exchange phase on truthful reports, as a JSON-ready dict."""
    identity = Assignment.identity(inst.n)
    report: dict = {"mechanism": kind.value, "instance": inst.to_dict()}
    if facility is not None:
        try:
            Outcome(facility, identity).check(inst)
        except InstanceError as exc:
            raise CliError(str(exc), EXIT_USAGE) from exc
        report["facility_override"] = facility

    if kind is MechanismKind.CENTRAL_OPT:
        out = central_opt(inst, facility=facility)
        trace = ttc(inst, out.assignment, out.facility)
        report.update(_outcome_dict(inst, out))
        report["post_ttc_trades"] = [s.to_dict() for s in trace.steps]
        return report

    if kind is MechanismKind.RANDOM_ENDPOINTS and facility is None:
        pipe = run_pipeline(kind, inst)
        support = []
        for (p, pre), (_, post) in zip(pipe["pre-exchange"], pipe["post-ttc"]):
            trace = ttc(inst, pre.assignment, pre.facility)
            support.append(
                {
                    "probability": p,
                    "pre_exchange": _outcome_dict(inst, pre),
                    "post_ttc": _outcome_dict(inst, post),
                    "trades": [s.to_dict() for s in trace.steps],
                }
            )
        report["support"] = support
        report["expected_pre_exchange_welfare"] = expected_welfare(inst, pipe["pre-exchange"])
        report["expected_post_ttc_welfare"] = expected_welfare(inst, pipe["post-ttc"])
        return report

    if facility is not None:
        y = facility
    elif kind is MechanismKind.NAIVE_OPT_LOCATION:
        y = naive_opt_location(inst)
    else:
        y, _ = opt_location_then_ttc(inst)
    trace = ttc(inst, identity, y)
    report["pre_exchange_welfare"] = trace.initial_welfare
    report["trades"] = [s.to_dict() for s in trace.steps]
    report.update(_outcome_dict(inst, Outcome(y, trace.final_assignment)))
    return report


def _run_table(report: dict) -> str:
    lines = [f"mechanism: {report['mechanism']}"]

    def outcome_block(out: dict, indent: str = "") -> list[str]:
        rows = [
            [i, loc_idx, loc, u]
            for i, (loc_idx, loc, u) in enumerate(zip(out["assignment"], out["locations"], out["utilities"]))
        ]
        body = table(["agent", "location_index", "location", "utility"], rows)
        return [
            f"{indent}facility: {fmt(out['facility'])}",
            *(indent + line for line in body.rstrip("\n").split("\n")),
            f"{indent}welfare: {fmt(out['welfare'])}",
        ]

    def trades(steps: list[dict]) -> str:
        if not steps:
            return "none"
        return "; ".join(f"{s['cycle']} -> {fmt(s['welfare_after'])}" for s in steps)

    if "support" in report:
        for point in report["support"]:
            lines.append(f"with probability {fmt(point['probability'])}:")
            lines.append("  before exchange:")
            lines += outcome_block(point["pre_exchange"], "    ")
            lines.append(f"  trades: {trades(point['trades'])}")
            lines.append("  after TTC:")
            lines += outcome_block(point["post_ttc"], "    ")
        lines.append(f"expected pre-exchange welfare: {fmt(report['expected_pre_exchange_welfare'])}")
        lines.append(f"expected post-TTC welfare: {fmt(report['expected_post_ttc_welfare'])}")
    else:
        if "pre_exchange_welfare" in report:
            lines.append(f"pre-exchange welfare: {fmt(report['pre_exchange_welfare'])}")
            lines.append(f"trades: {trades(report['trades'])}")
        else:
            lines.append(f"post-relocation TTC trades: {trades(report['post_ttc_trades'])}")
        lines += outcome_block(report)
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    kind = MechanismKind.parse(args.mechanism)
    inst = load_instance(args.instance)
    report = run_mechanism(kind, inst, args.facility)
    sys.stdout.write(to_json(report) if args.format == "json" else _run_table(report))
    return EXIT_OK


# --- audit ------------------------------------------------------------------


def cmd_audit(args) -> int:
    kind = MechanismKind.parse(args.mechanism)
    if args.trials < 1:
        raise CliError("--trials must be >= 1", EXIT_USAGE)
    try:
        config = GeneratorConfig(args.n_min, args.n_max, args.d, args.seed, args.grid)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc

    if args.ratio:
        report = ratio_campaign(kind, args.trials, config, workers=args.workers)
    else:
        extra = [FIGURES[name] for name in args.inject] if args.inject else []
        report = audit_campaign(kind, args.trials, config, extra_instances=extra, workers=args.workers)

    text = render(report, args.format)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_IO) from exc
    else:
        sys.stdout.write(text)

    if args.ratio and args.max_ratio is not None and report["worst_ratio"] > args.max_ratio + EPS:
        print(f"worst ratio {fmt(report['worst_ratio'])} exceeds {fmt(args.max_ratio)}", file=sys.stderr)
        return EXIT_MISMATCH
    if not args.ratio and args.expect:
        if report["truthful"] != (args.expect == "truthful"):
            print(f"expected {args.expect}, found {report['violating_cases']} violating cases", file=sys.stderr)
            return EXIT_MISMATCH
    return EXIT_OK


# --- generate ---------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.n < 1:
        raise CliError("--n must be >= 1", EXIT_USAGE)
    if not args.d > 0:
        raise CliError("--d must be positive", EXIT_USAGE)
    inst = GeneratorConfig(args.n, args.n, args.d, args.seed, args.grid).instance(0)
    try:
        Path(args.out).write_text(render_instance(inst) + "\n")
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}", EXIT_IO) from exc
    return EXIT_OK


# --- wiring -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exchgmech", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    tokens = [k.value for k in MechanismKind]

    p = sub.add_parser("replay", help="reproduce the worked figure instances")
    p.add_argument("--figure", required=True, choices=sorted(REPLAYS))
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("run", help="run a mechanism on an instance file")
    p.add_argument("--mechanism", required=True, choices=tokens)
    p.add_argument("--instance", required=True)
    p.add_argument("--facility", type=float, help="pin the facility at this point")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="seeded truthfulness or ratio campaign")
    p.add_argument("--mechanism", required=True, choices=tokens)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=7)
    p.add_argument("--d", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float, help="snap positions to multiples of this step")
    p.add_argument("--ratio", action="store_true", help="estimate approximation ratio instead")
    p.add_argument("--inject", action="append", choices=sorted(FIGURES), help="also audit a figure instance")
    p.add_argument("--expect", choices=["truthful", "untruthful"], help="exit 1 if the verdict differs")
    p.add_argument("--max-ratio", type=float, help="exit 1 if the worst ratio exceeds this")
    p.add_argument("--workers", type=int, help="worker processes (default: $EXCHG_MECH_WORKERS or CPU count)")
    p.add_argument("--format", choices=["json", "csv", "table"], default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("generate", help="write a random instance JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
