"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid data or configuration,
3 numeric failure. Results go to ``--out`` or stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import TrustParams
from .dataio import PAIRS, dataset_to_csv, load_params, parse_dataset
from .equilibrium import ScheduleSpec, solve_equilibrium
from .errors import DataError, MisuseError, NumericError
from .evaluation import compare_models, holdout_experiment
from .inference import ModelVariant, estimate_missing, fit
from .simulator import Communication, SimConfig, monte_carlo_limit, run_schedule
from .synth import DEFAULT_TRUE_PARAMS, PeerTrustMode, SynthConfig, generate_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ALL_ONES = TrustParams(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _pair_params(path, robot: str) -> tuple[TrustParams, TrustParams]:
    if path is None:
        return ALL_ONES, ALL_ONES
    params = load_params(path)
    out = []
    for human in ("x", "y"):
        key = f"{human}:{robot}"
        if key not in params:
            raise DataError(f"{path}: no parameters for pair {key}")
        out.append(params[key])
    return out[0], out[1]


def _schedule(args) -> ScheduleSpec:
    return ScheduleSpec(args.m, args.n, args.reliability, args.trust_xy, args.trust_yx)


def _cmd_synth(args) -> int:
    params = {pair: DEFAULT_TRUE_PARAMS for pair in PAIRS}
    if args.params is not None:
        params.update(load_params(args.params))
    cfg = SynthConfig(
        sessions=args.sessions,
        tasks_per_session=args.tasks,
        reliability_A=args.rel_a,
        reliability_B=args.rel_b,
        params=params,
        peer_trust=(args.trust_xy, args.trust_yx),
        peer_mode=args.peer_mode,
        seed=args.seed,
        fixed_assignment=args.fixed_assignment,
    )
    _emit(dataset_to_csv(generate_synthetic(cfg)), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    px, py = _pair_params(args.params, args.robot)
    cfg = SimConfig(
        _schedule(args),
        px,
        py,
        turns=args.turns,
        replicas=args.replicas,
        seed=args.seed,
        communication=args.communication,
    )
    traj = run_schedule(cfg, 0)
    _emit(traj.to_csv(), args.out)
    summary = monte_carlo_limit(cfg).to_dict()
    target = sys.stderr if args.out in (None, "-") else sys.stdout
    target.write(_json(summary))
    return EXIT_OK


def _cmd_equilibrium(args) -> int:
    px, py = _pair_params(args.params, args.robot)
    eq = solve_equilibrium(px, py, _schedule(args), method=args.method)
    doc = {
        "t_x": eq.t_x,
        "t_y": eq.t_y,
        "case": eq.case_used.value,
        "residual": eq.residual,
        "method": eq.method,
        "fallback": eq.fallback,
        "alternatives": [list(a) for a in eq.alternatives],
    }
    _emit(_json(doc), args.out)
    return EXIT_OK


def _load(args):
    return parse_dataset(args.dataset, tasks_per_session=args.tasks)


def _cmd_fit(args) -> int:
    h = _load(args).history(args.agent, args.robot)
    report = fit(h, args.model) if h.complete else estimate_missing(h, args.model).report
    doc = report.to_dict()
    doc.update(agent=args.agent, robot=args.robot)
    _emit(_json(doc), args.out)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    d = _load(args)
    pairs = [f"{args.agent}:{args.robot}"] if args.agent and args.robot else list(PAIRS)
    histories = {tuple(p.split(":")): d.history(*p.split(":")) for p in pairs}
    if args.holdout is None:
        doc = {"model": ModelVariant(args.model).value, "predictions": {}}
        for key, h in histories.items():
            result = estimate_missing(h, args.model)
            doc["predictions"][":".join(key)] = [[u, mu] for u, mu in result.estimates]
            for w in result.warnings:
                print(f"warning: {':'.join(key)}: {w}", file=sys.stderr)
    else:
        res = holdout_experiment(histories, args.holdout, args.model)
        doc = {
            "model": ModelVariant(args.model).value,
            "holdout": res.k_hat,
            "predictions": {":".join(k): [[u, mu] for u, mu in v] for k, v in res.estimates.items()},
            "truths": {":".join(k): [[u, t] for u, t in sorted(v.items())] for k, v in res.truths.items()},
            "rmse": res.rmse,
            "last_observed_rmse": res.baseline_rmse,
        }
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)
    _emit(_json(doc), args.out)
    return EXIT_OK


def _cmd_eval(args) -> int:
    histories = {}
    many = len(args.dataset) > 1
    for path in args.dataset:
        d = parse_dataset(path, tasks_per_session=args.tasks)
        prefix = f"{Path(path).stem}." if many else ""
        for pair in PAIRS:
            human, robot = pair.split(":")
            histories[(prefix + human, robot)] = d.history(human, robot)
    table = compare_models(histories)
    _emit(table.to_csv(), args.out)
    for row in table.rows:
        if row.failure is not None:
            print(f"warning: {row.agent}:{row.robot} {row.variant.value}: {row.failure}", file=sys.stderr)
    return EXIT_OK


def _probability(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tiptrust", description="Trust inference and propagation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common_out(p):
        p.add_argument("--out", help="output file (default: stdout)")

    def schedule_flags(p):
        p.add_argument("--m", type=int, default=1, help="x's interactions per block")
        p.add_argument("--n", type=int, default=1, help="y's interactions per block")
        p.add_argument("--reliability", type=_probability, required=True, help="robot reliability r")
        p.add_argument("--trust-xy", type=_probability, default=1.0, help="x's trust in y")
        p.add_argument("--trust-yx", type=_probability, default=1.0, help="y's trust in x")
        p.add_argument("--params", help="parameter JSON; pairs x:<robot> and y:<robot> are used")
        p.add_argument("--robot", default="A", help="robot key looked up in --params")

    p = sub.add_parser("synth", help="generate a synthetic session-log dataset")
    p.add_argument("--sessions", type=int, default=15)
    p.add_argument("--tasks", type=int, default=10)
    p.add_argument("--rel-a", type=_probability, default=0.9)
    p.add_argument("--rel-b", type=_probability, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="parameter JSON overriding the default true parameters")
    p.add_argument("--trust-xy", type=_probability, default=0.8)
    p.add_argument("--trust-yx", type=_probability, default=0.8)
    p.add_argument("--peer-mode", choices=[m.value for m in PeerTrustMode], default="constant")
    p.add_argument("--fixed-assignment", choices=["A", "B"], help="pin human x to one robot")
    common_out(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("simulate", help="Monte-Carlo run of the alternating schedule")
    schedule_flags(p)
    p.add_argument("--turns", type=int, default=1000)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--communication", choices=[c.value for c in Communication], default="sample"
    )
    common_out(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("equilibrium", help="solve for the long-run trust pair")
    schedule_flags(p)
    p.add_argument("--method", choices=["newton", "grid"], default="newton")
    common_out(p)
    p.set_defaults(func=_cmd_equilibrium)

    def dataset_flags(p, many=False):
        p.add_argument("dataset", nargs="+" if many else None, help="session-log CSV")
        p.add_argument("--tasks", type=int, default=10, help="tasks per session")
        p.add_argument("--model", choices=[v.value for v in ModelVariant], default="tip")

    p = sub.add_parser("fit", help="fit one (agent, robot) pair")
    dataset_flags(p)
    p.add_argument("--agent", choices=["x", "y"], required=True)
    p.add_argument("--robot", choices=["A", "B"], required=True)
    common_out(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("estimate", help="predict missing or held-out ratings")
    dataset_flags(p)
    p.add_argument("--holdout", type=int, help="withhold the last K sessions and score predictions")
    p.add_argument("--agent", choices=["x", "y"])
    p.add_argument("--robot", choices=["A", "B"])
    common_out(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("eval", help="compare TIP with its ablations")
    dataset_flags(p, many=True)
    common_out(p)
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except MisuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
