"""
Command-line driver: simulate, train, evaluate, benchmark, consistency, report.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
JSON results go to stdout (and to --out when given); logs go through logging.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from dtrlab import __version__
from dtrlab.consistency import consistency_report, lab_report
from dtrlab.core import read_csv, write_csv
from dtrlab.errors import ConfigError, DtrLabError, PreconditionError
from dtrlab.evalkit import dr_value, fit_propensity, ipw_value
from dtrlab.experiment import load_experiment, run_benchmark
from dtrlab.models.configs import SettingSpec, TrainConfig
from dtrlab.models.results import TauVector
from dtrlab.models.specs import EstimationMethod, PolicyClass, QForm
from dtrlab.policy import PolicyPair
from dtrlab.qlearn import QPolicy, fit_q_learning
from dtrlab.simlab import generate, mc_value
from dtrlab.surrogate import SURROGATES, get_surrogate
from dtrlab.trainer import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE = 3


def _tau_argument(text: str) -> TauVector:
    try:
        return TauVector.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid tau {text!r}: expected four positive numbers a,b,c,d") from exc


def _emit(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2, default=str)
    print(text)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")


def load_regime(path: str | Path) -> PolicyPair | QPolicy:
    """Policy file written by `train`: a surrogate-value pair or a Q-learning policy."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "q1" in data:
        return QPolicy.from_dict(data)
    return PolicyPair.from_dict(data)


# commands -------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    d = generate(SettingSpec(id=args.setting, n=args.n, seed=args.seed))
    out = args.out or Path(f"setting{args.setting}_n{args.n}_seed{args.seed}.csv")
    write_csv(d, out)
    _emit({"path": str(out), "rows": d.n, "p1": d.p1, "p2": d.p2, "offset": d.offset}, None)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    d = read_csv(args.data)
    out = args.out or Path("pair.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.method == "qlearn":
        _, _, policy = fit_q_learning(d, QForm(args.q_form), args.seed)
        out.write_text(json.dumps(policy.to_dict()), encoding="utf-8")
        _emit({"policy": str(out), "method": "qlearn", "q_form": args.q_form}, None)
        return EXIT_OK
    cfg = TrainConfig(
        surrogate=args.surrogate, epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, l1_lambda=args.l1, seed=args.seed,
        allow_inconsistent_surrogate=args.allow_inconsistent,
    )
    result = train(d, PolicyClass(args.class1), PolicyClass(args.class2), cfg)
    result.pair.save(out)
    trace = result.write_trace(out.with_suffix(".trace.csv"))
    _emit({
        "policy": str(out), "trace": str(trace), "method": "dtreslo",
        "initial_objective": result.initial_objective, "final_objective": result.final_objective,
        "seconds": result.seconds,
    }, None)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    regime = load_regime(args.policy)
    method = EstimationMethod(args.method)
    if method == EstimationMethod.MONTE_CARLO:
        if args.setting is None:
            raise ConfigError("--method mc needs --setting")
        estimate = mc_value(args.setting, regime, args.n_eval, args.seed)
    else:
        if args.data is None:
            raise ConfigError(f"--method {method} needs --data")
        d = read_csv(args.data)
        if method == EstimationMethod.IPW:
            estimate = ipw_value(d, regime)
        else:
            q1, q2, _ = fit_q_learning(d, seed=args.seed)
            pms = (fit_propensity(d, 1), fit_propensity(d, 2)) if args.estimate_propensity else (None, None)
            estimate = dr_value(d, regime, q1, q2, *pms)
    _emit(estimate.to_report(), args.out)
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    cfg = load_experiment(args.config)
    if args.seed_given:
        cfg = cfg.model_copy(update={"seed": args.seed})
    result = run_benchmark(cfg, args.threads)
    rows_path, summary_path = result.write(args.out or cfg.out_dir)
    _emit({
        "rows": str(rows_path), "summary": str(summary_path),
        "aggregate": result.summary.to_dict(orient="records"),
    }, None)
    return EXIT_OK


def cmd_consistency(args: argparse.Namespace) -> int:
    report = consistency_report(get_surrogate(args.surrogate), args.tau, args.box, args.grid_step)
    _emit(report.model_dump(), args.out)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report = lab_report(args.tau_trials, args.hinge_trials, args.regret_trials, args.seed)
    _emit(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_FAILURE


# parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtrlab", description="Two-stage treatment regimes by surrogate value ascent")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    parser.add_argument("--out", type=Path, default=None, help="output file or directory")
    parser.add_argument("--threads", type=int, default=None, help="benchmark workers (default $DTRLAB_THREADS or CPU count)")
    parser.add_argument("--log-level", default=os.getenv("DTRLAB_LOG_LEVEL", "INFO"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    # the same flags after the subcommand override the global ones
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="draw a dataset from a simulation setting")
    simulate.add_argument("--setting", type=int, required=True, choices=range(1, 6))
    simulate.add_argument("--n", type=int, required=True)
    simulate.set_defaults(handler=cmd_simulate)

    train_cmd = commands.add_parser("train", parents=[common], help="fit a policy pair on a CSV dataset")
    train_cmd.add_argument("--data", type=Path, required=True)
    train_cmd.add_argument("--method", choices=["dtreslo", "qlearn"], default="dtreslo")
    train_cmd.add_argument("--class1", choices=[str(c) for c in PolicyClass], default="linear")
    train_cmd.add_argument("--class2", choices=[str(c) for c in PolicyClass], default="linear")
    train_cmd.add_argument("--q-form", choices=[str(q) for q in QForm], default="linear")
    train_cmd.add_argument("--surrogate", choices=sorted(SURROGATES), default="arctan")
    train_cmd.add_argument("--epochs", type=int, default=20)
    train_cmd.add_argument("--batch-size", type=int, default=128)
    train_cmd.add_argument("--learning-rate", type=float, default=1e-3)
    train_cmd.add_argument("--l1", type=float, default=0.0)
    train_cmd.add_argument("--allow-inconsistent", action="store_true")
    train_cmd.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("evaluate", parents=[common], help="estimate the value of a saved policy")
    evaluate.add_argument("--method", choices=[str(m) for m in EstimationMethod], required=True)
    evaluate.add_argument("--policy", type=Path, required=True)
    evaluate.add_argument("--data", type=Path)
    evaluate.add_argument("--setting", type=int, choices=range(1, 6))
    evaluate.add_argument("--n-eval", type=int, default=10000)
    evaluate.add_argument("--estimate-propensity", action="store_true")
    evaluate.set_defaults(handler=cmd_evaluate)

    benchmark = commands.add_parser("benchmark", parents=[common], help="run replications from an experiment file")
    benchmark.add_argument("--config", type=Path, required=True)
    benchmark.set_defaults(handler=cmd_benchmark)

    consistency = commands.add_parser("consistency", parents=[common], help="psi-transform maximizer at one tau")
    consistency.add_argument("--surrogate", choices=sorted(SURROGATES), required=True)
    consistency.add_argument("--tau", type=_tau_argument, required=True)
    consistency.add_argument("--box", type=float, default=50.0)
    consistency.add_argument("--grid-step", type=float, default=0.5)
    consistency.set_defaults(handler=cmd_consistency)

    report = commands.add_parser("report", parents=[common], help="run the whole consistency laboratory")
    report.add_argument("--tau-trials", type=int, default=500)
    report.add_argument("--hinge-trials", type=int, default=1000)
    report.add_argument("--regret-trials", type=int, default=1000)
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    try:
        return args.handler(args)
    except (ConfigError, PreconditionError, ValidationError) as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_USAGE
    except DtrLabError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_FAILURE
    except Exception as exc:
        logger.error(f"{args.command} failed unexpectedly: {exc}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
