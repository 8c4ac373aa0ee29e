"""Command line front end.

Exit codes: 0 success, 2 usage error, 3 problem-file error, 4 infeasible,
5 numerical or solver failure, 6 evaluation or model error.
"""
import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .expr import EvaluationError, ExprSyntaxError
from .learning import (
    BOUND_COLUMNS,
    ParameterError,
    ProbabilisticLevels,
    bound_table,
    sweep_rows,
    sample_bound_one_sided,
    reference_rows,
)
from .problem import ModelError, with_nominal_box
from .problem_file import ProblemFileError, describe, load_problem
from .sampling import derived_seeds, draw, empirical_violation, write_scenarios
from .sequential import (
    SUMMARY_COLUMNS,
    Outcome,
    SequentialConfig,
    SequentialError,
    audit,
    outcome_from_dict,
    outcome_to_dict,
    run_sequential,
    summarize,
)
from .solver import SolverError, SolverOptions, Status, solve_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_INFEASIBLE = 4
EXIT_NUMERICAL = 5
EXIT_MODEL = 6


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    config: Dict
    seeds: List[int]
    inputs: Dict[str, str]
    outputs: List[str] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"manifest-{self.command}.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, default=str)
        return path


def sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def versions() -> Dict[str, str]:
    return {
        "randomized_lmi": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


# ______________________________________________________________________________
# Configuration


def load_config(path: Optional[str]) -> Dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        config = json.load(f)
    unknown = set(config) - {"solver", "sequential", "bounds"}
    if unknown:
        raise ParameterError(f"unknown config sections {sorted(unknown)}")
    return config


def pick(flag, section: Dict, key, default):
    """Command line flag, then config file, then default."""
    if flag is not None:
        return flag
    return section.get(key, default)


def solver_options(args, config: Dict) -> SolverOptions:
    section = dict(config.get("solver", {}))
    known = {f.name for f in fields(SolverOptions)}
    unknown = set(section) - known
    if unknown:
        raise ParameterError(f"unknown solver options {sorted(unknown)}")
    if getattr(args, "restarts", None) is not None:
        section["restarts"] = args.restarts
    if getattr(args, "margin", None) is not None:
        section["margin"] = args.margin
    section["seed"] = args.seed
    return SolverOptions(**section)


def levels_from(args, section: Dict) -> ProbabilisticLevels:
    return ProbabilisticLevels(
        pick(args.epsilon, section, "epsilon", 0.2),
        pick(args.delta, section, "delta", 0.01),
        pick(args.rho, section, "rho", 0.0),
    )


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def write_json(path: Path, document):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)


def start(args, config, seeds, inputs=(), **resolved) -> RunManifest:
    manifest = RunManifest(
        args.command,
        list(args.argv),
        dict(config, resolved=resolved),
        list(seeds),
        {str(path): sha256(path) for path in inputs},
        versions=versions(),
    )
    manifest.write(args.out_dir)
    return manifest


def finish(args, manifest: RunManifest, *outputs: Path):
    manifest.outputs.extend(str(path) for path in outputs)
    manifest.write(args.out_dir)


# ______________________________________________________________________________
# Commands


def cmd_bounds(args, config) -> int:
    section = config.get("bounds", {})
    rho = pick(args.rho, section, "rho", 0.0)
    if args.preset == "reference":
        rows = reference_rows()
    elif args.preset == "sweep":
        rows = sweep_rows()
    else:
        rows = bound_table(
            pick(args.epsilon, section, "epsilon", [0.2]),
            pick(args.delta, section, "delta", [1e-8]),
            pick(args.m_theta, section, "m_theta", [13]),
            pick(args.n, section, "n", [10]),
            rho,
        )
    manifest = start(args, config, [], preset=args.preset, rho=rho)
    output = args.out_dir / "bounds.csv"
    write_csv(output, BOUND_COLUMNS, rows)
    finish(args, manifest, output)
    logger.info("wrote %d rows to %s", len(rows), output)
    return EXIT_OK


def cmd_solve(args, config) -> int:
    p = load_problem(args.problem)
    if args.nominal:
        p = with_nominal_box(p)
    options = solver_options(args, config)
    if args.samples == "auto":
        levels = levels_from(args, config.get("sequential", {}))
        N = sample_bound_one_sided(levels, p.m_theta, p.dimension, p.strict).N
    else:
        N = int(args.samples)
    manifest = start(
        args, config, [args.seed], [args.problem], N=N, options=asdict(options)
    )
    scenarios = draw(p.parameters, N, args.seed, "design")
    result = solve_scenario(p, scenarios, options)
    document = dict(
        problem=p.name,
        status=str(result.status),
        objective=result.objective,
        theta=[float(v) for v in result.theta],
        variables=dict(zip(p.layout.names, map(float, result.theta))),
        min_eigenvalue=result.min_eigenvalue,
        N=N,
        seed=args.seed,
        newton_steps=result.newton_steps,
        rounds=result.rounds,
        restarts=result.restarts,
        duration_s=result.duration_s,
        message=result.message,
    )
    if result.ok:
        document["design_violation"] = empirical_violation(
            p, result.theta, scenarios
        )
    output = args.out_dir / "solve.json"
    write_json(output, document)
    scenarios_path = args.out_dir / "scenarios.csv"
    write_scenarios(scenarios, scenarios_path)
    finish(args, manifest, output, scenarios_path)
    summary = dict(status=document["status"], objective=result.objective)
    print(json.dumps(summary))
    if result.status in (Status.INFEASIBLE, Status.ALL_RESTARTS_FAILED):
        return EXIT_INFEASIBLE
    if not result.ok:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sequential(args, config) -> int:
    p = load_problem(args.problem)
    section = config.get("sequential", {})
    repeats = pick(args.repeats, section, "repeats", 1)
    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    seeds = derived_seeds(args.seed, repeats) if repeats > 1 else [args.seed]
    base = SequentialConfig(
        levels_from(args, section),
        k_t=pick(args.k_t, section, "k_t", 10),
        alpha=pick(args.alpha, section, "alpha", None),
        a=pick(args.a, section, "a", None),
        solver=solver_options(args, config),
    )
    manifest = start(
        args,
        config,
        seeds,
        [args.problem],
        levels=asdict(base.levels),
        k_t=base.k_t,
        alpha=base.alpha,
        a=base.a,
        repeats=repeats,
    )

    def run(index):
        cfg = replace(base, seed=seeds[index])
        log_path = args.out_dir / f"run-{index:03d}.jsonl"
        with open(log_path, "w", encoding="utf-8") as log:

            def on_iteration(record):
                log.write(json.dumps(record.to_dict()) + "\n")

            outcome = run_sequential(p, cfg, on_iteration)
        outcome_path = args.out_dir / f"outcome-{index:03d}.json"
        write_json(outcome_path, outcome_to_dict(outcome))
        return outcome, log_path, outcome_path

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        runs = list(pool.map(run, range(repeats)))
    outcomes = [outcome for outcome, _, _ in runs]
    summary_path = args.out_dir / "summary.csv"
    write_csv(summary_path, SUMMARY_COLUMNS, [summarize(outcomes)])
    finish(
        args,
        manifest,
        *[path for _, *paths in runs for path in paths],
        summary_path,
    )
    for index, outcome in enumerate(outcomes):
        logger.info(
            "run %d: %s (%s) at k=%d, objective %.6g",
            index,
            outcome.status,
            outcome.design_status,
            outcome.k,
            outcome.objective,
        )
    if all(o.status == Outcome.INFEASIBLE for o in outcomes):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_audit(args, config) -> int:
    with open(args.outcome, encoding="utf-8") as f:
        outcome = outcome_from_dict(json.load(f))
    p = load_problem(args.problem)
    manifest = start(
        args,
        config,
        [args.seed],
        [args.outcome, args.problem],
        M=args.samples,
        confidence=args.confidence,
    )
    report = audit(
        outcome, p, p.parameters, args.samples, args.seed, args.confidence
    )
    output = args.out_dir / "audit.json"
    write_json(output, report.to_dict())
    finish(args, manifest, output)
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_validate_file(args, config) -> int:
    print(json.dumps(describe(load_problem(args.problem))))
    return EXIT_OK


# ______________________________________________________________________________
# Parser


def samples_arg(text):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer or 'auto'")
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def add_levels(parser, many=False):
    nargs = "+" if many else None
    parser.add_argument("--epsilon", type=float, nargs=nargs, help="accuracy")
    parser.add_argument("--delta", type=float, nargs=nargs, help="confidence")
    parser.add_argument("--rho", type=float, help="level (default 0)")


def add_solver_flags(parser):
    parser.add_argument("--restarts", type=positive_int, help="BMI restarts")
    parser.add_argument(
        "--margin", type=float, help="absolute margin for strict blocks"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randomized-lmi",
        description="Randomized solution of uncertain LMI/BMI problems.",
    )
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--out-dir", type=Path, default=Path("."), help="output directory"
    )
    parser.add_argument(
        "--threads", type=positive_int, default=1, help="concurrent runs"
    )
    parser.add_argument("--config", help="JSON file with option sections")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    bounds = commands.add_parser("bounds", help="sample complexity tables")
    bounds.add_argument("--preset", choices=["reference", "sweep"])
    add_levels(bounds, many=True)
    bounds.add_argument("--m-theta", type=positive_int, nargs="+")
    bounds.add_argument("--n", type=positive_int, nargs="+")
    bounds.set_defaults(handler=cmd_bounds)

    solve = commands.add_parser("solve", help="solve one scenario program")
    solve.add_argument("problem", type=Path)
    solve.add_argument("--samples", type=samples_arg, default="auto")
    solve.add_argument(
        "--nominal", action="store_true", help="collapse boxes on nominals"
    )
    add_levels(solve)
    add_solver_flags(solve)
    solve.set_defaults(handler=cmd_solve)

    sequential = commands.add_parser(
        "sequential", help="sequential design and validation"
    )
    sequential.add_argument("problem", type=Path)
    add_levels(sequential)
    sequential.add_argument("--k-t", type=int, help="iterations (default 10)")
    sequential.add_argument("--alpha", type=float)
    sequential.add_argument("--a", type=float)
    sequential.add_argument("--repeats", type=int)
    add_solver_flags(sequential)
    sequential.set_defaults(handler=cmd_sequential)

    audit_ = commands.add_parser("audit", help="a-posteriori violation check")
    audit_.add_argument("outcome", type=Path)
    audit_.add_argument("problem", type=Path)
    audit_.add_argument("--samples", type=int, required=True)
    audit_.add_argument("--confidence", type=float, default=0.99)
    audit_.set_defaults(handler=cmd_audit)

    validate = commands.add_parser(
        "validate-file", help="check a problem file"
    )
    validate.add_argument("problem", type=Path)
    validate.set_defaults(handler=cmd_validate_file)
    return parser


def configure_logging(args):
    if args.quiet:
        level = logging.WARNING
    elif args.verbose >= 2:
        level = logging.DEBUG
    else:
        level = logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    configure_logging(args)
    if args.command == "audit" and args.samples < 1:
        parser.error("audit needs --samples >= 1")
    try:
        config = load_config(args.config)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        return args.handler(args, config)
    except ProblemFileError as e:
        logger.error("problem file: %s", e)
        return EXIT_SCHEMA
    except ExprSyntaxError as e:
        logger.error("expression: %s", e)
        return EXIT_SCHEMA
    except (EvaluationError, ModelError) as e:
        logger.error("model: %s", e)
        return EXIT_MODEL
    except ParameterError as e:
        logger.error("parameters: %s", e)
        return EXIT_USAGE
    except SequentialError as e:
        if isinstance(e.__cause__, (EvaluationError, ModelError)):
            logger.error("model: %s", e)
            return EXIT_MODEL
        logger.error("solver: %s", e)
        return EXIT_NUMERICAL
    except SolverError as e:
        logger.error("solver: %s", e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
