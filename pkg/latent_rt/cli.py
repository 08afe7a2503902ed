"""
Command-line entry point: latent-rt simulate | loglik | fit | check | schema.

Structured results go to standard output as JSON; log messages and errors go
to standard error. Exit codes: 0 on success, 1 on errors, 2 when a fit did
not converge (its result is still written).
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from latent_rt.core.config import configure_logging, settings
from latent_rt.core.errors import LatentRTError
from latent_rt.schemas.models import RunConfig
from latent_rt.services.oracle import run_checks
from latent_rt.services.runner import WorkflowRunner, dump_json, read_parameters

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-rt", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default=None, help="Logging level (default: settings.log_level).")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, data: bool = True) -> None:
        p.add_argument("--config", required=True, type=Path, help="RunConfig JSON file.")
        if data:
            p.add_argument("--data", type=Path, help="Dataset CSV (default: io.data).")
        p.add_argument("--threads", type=int, help="Worker threads (default: settings.threads).")

    simulate = sub.add_parser("simulate", help="Simulate a dataset and its truth sidecar.")
    common(simulate, data=False)
    simulate.add_argument("--out", type=Path, help="Output CSV (default: io.out).")
    simulate.add_argument("--seed", type=int, help="Simulation seed (default: simulation.seed).")
    simulate.add_argument("--censor-noncrossed", action="store_true", default=None,
                          help="Leave r_star blank where no crossing occurred.")

    loglik = sub.add_parser("loglik", help="Evaluate the log-likelihood at the configured parameters.")
    common(loglik)
    loglik.add_argument("--quad-order", type=int, help="Gauss-Hermite order.")
    loglik.add_argument("--mc-samples", type=int, help="Draws per subject in monte-carlo mode.")

    fit = sub.add_parser("fit", help="Maximum-likelihood fit.")
    common(fit)
    fit.add_argument("--out", type=Path, help="FitResult JSON (default: io.out, else standard output).")
    fit.add_argument("--quad-order", type=int, help="Gauss-Hermite order.")
    fit.add_argument("--mc-samples", type=int, help="Draws per subject in monte-carlo mode.")
    fit.add_argument("--max-evals", type=int, help="Objective evaluations per Nelder-Mead run.")
    fit.add_argument("--restarts", type=int, help="Nelder-Mead restarts from the best point.")
    fit.add_argument("--seed", type=int, help="Restart jitter seed.")
    fit.add_argument("--init", type=Path, help="Start from these parameters (e.g. a truth sidecar).")

    check = sub.add_parser("check", help="Run the oracle checks.")
    check.add_argument("--level", choices=("quick", "full"), default="quick")
    check.add_argument("--threads", type=int, help="Worker threads (default: settings.threads).")

    sub.add_parser("schema", help="Print the RunConfig JSON schema.")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Reads the run config and applies command-line overrides."""
    config = RunConfig.model_validate_json(args.config.read_text(encoding="utf-8"))
    quadrature: Dict[str, Any] = {}
    optimizer: Dict[str, Any] = {}
    if getattr(args, "quad_order", None) is not None:
        quadrature["order"] = args.quad_order
    if getattr(args, "mc_samples", None) is not None:
        quadrature["mc_samples"] = args.mc_samples
    if getattr(args, "max_evals", None) is not None:
        optimizer["max_evals"] = args.max_evals
    if getattr(args, "restarts", None) is not None:
        optimizer["restarts"] = args.restarts
    if args.command == "fit" and args.seed is not None:
        optimizer["seed"] = args.seed
    if quadrature or optimizer:
        # Round-trip through validation so overrides obey the same bounds
        data = config.model_dump()
        data["quadrature"].update(quadrature)
        data["optimizer"].update(optimizer)
        config = RunConfig.model_validate(data)
    return config


def _write(payload: Any, out: Optional[Path]) -> None:
    text = dump_json(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    runner = WorkflowRunner(load_config(args), args.threads)
    dataset, csv_path, sidecar = runner.simulate(args.out, args.seed, args.censor_noncrossed)
    sys.stdout.write(dump_json({"data": str(csv_path), "truth": str(sidecar), "subjects": len(dataset)}))
    return EXIT_OK


def cmd_loglik(args: argparse.Namespace) -> int:
    runner = WorkflowRunner(load_config(args), args.threads)
    dataset = runner.load(args.data)
    sys.stdout.write(dump_json(runner.loglik(dataset)))
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    config = load_config(args)
    runner = WorkflowRunner(config, args.threads)
    dataset = runner.load(args.data)
    init = read_parameters(args.init) if args.init else None
    result = runner.fit(dataset, init=init)
    _write(result.to_dict(), args.out or (Path(config.io.out) if config.io.out else None))
    if not result.converged:
        print(f"fit did not converge after {result.n_evals} evaluations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    reports = run_checks(args.level, args.threads or settings.threads)
    sys.stdout.write(dump_json([r.to_dict() for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def cmd_schema(args: argparse.Namespace) -> int:
    sys.stdout.write(json.dumps(RunConfig.model_json_schema(), indent=2) + "\n")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "loglik": cmd_loglik,
    "fit": cmd_fit,
    "check": cmd_check,
    "schema": cmd_schema,
}


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"invalid run config: {where}: {first['msg']}"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print(_describe(e), file=sys.stderr)
    except (LatentRTError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
