"""
Streamix command line
=====================

::

    python -m app.cli run --algorithm hard --k 2 --d 5 --C 8 --sigma 0 --init true-means --N 100
    python -m app.cli sweep --axis N --values 25000,50000,100000,200000 --repeats 10 --init true-means
    python -m app.cli compare --C 3 --N 200000 --repeats 20
    python -m app.cli initcheck --k 4 --d 20 --C 8
    python -m app.cli floor --C 4 --k 2 --d 2
    python -m app.cli decompose --algorithm soft --C 8 --init true-means --values 10000,20000,40000,80000

Exit codes: 0 success, 2 initialization failed after retries, 3 invalid
configuration, 1 any other reported failure. Failures are also written to
stderr as one JSON object.
"""
import json
import logging
import sys
from argparse import ArgumentParser
from typing import Any, Dict, List, Optional
from pydantic import ValidationError
from app.core.config import settings
from app.core.errors import ConfigError, InitFailureError, StreamixError
from app.schemas.experiment import RunConfig, SweepRequest
from app.services import artifacts, harness

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INIT_FAILURE = 2
EXIT_CONFIG_ERROR = 3

# flag dest -> RunConfig field
RUN_FLAGS = [
    "algorithm", "k", "d", "C", "sigma", "N", "N0", "seed", "init_mode", "delta", "placement",
    "noise_kind", "weights", "block_size_B", "retained_count", "trace_stride", "max_init_retries",
    "eta", "sigma_known", "temperature", "out_dir",
]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_run_flags(parser: ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with flat keys named like the flags; flags override it")
    parser.add_argument("--algorithm", choices=["hard", "soft"])
    parser.add_argument("--k", type=int)
    parser.add_argument("--d", type=int)
    parser.add_argument("--C", type=float, help="separation of the closest pair of means, in units of sigma")
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--N", type=int, help="streaming steps after initialization")
    parser.add_argument("--N0", type=int, help="samples given to InitAlg")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--init", dest="init_mode", choices=["initalg", "true-means", "perturbed"])
    parser.add_argument("--delta", type=float, help="perturbation radius in units of sigma")
    parser.add_argument("--placement", choices=["simplex-scaled", "random-rotated", "axis-aligned"])
    parser.add_argument("--noise", dest="noise_kind", choices=["gaussian", "uniform-ball", "rademacher-scaled"])
    parser.add_argument("--weights", type=_float_list, help="comma separated mixture weights")
    parser.add_argument("--block-size", dest="block_size_B", type=int)
    parser.add_argument("--retained-count", dest="retained_count", type=int)
    parser.add_argument("--trace-stride", dest="trace_stride", type=int)
    parser.add_argument("--max-init-retries", dest="max_init_retries", type=int)
    parser.add_argument("--eta", type=float, help="override the learning rate")
    parser.add_argument("--sigma-unknown", dest="sigma_known", action="store_false", default=None)
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--out-dir", dest="out_dir", nargs="?", const=settings.OUT_DIR,
                        help=f"artifact directory; given without a value it is {settings.OUT_DIR}")
    parser.add_argument("--workers", type=int, help="worker pool size (default STREAMIX_THREADS)")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser("app.cli", description="Streaming mixture clustering experiments")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("run", help="one run: generate, initialize, stream, report"))

    sweep = sub.add_parser("sweep", help="repeat runs across values of N, C or d")
    _add_run_flags(sweep)
    sweep.add_argument("--axis", choices=["N", "C", "d"], required=True)
    sweep.add_argument("--values", type=_float_list, required=True)
    sweep.add_argument("--repeats", type=int, default=1)

    compare = sub.add_parser("compare", help="hard against soft updates on identical streams")
    _add_run_flags(compare)
    compare.add_argument("--repeats", type=int, default=20)

    _add_run_flags(sub.add_parser("initcheck", help="InitAlg alone, checked against C sigma / 20"))

    floor = sub.add_parser("floor", help="approximation floor of population Lloyd's")
    _add_run_flags(floor)
    floor.add_argument("--trials", type=int, default=200_000)

    decomposition = sub.add_parser("decompose", help="floor, variance and bias proxies from paired N-sweeps")
    _add_run_flags(decomposition)
    decomposition.add_argument("--values", type=_float_list, required=True, help="comma separated values of N")
    decomposition.add_argument("--repeats", type=int, default=20)
    return parser


def load_config(args: Any) -> RunConfig:
    values: Dict[str, Any] = {}
    if args.config:
        try:
            values.update(artifacts.read_json(args.config))
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config file {args.config}: {e}")
    for name in RUN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return RunConfig(**values)


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _fail(code: int, error: Dict[str, Any]) -> int:
    print(json.dumps(error), file=sys.stderr)
    return code


def dispatch(args: Any) -> int:
    config = load_config(args)
    out_dir = config.out_dir
    if args.command == "run":
        outcome = harness.execute_run(config, out_dir=out_dir)
        _emit(outcome.summary.model_dump())
    elif args.command == "sweep":
        report = harness.sweep(
            SweepRequest(base=config, axis=args.axis, values=args.values, repeats=args.repeats, workers=args.workers),
            out_dir=out_dir,
        )
        _emit({"summary": [p.model_dump() for p in report.summary],
               "rate_fit": report.rate_fit.model_dump() if report.rate_fit else None,
               "failed_cells": [c.index for c in report.cells if c.status != "ok"]})
    elif args.command == "compare":
        _emit(harness.compare(config, repeats=args.repeats, workers=args.workers, out_dir=out_dir).model_dump())
    elif args.command == "initcheck":
        report = harness.init_check(config)
        if out_dir:
            artifacts.write_json(report.model_dump(), f"{out_dir}/initcheck.json")
        _emit(report.model_dump())
    elif args.command == "floor":
        report = harness.floor(config, trials=args.trials)
        if out_dir:
            artifacts.write_json(report.model_dump(), f"{out_dir}/floor.json")
        _emit(report.model_dump())
    elif args.command == "decompose":
        report = harness.decomposition(config, args.values, repeats=args.repeats, workers=args.workers, out_dir=out_dir)
        _emit(report.model_dump())
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)
    try:
        return dispatch(args)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        return _fail(EXIT_CONFIG_ERROR, {"error": ConfigError.code, "message": messages, "detail": {}})
    except ConfigError as e:
        return _fail(EXIT_CONFIG_ERROR, e.to_dict())
    except InitFailureError as e:
        return _fail(EXIT_INIT_FAILURE, e.to_dict())
    except StreamixError as e:
        return _fail(EXIT_FAILURE, e.to_dict())
    except Exception as e:
        logger.error(f"Command {args.command} crashed: {e}", exc_info=True)
        return _fail(EXIT_FAILURE, {"error": "internal", "message": str(e), "detail": {"type": type(e).__name__}})


if __name__ == "__main__":
    sys.exit(main())
