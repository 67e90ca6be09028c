"""kdr - command-line entry point: logging setup, dispatch and exit codes."""

import argparse
import logging
import sys
from typing import List, Optional

from app.commands import register_all
from app.config import get_settings
from app.schemas import JobOptions, JobSpec, Report
from app.utils.errors import KDRError, SpecError
from app.utils.export_results import emit_report, render_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdr", description="Exact Koszul–De Rham computations on relative charts")
    parser.add_argument("--out", default=None, help="report directory (default: REPORT_DIR)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_all(subparsers)
    return parser


def job_from_args(args: argparse.Namespace, settings) -> JobSpec:
    """JobSpec from parsed arguments; unset flags fall back to the settings."""
    inputs = [getattr(args, name) for name in args.inputs]
    vars_ = getattr(args, "vars", None)
    options = JobOptions(
        samples=getattr(args, "samples", None) if getattr(args, "samples", None) is not None else settings.SAMPLES,
        seed=getattr(args, "seed", None) if getattr(args, "seed", None) is not None else settings.SEED,
        pmax=getattr(args, "pmax", None),
        smax=getattr(args, "smax", None),
        deg=getattr(args, "deg", None) if getattr(args, "deg", None) is not None else settings.DEGREE_BOUND,
        vars=[v.strip() for v in vars_.split(",") if v.strip()] if vars_ else [],
    )
    return JobSpec(command=args.command, inputs=inputs, options=options)


def run_suite(job: JobSpec, handler, settings) -> Report:
    """Run one command; inner errors propagate with the job as context."""
    logger.info("running %s on %s", job.command, ", ".join(job.inputs))
    return handler(job, settings)


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, (args.log_level or settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        job = job_from_args(args, settings)
        report = run_suite(job, args.handler, settings)
    except SpecError as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except KDRError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_FAILED
    except Exception as exc:
        logger.exception("Unhandled exception: %s", exc)
        return EXIT_FAILED

    if getattr(args, "emit", True):
        emit_report(report, args.out or settings.REPORT_DIR)
    sys.stdout.write(render_text(report))
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
