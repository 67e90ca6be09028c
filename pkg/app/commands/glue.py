"""glue: compare H^{p,s} of two presentations of the same U through their product chart."""

import logging

from app.schemas import JobSpec, Report
from app.utils.koszul_cohomology import glue_compare
from app.utils.spec_loader import load_chart

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("glue", help="basis independence of Koszul cohomology")
    parser.add_argument("file_a", help="first chart file")
    parser.add_argument("file_b", help="second chart file")
    parser.add_argument("--pmax", type=int, default=None)
    parser.add_argument("--smax", type=int, default=None)
    parser.add_argument("--deg", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.set_defaults(handler=run, inputs=("file_a", "file_b"))


def run(job: JobSpec, settings) -> Report:
    a, b = load_chart(job.inputs[0]), load_chart(job.inputs[1])
    opts = job.options
    p_max = opts.pmax if opts.pmax is not None else min(a.m, b.m)
    s_max = opts.smax if opts.smax is not None else 1
    report = Report(command="glue", label=f"{a.label}+{b.label}", inputs=list(job.inputs), options=opts.model_dump())
    details = {}
    for p in range(p_max + 1):
        for s in range(s_max + 1):
            result = glue_compare(a, b, p, s, opts.deg, seed=opts.seed)
            detail = result.stuck or f"hilbert {result.hilbert_a} / {result.hilbert_b}"
            report.add_check(f"H^{{{p},{s}}} agrees", result.equal, detail)
            details[f"({p},{s})"] = {
                "identification_valid": result.identification_valid,
                "reduced": [result.hilbert_reduced_a, result.hilbert_reduced_b],
                "steps": [result.steps_a, result.steps_b],
                "derham_commutes": result.derham_commutes,
            }
    report.sections["glue"] = details
    logger.info("glue %s: %d failures", report.label, report.counters.failures)
    return report
