"""verify: chart validity and the identity suite of the Koszul–De Rham algebra."""

import logging

from app.schemas import JobSpec, Report
from app.utils.cech_complex import AtlasSpec, build_based_lifting
from app.utils.charts import validate_chart
from app.utils.kd_algebra import BasedChart, build_algebra, identity_suite
from app.utils.spec_loader import load_spec

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="check every differential identity on random elements")
    parser.add_argument("file", help="chart or atlas file")
    parser.add_argument("--samples", type=int, default=None, help="random elements per chart")
    parser.add_argument("--seed", type=int, default=None)
    parser.set_defaults(handler=run, inputs=("file",))


def _verify_chart(report: Report, chart: BasedChart, samples: int, seed: int) -> None:
    diagnostics = validate_chart(chart)
    report.add_check(f"{chart.label}: regular sequence", diagnostics.regular, diagnostics.message)
    report.add_check(f"{chart.label}: codimension", diagnostics.codim_ok, f"{diagnostics.relations} relations")
    for result in identity_suite(build_algebra(chart), samples, seed):
        detail = f"{result.samples} samples" if result.passed else f"{result.failures} failures, e.g. {result.witness}"
        report.add_check(f"{chart.label}: {result.name}", result.passed, detail)


def run(job: JobSpec, settings) -> Report:
    spec = load_spec(job.inputs[0])
    report = Report(command="verify", label=spec.label, inputs=list(job.inputs), options=job.options.model_dump())
    if isinstance(spec, AtlasSpec):
        lifting = build_based_lifting(spec, strict=settings.STRICT_TRANSITIVITY)
        for K in lifting.nerve:
            _verify_chart(report, lifting.charts[K], job.options.samples, job.options.seed)
        report.add_check("h-transitivity", lifting.transitive, f"{len(lifting.defects)} failing chains")
    else:
        _verify_chart(report, spec, job.options.samples, job.options.seed)
    logger.info("verify %s: %d checks, %d failures", spec.label, report.counters.checks, report.counters.failures)
    return report
