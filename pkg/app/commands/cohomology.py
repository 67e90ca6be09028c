"""cohomology: the table of H^{p,s} with Hilbert functions, annihilators and the pi comparison."""

import logging

from app.schemas import CohomologyRecord, JobSpec, Report
from app.utils.koszul_cohomology import (
    annihilator_checks,
    check_pi_iso,
    depth_vanishing,
    induced_derham,
    koszul_cohomology,
)
from app.utils.kd_algebra import build_algebra
from app.utils.spec_loader import load_chart

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("cohomology", help="Koszul cohomology H^{p,s} of a chart")
    parser.add_argument("file", help="chart file")
    parser.add_argument("--pmax", type=int, default=None)
    parser.add_argument("--smax", type=int, default=None)
    parser.add_argument("--deg", type=int, default=None, help="Hilbert function degree bound")
    parser.set_defaults(handler=run, inputs=("file",))


def run(job: JobSpec, settings) -> Report:
    chart = load_chart(job.inputs[0])
    ctx = build_algebra(chart)
    opts = job.options
    p_max = opts.pmax if opts.pmax is not None else settings.p_window(chart.m)
    s_max = opts.smax if opts.smax is not None else settings.s_window(chart.m, chart.l)
    report = Report(command="cohomology", label=chart.label, inputs=list(job.inputs), options=opts.model_dump())
    modules = {}
    for p in range(p_max + 1):
        for s in range(s_max + 1):
            H = koszul_cohomology(ctx, p, s)
            modules[(p, s)] = H
            record = CohomologyRecord(
                p=p,
                s=s,
                strip=H.in_strip,
                ambient_rank=H.ambient_rank,
                generators=H.module.rank,
                relations=len(H.module.relations),
                zero=H.is_zero(),
                hilbert=H.hilbert(opts.deg).graded,
            )
            if not record.strip:
                report.add_check(f"H^{{{p},{s}}} vanishes outside the strip", record.zero)
            if s > 0 and not record.zero:
                ann = annihilator_checks(H, settings.MAX_ANNIHILATOR_POWER)
                record.annihilator = ann.annihilator
                report.add_check(f"f annihilates H^{{{p},{s}}}", ann.f_annihilates)
                report.add_check(
                    f"H^{{{p},{s}}} supported on the critical set",
                    ann.support_ok,
                    f"minor powers {ann.minor_powers}",
                )
            report.cohomology.append(record)
    for p in range(p_max + 1):
        pi = check_pi_iso(ctx, p, opts.deg)
        detail = "" if pi.passed else f"first discrepancy in degree {pi.first_discrepancy}"
        report.add_check(f"H^{{{p},0}} = Omega^{p}_U/S", pi.passed, detail)
    for (p, s), H in modules.items():
        if (p + 1, s) in modules and H.module.rank and modules[(p + 1, s)].module.rank:
            report.add_check(f"d_DR well defined on H^{{{p},{s}}}", induced_derham(ctx, p, s).check_well_defined())
    depth = {}
    for s in range(1, s_max + 1):
        ok, nonzero = depth_vanishing(ctx, s, min(p_max, chart.m))
        depth[f"s={s}"] = "vanishes" if ok else f"nonzero at p={nonzero}"
    report.sections["depth"] = depth
    logger.info("cohomology %s: %d modules, %d failures", chart.label, len(modules), report.counters.failures)
    return report
