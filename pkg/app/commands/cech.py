"""cech: based lifting of an atlas, lifted coboundary identities, TR ranks and De Rham cohomology."""

import logging

from app.schemas import JobSpec, Report
from app.utils.cech_complex import (
    FORMS,
    FULL,
    coboundary_square,
    commutes_with_koszul,
    build_based_lifting,
    intersection_chart,
    les_check,
    pi_chain_map_check,
    total_cohomology,
    totalize_truncate,
)
from app.utils.errors import ChartDefinitionError
from app.utils.spec_loader import load_atlas

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("cech", help="lifted Cech complexes of an atlas")
    parser.add_argument("file", help="atlas file")
    parser.add_argument("--pmax", type=int, default=None)
    parser.add_argument("--smax", type=int, default=None)
    parser.add_argument("--deg", type=int, default=None, help="slice weight bound for total cohomology")
    parser.set_defaults(handler=run, inputs=("file",))


def run(job: JobSpec, settings) -> Report:
    spec = load_atlas(job.inputs[0])
    opts = job.options
    report = Report(command="cech", label=spec.label, inputs=list(job.inputs), options=opts.model_dump())
    lifting = build_based_lifting(spec, strict=settings.STRICT_TRANSITIVITY)
    p_max = opts.pmax if opts.pmax is not None else 1
    s_max = opts.smax if opts.smax is not None else 3
    q_top = max((len(K) for K in lifting.nerve), default=0) - 1

    for K in lifting.nerve:
        try:
            chart = intersection_chart(lifting, K)
            report.add_check(f"{chart.label}: regular of codimension {chart.l}", True)
        except ChartDefinitionError as exc:
            report.add_check(f"U{list(K)}: intersection chart", False, str(exc))

    report.add_check("h-transitivity", lifting.transitive, f"{len(lifting.defects)} failing chains")
    report.sections["transitivity"] = [
        f"{[list(K) for K in d.chain]}: {'; '.join(d.entries)} (in ideal: {d.holds_modulo_ideal})"
        for d in lifting.defects
    ]
    for d in lifting.defects:
        report.add_check(f"defect {[list(K) for K in d.chain]} lies in the ideal of f_I", d.holds_modulo_ideal)

    witness = []
    for p in range(p_max + 1):
        for s in range(s_max + 1):
            for q in range(q_top + 1):
                ok, blocks = coboundary_square(lifting, p, s, q)
                report.add_check(f"delta^2 = 0 at (p,s,q)=({p},{s},{q})", ok)
                witness.extend(f"({p},{s},{q}) {b}" for b in blocks)
            for q in range(q_top + 1):
                if s > 0:
                    report.add_check(
                        f"delta commutes with koszul at (p,s,q)=({p},{s},{q})",
                        commutes_with_koszul(lifting, p, s, q),
                    )
    report.sections["coboundary_square"] = witness

    ranks = {}
    for p in range(p_max + 1):
        complex_ = totalize_truncate(lifting, p, FULL)
        report.add_check(f"TR p={p}: strip", complex_.strip_ok)
        report.add_check(f"TR p={p}: ranks match closed form", complex_.ranks() == complex_.closed_form_ranks())
        report.add_check(f"TR p={p}: D^2 = 0", complex_.square_zero())
        report.add_check(f"pi is a chain map at p={p}", pi_chain_map_check(lifting, p))
        ranks[f"p={p}"] = {str(n): r for n, r in complex_.ranks().items()}
    report.sections["tr_ranks"] = ranks

    de_rham = totalize_truncate(lifting, variant=FORMS, triple=True, p_max=len(spec.model_vars))
    bound = opts.deg
    cohomology = total_cohomology(de_rham, bound)
    while not cohomology.stabilized and bound < settings.STABILIZATION_BOUND:
        bound += 1
        cohomology = total_cohomology(de_rham, bound)
    report.sections["de_rham"] = {
        f"H^{n}": f"dims {dc.dims} graded {dc.graded} stabilized {dc.stabilized}"
        + ("" if dc.stabilized else f" (wider primitives: {dc.dims_next})")
        for n, dc in cohomology.degrees.items()
    }
    report.add_check("De Rham cohomology stabilized", cohomology.stabilized, f"bound {bound}")

    if len(lifting.nerve) == 1:
        les = {}
        for p in range(p_max + 1):
            result = les_check(lifting, p, opts.deg)
            report.add_check(f"exact triangle at p={p}", result.passed, "; ".join(result.mismatches[:3]))
            les[f"p={p}"] = "ok" if result.passed else result.mismatches
        report.sections["exact_triangle"] = les
    logger.info("cech %s: %d checks, %d failures", spec.label, report.counters.checks, report.counters.failures)
    return report
