"""milnor: dim Q[vars]/(d phi), or "infinite"."""

from app.schemas import JobSpec, Report
from app.utils.exact_algebra import make_ring
from app.utils.koszul_cohomology import milnor_number
from app.utils.spec_loader import parse_polynomial, parse_variables


def register(subparsers) -> None:
    parser = subparsers.add_parser("milnor", help="Milnor number of a polynomial")
    parser.add_argument("poly", help='polynomial, e.g. "x^3 + y^3"')
    parser.add_argument("--vars", required=True, help="comma-separated variables, e.g. x,y")
    parser.set_defaults(handler=run, inputs=("poly",))


def run(job: JobSpec, settings) -> Report:
    variables = parse_variables(job.options.vars)
    phi = parse_polynomial(job.inputs[0], make_ring(variables, settings.MONOMIAL_ORDER))
    mu = milnor_number(phi, variables)
    report = Report(command="milnor", label=job.inputs[0], inputs=list(job.inputs), options=job.options.model_dump())
    report.sections["milnor"] = {"polynomial": str(phi), "variables": ",".join(variables), "mu": str(mu)}
    return report
