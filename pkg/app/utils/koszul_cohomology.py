"""
Koszul cohomology H^{p,s} of a chart and the structures built on it.

H^{p,s} = Ker(koszul: K^{p,s} -> K^{p,s-1}) / koszul(K^{p,s+1}), presented as
a finitely presented module over the chart ring. Around it:
- induced_derham: the De Rham operator on classes, with a well-definedness check
- check_pi_iso: H^{p,0} against the direct presentation of Omega^p_{U/S}
- annihilator_checks: f_i H = 0 and support in the critical set (s > 0)
- glue_compare: two presentations of the same U compared through the product chart
- milnor_number: Jacobian-algebra dimension oracle
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy.polys.rings import PolyElement

from app.utils.charts import (
    critical_ideal,
    identification_is_valid,
    product_chart,
    pullback_diamond,
    reduce_to,
)
from app.utils.errors import BrokenComplexError, NotEliminableError, WellDefinednessError
from app.utils.exact_algebra import (
    FPModule,
    HilbertFunction,
    Ideal,
    Submodule,
    Vector,
    make_ring,
    monomials_of_degree,
    module_kernel,
    quotient_presentation,
    staircase,
    substitute,
)
from app.utils.kd_algebra import (
    BasedChart,
    KDContext,
    KDElement,
    apply_diff,
    build_algebra,
    component_basis,
    element_to_vector,
    kd_mul,
    operator_matrix,
    random_polynomial,
    vector_to_element,
)

logger = logging.getLogger(__name__)


@dataclass
class CohomologyModule:
    """H^{p,s} of one chart with the kernel and image generators kept for audit."""

    ctx: KDContext
    p: int
    s: int
    module: FPModule
    kernel_gens: List[Vector]
    image_gens: List[Vector]
    _hilbert: Dict[int, HilbertFunction] = field(default_factory=dict, repr=False)

    @property
    def in_strip(self) -> bool:
        return self.p >= 0 and self.s >= 0 and -self.ctx.l <= self.p - self.s <= self.ctx.m

    @property
    def ambient_rank(self) -> int:
        return len(component_basis(self.ctx, self.p, self.s))

    def hilbert(self, bound: int) -> HilbertFunction:
        if bound not in self._hilbert:
            self._hilbert[bound] = self.module.hilbert_function(bound)
        return self._hilbert[bound]

    def is_zero(self) -> bool:
        return self.module.is_zero()

    def generator_elements(self) -> List[KDElement]:
        return [vector_to_element(self.ctx, self.p, self.s, g) for g in self.module.generators]


def koszul_cohomology(ctx: KDContext, p: int, s: int, prune: Optional[bool] = None) -> CohomologyModule:
    """Ker / Im of the Koszul differential at (p, s). Generators are pruned for s > 0 by default."""
    ring = ctx.ring
    rank = len(component_basis(ctx, p, s))
    if rank == 0:
        return CohomologyModule(ctx, p, s, FPModule(ring, 0, []), [], [])
    if s == 0:
        kernel = [[ring.one if i == j else ring.zero for i in range(rank)] for j in range(rank)]
    else:
        kernel = module_kernel(operator_matrix(ctx, "koszul", p, s))
    image = operator_matrix(ctx, "koszul", p, s + 1).columns()
    try:
        module = quotient_presentation(kernel, image, rank, ring, prune=(s > 0) if prune is None else prune)
    except BrokenComplexError:
        logger.error("koszul image not in kernel at (%d,%d) on %s", p, s, ctx.chart.label)
        raise
    logger.debug("H^{%d,%d}(%s): %d generators, %d relations", p, s, ctx.chart.label, module.rank, len(module.relations))
    return CohomologyModule(ctx, p, s, module, kernel, [b for b in image if any(b)])


class InducedDeRham:
    """d_DR on classes: H^{p,s} -> H^{p+1,s}."""

    def __init__(self, source: CohomologyModule, target: CohomologyModule):
        self.source = source
        self.target = target
        ctx = source.ctx
        self._target_span = Submodule(
            ctx.ring,
            target.ambient_rank,
            list(target.module.generators) + list(target.image_gens),
        )
        self._target_image = Submodule(ctx.ring, target.ambient_rank, target.image_gens)

    def _derham(self, vector: Sequence[PolyElement]) -> Vector:
        # d_DR is not O-linear: d(g e) = dg ^ e + g de, so it acts on elements
        src = self.source
        element = vector_to_element(src.ctx, src.p, src.s, vector)
        return element_to_vector(apply_diff(element, "derham"), src.p + 1, src.s)

    def apply_vector(self, representative: Sequence[PolyElement]) -> Vector:
        """Coefficients on the target generators of the class of d_DR(representative)."""
        if self.target.module.rank == 0:
            return []
        image = self._derham(representative)
        cofactors = self._target_span.lift(image)
        if cofactors is None:
            raise WellDefinednessError(
                f"d_DR does not map Ker into Ker at ({self.source.p},{self.source.s})"
            )
        return cofactors[: self.target.module.rank]

    def apply(self, coefficients: Sequence[PolyElement]) -> Vector:
        ring = self.source.ctx.ring
        rep = [ring.zero] * self.source.ambient_rank
        for c, g in zip(coefficients, self.source.module.generators):
            if c:
                rep = [r + c * x for r, x in zip(rep, g)]
        return self.apply_vector(rep)

    def matrix_columns(self) -> List[Vector]:
        return [self.apply_vector(g) for g in self.source.module.generators]

    def is_zero_map(self, bound: int = 1) -> bool:
        """Zero on every monomial multiple, up to total degree bound, of every source generator."""
        ring = self.source.ctx.ring
        for g in self.source.module.generators:
            for d in range(bound + 1):
                for mono in monomials_of_degree(ring.ngens, d):
                    m = ring.from_dict({mono: 1})
                    if not self.target.module.is_zero_class(self.apply_vector([m * x for x in g])):
                        return False
        return True

    def check_well_defined(self) -> bool:
        """d_DR of every image generator of the source lies in the target image."""
        return all(self._target_image.contains(self._derham(b)) for b in self.source.image_gens)


def induced_derham(ctx: KDContext, p: int, s: int) -> InducedDeRham:
    source = koszul_cohomology(ctx, p, s)
    target = koszul_cohomology(ctx, p + 1, s)
    induced = InducedDeRham(source, target)
    if source.module.rank and target.module.rank and not induced.check_well_defined():
        raise WellDefinednessError(f"induced d_DR is not well defined at ({p},{s}) on {ctx.chart.label}")
    return induced


# --- pi comparison ---
def relative_forms_module(ctx: KDContext, p: int) -> FPModule:
    """Omega^p_{U/S} = Omega^p_{W/S} / (f_i Omega^p + df_i ^ Omega^{p-1}) on the dz_W basis."""
    ring = ctx.ring
    basis = component_basis(ctx, p, 0)
    rank = len(basis)
    if rank == 0:
        return FPModule(ring, 0, [])
    relations = []
    for fi in ctx.chart.f:
        for j in range(rank):
            relations.append([fi if k == j else ring.zero for k in range(rank)])
    for fi in ctx.chart.f:
        dfi = apply_diff(ctx.scalar(fi), "derham")
        for sym in component_basis(ctx, p - 1, 0):
            product = kd_mul(dfi, ctx.basis_element(sym))
            if product:
                relations.append(element_to_vector(product, p, 0))
    generators = [[ring.one if k == j else ring.zero for k in range(rank)] for j in range(rank)]
    return FPModule(ring, rank, relations, generators)


@dataclass
class PiIsoReport:
    """H^{p,0} against Omega^p_{U/S} to a degree bound."""

    chart: str
    p: int
    bound: int
    koszul_hilbert: List[int]
    forms_hilbert: List[int]
    first_discrepancy: Optional[int]
    derham_matches: bool

    @property
    def passed(self) -> bool:
        return self.first_discrepancy is None and self.derham_matches


def check_pi_iso(ctx: KDContext, p: int, bound: int = 10) -> PiIsoReport:
    h = koszul_cohomology(ctx, p, 0)
    forms = relative_forms_module(ctx, p)
    hf_k = h.hilbert(bound)
    hf_f = forms.hilbert_function(bound)
    first = hf_k.first_difference(hf_f)

    # induced d_DR on H^{p,0} against the relative exterior derivative on Omega^p_{U/S}
    derham_matches = True
    if h.module.rank and p < ctx.m:
        induced = InducedDeRham(h, koszul_cohomology(ctx, p + 1, 0))
        forms_next = relative_forms_module(ctx, p + 1)
        ring = ctx.ring
        for j, sym in enumerate(component_basis(ctx, p, 0)):
            for g in [ring.one] + list(ring.gens):
                rep = [g if k == j else ring.zero for k in range(h.ambient_rank)]
                via_classes = induced.apply_vector(rep)
                direct = element_to_vector(apply_diff(ctx.basis_element(sym, g), "derham"), p + 1, 0)
                if not forms_next.is_zero_class([a - b for a, b in zip(via_classes, direct)]):
                    derham_matches = False
    logger.info("pi comparison on %s, p=%d: discrepancy at %s", ctx.chart.label, p, first)
    return PiIsoReport(ctx.chart.label, p, bound, hf_k.graded, hf_f.graded, first, derham_matches)


# --- annihilators ---
@dataclass
class AnnihilatorReport:
    """f-annihilation and critical-set support certificates for one H^{p,s}."""

    chart: str
    p: int
    s: int
    f_annihilates: bool
    support_checked: bool
    support_ok: bool
    minor_powers: List[Optional[int]] = field(default_factory=list)
    annihilator: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.f_annihilates and (self.support_ok or not self.support_checked)


def _annihilates(H: CohomologyModule, g: PolyElement) -> bool:
    mod = H.module
    return all(
        mod.is_zero_class([g if k == j else mod.ring.zero for k in range(mod.rank)])
        for j in range(mod.rank)
    )


def annihilator_checks(H: CohomologyModule, max_power: int = 4) -> AnnihilatorReport:
    chart = H.ctx.chart
    f_ok = all(_annihilates(H, fi) for fi in chart.f)
    support_checked = H.s > 0
    powers: List[Optional[int]] = []
    support_ok = True
    if support_checked and H.module.rank:
        for minor in critical_ideal(chart).generators:
            found = None
            power = minor
            for e in range(1, max_power + 1):
                if _annihilates(H, power):
                    found = e
                    break
                power = power * minor
            powers.append(found)
            support_ok = support_ok and found is not None
    ann = H.module.annihilator() if H.module.rank else Ideal(chart.ring, [chart.ring.one])
    return AnnihilatorReport(
        chart.label, H.p, H.s, f_ok, support_checked, support_ok, powers,
        [str(g) for g in ann.groebner()],
    )


def ideals_equal(a: Ideal, b: Ideal) -> bool:
    """Two-sided membership check."""
    return all(b.contains(g) for g in a.generators) and all(a.contains(g) for g in b.generators)


# --- gluing ---
@dataclass
class GlueReport:
    """Comparison of H^{p,s} for two presentations of the same U."""

    chart_a: str
    chart_b: str
    p: int
    s: int
    bound: int
    identification_valid: bool = False
    hilbert_a: List[int] = field(default_factory=list)
    hilbert_b: List[int] = field(default_factory=list)
    hilbert_reduced_a: List[int] = field(default_factory=list)
    hilbert_reduced_b: List[int] = field(default_factory=list)
    derham_commutes: bool = False
    steps_a: List[str] = field(default_factory=list)
    steps_b: List[str] = field(default_factory=list)
    stuck: str = ""

    @property
    def equal(self) -> bool:
        return (
            not self.stuck
            and self.identification_valid
            and self.hilbert_a == self.hilbert_b == self.hilbert_reduced_a == self.hilbert_reduced_b
            and self.derham_commutes
        )


def _commutes_with_derham(morphism, ctx: KDContext, p: int, s: int, rng: np.random.Generator, samples: int) -> bool:
    basis = component_basis(ctx, p, s)
    if not basis:
        return True
    for _ in range(samples):
        a = ctx.zero()
        for sym in basis:
            a = a + ctx.basis_element(sym, random_polynomial(ctx.ring, rng, degree=2, n_terms=2))
        lhs = pullback_diamond(morphism, a.derham())
        rhs = pullback_diamond(morphism, a).derham()
        if lhs != rhs:
            return False
        if pullback_diamond(morphism, a.koszul()) != pullback_diamond(morphism, a).koszul():
            return False
    return True


def glue_compare(
    chart_a: BasedChart,
    chart_b: BasedChart,
    p: int,
    s: int,
    bound: int = 10,
    identification: Optional[Dict[str, PolyElement]] = None,
    seed: int = 0,
    samples: int = 5,
) -> GlueReport:
    """Product chart, reduction toward each factor, Hilbert functions and d_DR commutation."""
    report = GlueReport(chart_a.label, chart_b.label, p, s, bound)
    product, renaming = product_chart(chart_a, chart_b, identification)
    report.identification_valid = identification_is_valid(chart_a, chart_b, product, renaming)
    try:
        reduced_a, iota_a, steps_a = reduce_to(product, chart_a.fiber_vars)
        reduced_b, iota_b, steps_b = reduce_to(product, [renaming[v] for v in chart_b.fiber_vars])
    except NotEliminableError as exc:
        report.stuck = str(exc)
        logger.warning("glue %s / %s: %s", chart_a.label, chart_b.label, exc)
        return report
    report.steps_a = [f"f[{st.relation}] / {st.variable}" for st in steps_a]
    report.steps_b = [f"f[{st.relation}] / {st.variable}" for st in steps_b]

    report.hilbert_a = koszul_cohomology(build_algebra(chart_a), p, s).hilbert(bound).graded
    report.hilbert_b = koszul_cohomology(build_algebra(chart_b), p, s).hilbert(bound).graded
    report.hilbert_reduced_a = koszul_cohomology(build_algebra(reduced_a), p, s).hilbert(bound).graded
    report.hilbert_reduced_b = koszul_cohomology(build_algebra(reduced_b), p, s).hilbert(bound).graded

    rng = np.random.default_rng(seed)
    ctx_p = build_algebra(product)
    report.derham_commutes = all(
        iota is None or _commutes_with_derham(iota, ctx_p, p, s, rng, samples)
        for iota in (iota_a, iota_b)
    )
    logger.info("glue %s / %s at (%d,%d): equal=%s", chart_a.label, chart_b.label, p, s, report.equal)
    return report


# --- Milnor number ---
def milnor_number(phi: PolyElement, variables: Sequence[str]) -> Union[int, str]:
    """dim_Q Q[vars]/(d phi); "infinite" for an unbounded staircase."""
    names = [str(s) for s in phi.ring.symbols]
    missing = [v for v in variables if v not in names]
    if missing:
        raise ValueError(f"variables {missing} not in the ring of {phi}")
    ring = make_ring(list(variables), str(phi.ring.order))
    images = []
    for i, name in enumerate(names):
        if name in variables:
            images.append(ring.gens[list(variables).index(name)])
        elif any(m[i] for m in phi.keys()):
            raise ValueError(f"{phi} depends on {name}, which is not a listed variable")
        else:
            images.append(ring.zero)
    poly = substitute(phi, images, ring)
    jacobian = Ideal(ring, [poly.diff(z) for z in ring.gens])
    stairs = staircase(jacobian.groebner())
    return "infinite" if stairs is None else len(stairs)


# --- tables ---
def cohomology_table(ctx: KDContext, p_max: int, s_max: int) -> List[CohomologyModule]:
    return [koszul_cohomology(ctx, p, s) for p in range(p_max + 1) for s in range(s_max + 1)]


def depth_vanishing(ctx: KDContext, s: int, p_max: Optional[int] = None) -> Tuple[bool, List[int]]:
    """
    Whether H^{p,s} = 0 for 0 <= p <= p_max (default m); returns the offending p.
    Beyond p = m the top of the eta-complex is a cokernel and need not vanish.
    """
    p_max = ctx.m if p_max is None else p_max
    nonzero = [
        p for p in range(0, p_max + 1)
        if p - s >= -ctx.l and not koszul_cohomology(ctx, p, s).is_zero()
    ]
    return (not nonzero, nonzero)
