"""
Based relative charts as data and the maps between them.

Implements:
- validate_chart: codimension count and regular-sequence certificate
- ChartMorphism (w, h) with w*(f) = h f' checked at construction
- pullback_diamond: the bi-dg-algebra map w<> between KD algebras
- compose_morphisms, identity_morphism
- difference_quotients: telescoping F_ij with Phi(z') - Phi(z) = sum F_ij (z'_j - z_j)
- reduction_step: eliminate one relation together with one fiber variable
- product_chart: the joint chart over two presentations of the same U
- critical_ideal: maximal Jacobian minors of Phi reduced modulo f
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.rings import PolyElement, PolyRing

from app.utils.errors import ChartMismatchError, MorphismError, NotEliminableError
from app.utils.exact_algebra import (
    Ideal,
    PolyMatrix,
    jacobian_minors,
    make_ring,
    module_kernel,
    poly_arith,
    substitute,
)
from app.utils.kd_algebra import BasedChart, KDContext, KDElement, build_algebra, kd_mul

logger = logging.getLogger(__name__)


@dataclass
class ChartDiagnostics:
    """Outcome of validate_chart."""

    label: str
    relations: int
    declared_codim: Optional[int]
    codim_ok: bool
    proper: bool
    regular: bool
    failed_at: Optional[int] = None
    message: str = ""


def _is_nonzerodivisor(g: PolyElement, previous: Sequence[PolyElement]) -> bool:
    """g is a nonzerodivisor mod (previous) iff every syzygy of [g, previous] has first entry in (previous)."""
    ring = g.ring
    if not previous:
        return bool(g)
    ideal = Ideal(ring, list(previous))
    row = PolyMatrix.from_columns(ring, 1, [[g]] + [[p] for p in previous])
    return all(ideal.contains(v[0]) for v in module_kernel(row))


def validate_chart(chart: BasedChart) -> ChartDiagnostics:
    proper = not Ideal(chart.ring, list(chart.f)).is_unit() if chart.f else True
    codim_ok = chart.codim is None or chart.codim == chart.l
    failed_at = None
    for i, fi in enumerate(chart.f):
        if not _is_nonzerodivisor(fi, chart.f[:i]):
            failed_at = i
            break
    regular = proper and failed_at is None
    if not proper:
        message = "relations generate the unit ideal"
    elif failed_at is not None:
        message = f"f[{failed_at}] is a zerodivisor modulo the previous relations"
    elif not codim_ok:
        message = f"{chart.l} relations but declared codimension {chart.codim}"
    else:
        message = "regular sequence"
    logger.debug("chart %s: %s", chart.label, message)
    return ChartDiagnostics(chart.label, chart.l, chart.codim, codim_ok, proper, regular, failed_at, message)


def critical_ideal(chart: BasedChart) -> Ideal:
    """Ideal of the critical set of Phi on U: maximal minors in fiber variables, reduced mod f."""
    size = min(chart.k, chart.m)
    if size == 0 or not chart.phi:
        return Ideal(chart.ring, [chart.ring.one])
    minors = jacobian_minors(chart.phi, chart.fiber_gens, size)
    rel = Ideal(chart.ring, list(chart.f))
    return Ideal(chart.ring, [r for r in (rel.reduce(g) for g in minors.generators) if r])


@dataclass
class ChartMorphism:
    """
    Morphism of based charts over S. `w` gives, for every variable of the
    target ring, a polynomial on the source ring; h is l x l' over the source
    ring with w*(f_i) = sum_k h[i][k] f'_k.
    """

    source: BasedChart
    target: BasedChart
    w: List[PolyElement]
    h: List[List[PolyElement]]
    _source_ctx: Optional[KDContext] = field(default=None, repr=False, compare=False)
    _images: Dict[Tuple[str, int], KDElement] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        src, tgt = self.source, self.target
        if list(src.base_vars) != list(tgt.base_vars):
            raise MorphismError(f"base variables differ: {src.base_vars} vs {tgt.base_vars}")
        if len(self.w) != tgt.ring.ngens:
            raise MorphismError("w must give an image for every target variable")
        for b, gen in enumerate(src.base_gens):
            if self.w[tgt.m + b] != gen:
                raise MorphismError(f"base variable {tgt.base_vars[b]} is not mapped identically")
        if len(self.h) != tgt.l or any(len(row) != src.l for row in self.h):
            raise MorphismError(f"h must be {tgt.l}x{src.l}")
        for i, fi in enumerate(tgt.f):
            residual = self.pullback_poly(fi) - sum(
                (hk * fk for hk, fk in zip(self.h[i], src.f)), src.ring.zero
            )
            if residual:
                raise MorphismError(f"w*(f[{i}]) - h f' = {residual} on {tgt.label} <- {src.label}")

    def pullback_poly(self, p: PolyElement) -> PolyElement:
        return substitute(p, self.w, self.source.ring)

    @property
    def source_ctx(self) -> KDContext:
        if self._source_ctx is None:
            self._source_ctx = build_algebra(self.source)
        return self._source_ctx

    def generator_image(self, kind: str, index: int) -> KDElement:
        key = (kind, index)
        if key not in self._images:
            ctx = self.source_ctx
            if kind == "dz":
                self._images[key] = _relative_d(ctx, self.w[index])
            elif kind == "xi":
                self._images[key] = sum(
                    (ctx.xi(k).scale(hk) for k, hk in enumerate(self.h[index]) if hk), ctx.zero()
                )
            else:
                image = ctx.zero()
                for k, hk in enumerate(self.h[index]):
                    if hk:
                        image = image + ctx.eta(k).scale(hk) + kd_mul(_relative_d(ctx, hk), ctx.xi(k))
                self._images[key] = image
        return self._images[key]


def _relative_d(ctx: KDContext, g: PolyElement) -> KDElement:
    out = ctx.zero()
    for j, z in enumerate(ctx.chart.fiber_gens):
        dg = g.diff(z)
        if dg:
            out = out + ctx.dz(j).scale(dg)
    return out


def identity_morphism(chart: BasedChart) -> ChartMorphism:
    ring = chart.ring
    h = [[ring.one if i == k else ring.zero for k in range(chart.l)] for i in range(chart.l)]
    return ChartMorphism(chart, chart, list(ring.gens), h)


def pullback_diamond(m: ChartMorphism, a: KDElement) -> KDElement:
    """w<>: K(target) -> K(source); an algebra map commuting with koszul and derham."""
    if a.ctx.chart != m.target:
        raise ChartMismatchError(f"element lives on {a.ctx.chart.label}, morphism targets {m.target.label}")
    ctx = m.source_ctx
    out = ctx.zero()
    for (w, x, e), g in a.components.items():
        term = ctx.scalar(m.pullback_poly(g))
        for j in w:
            term = kd_mul(term, m.generator_image("dz", j))
        for i in x:
            term = kd_mul(term, m.generator_image("xi", i))
        for i, n in enumerate(e):
            for _ in range(n):
                term = kd_mul(term, m.generator_image("eta", i))
        out = out + term
    return out


def compose_morphisms(m1: ChartMorphism, m2: ChartMorphism) -> ChartMorphism:
    """m1: W' -> W and m2: W'' -> W' give W'' -> W with h = w2*(h1) h2."""
    if m1.source != m2.target:
        raise MorphismError(f"cannot compose: {m1.source.label} != {m2.target.label}")
    ring = m2.source.ring
    w = [m2.pullback_poly(p) for p in m1.w]
    h = [
        [
            sum((m2.pullback_poly(m1.h[i][k]) * m2.h[k][j] for k in range(m1.source.l)), ring.zero)
            for j in range(m2.source.l)
        ]
        for i in range(m1.target.l)
    ]
    return ChartMorphism(m2.source, m1.target, w, h)


# --- difference quotients ---
@dataclass
class DifferenceQuotients:
    """F[i][j] on a ring holding the original variables and primed fiber copies."""

    ring: PolyRing
    phi: List[PolyElement]
    n_vars: int
    primed: List[PolyElement]
    unprimed: List[PolyElement]
    F: List[List[PolyElement]]

    def identity_holds(self) -> bool:
        for i, p in enumerate(self.phi):
            lifted = p.set_ring(self.ring)
            shifted = self._prime(lifted, self.n_vars)
            total = sum(
                (self.F[i][j] * (self.primed[j] - self.unprimed[j]) for j in range(self.n_vars)),
                self.ring.zero,
            )
            if shifted - lifted != total:
                return False
        return True

    def _prime(self, p: PolyElement, upto: int) -> PolyElement:
        images = list(self.ring.gens)
        for j in range(upto):
            images[self.unprimed_index[j]] = self.primed[j]
        return substitute(p, images, self.ring)

    @property
    def unprimed_index(self) -> List[int]:
        return [self.ring.gens.index(z) for z in self.unprimed]

    def evaluate(
        self,
        i: int,
        j: int,
        primed_images: Sequence[PolyElement],
        unprimed_images: Sequence[PolyElement],
        other_images: Dict[int, PolyElement],
        target: PolyRing,
    ) -> PolyElement:
        """F_ij with z' -> primed_images, z -> unprimed_images, remaining variables per other_images."""
        images: List[Optional[PolyElement]] = [None] * self.ring.ngens
        for k, idx in enumerate(self.unprimed_index):
            images[idx] = unprimed_images[k]
        for k, z in enumerate(self.primed):
            images[self.ring.gens.index(z)] = primed_images[k]
        for idx, img in other_images.items():
            images[idx] = img
        return substitute(self.F[i][j], [img if img is not None else target.zero for img in images], target)


def _fresh_name(name: str, taken: set) -> str:
    new = f"{name}'"
    while new in taken:
        new += "'"
    return new


def difference_quotients(phi: Sequence[PolyElement], variables: Sequence[PolyElement]) -> DifferenceQuotients:
    """Telescoping quotients: F_ij = (Phi with z_1..z_j primed - with z_1..z_{j-1} primed) / (z'_j - z_j)."""
    base_ring = variables[0].ring
    names = [str(s) for s in base_ring.symbols]
    taken = set(names)
    primed_names = []
    for z in variables:
        new = _fresh_name(str(base_ring.symbols[base_ring.gens.index(z)]), taken)
        taken.add(new)
        primed_names.append(new)
    ring = make_ring(names + primed_names, str(base_ring.order))
    unprimed = [z.set_ring(ring) for z in variables]
    primed = list(ring.gens[len(names):])
    n = len(variables)
    dq = DifferenceQuotients(ring, list(phi), n, primed, unprimed, [])
    for p in phi:
        lifted = p.set_ring(ring)
        row = []
        previous = lifted
        for j in range(n):
            current = dq._prime(lifted, j + 1)
            row.append(poly_arith(current - previous, primed[j] - unprimed[j], "exact_div"))
            previous = current
        dq.F.append(row)
    return dq


# --- reduction ---
@dataclass
class ReductionResult:
    """Chart with one relation and one fiber variable eliminated, plus the inclusion morphism."""

    chart: BasedChart
    morphism: ChartMorphism
    relation: int
    variable: str


def _eliminable(chart: BasedChart, i: int, j: int) -> bool:
    fi = chart.f[i]
    z = chart.fiber_gens[j]
    dfi = fi.diff(z)
    if not dfi:
        return False
    others = Ideal(chart.ring, [g for k, g in enumerate(chart.f) if k != i])
    reduced = others.reduce(dfi) if others.generators else dfi
    # solving for z must stay polynomial: f_i = c z + r with c constant
    return bool(reduced) and reduced.is_ground and dfi.is_ground


def find_eliminable(chart: BasedChart, variables: Optional[Sequence[str]] = None) -> Optional[Tuple[int, int]]:
    allowed = set(variables) if variables is not None else set(chart.fiber_vars)
    for i in range(chart.l):
        for j, name in enumerate(chart.fiber_vars):
            if name in allowed and _eliminable(chart, i, j):
                return (i, j)
    return None


def reduction_step(chart: BasedChart, i: Optional[int] = None, j: Optional[int] = None) -> ReductionResult:
    """Solve f_i = 0 for a fiber variable z_j and drop both; xi_i, eta_i map to 0."""
    if i is None:
        found = find_eliminable(chart)
        if found is None:
            raise NotEliminableError(f"no relation of {chart.label} is eliminable")
        i, j = found
    elif j is None:
        j = next((k for k in range(chart.m) if _eliminable(chart, i, k)), None)
        if j is None:
            raise NotEliminableError(f"d f[{i}] of {chart.label} has no unit coefficient on any dz")
    elif not _eliminable(chart, i, j):
        raise NotEliminableError(f"f[{i}] of {chart.label} cannot be solved for {chart.fiber_vars[j]}")

    fi, z = chart.f[i], chart.fiber_gens[j]
    c = fi.diff(z)
    rest = fi - c * z
    solved = -rest.quo_ground(c.LC)

    fiber = [v for k, v in enumerate(chart.fiber_vars) if k != j]
    ring = make_ring(fiber + list(chart.base_vars), str(chart.ring.order))
    old_to_new = [
        ring.gens[fiber.index(name)] if name in fiber else None
        for name in chart.fiber_vars
    ] + list(ring.gens[len(fiber):])
    solved_new = substitute(solved, [g if g is not None else ring.zero for g in old_to_new], ring)
    images = [g if g is not None else solved_new for g in old_to_new]

    kept = [k for k in range(chart.l) if k != i]
    new_f = [substitute(chart.f[k], images, ring) for k in kept]
    new_phi = [substitute(p, images, ring) for p in chart.phi]
    codim = chart.codim - 1 if chart.codim is not None else None
    reduced = BasedChart(f"{chart.label}/{chart.fiber_vars[j]}", ring, fiber, list(chart.base_vars), new_phi, new_f, codim)
    h = [
        [ring.one if (row != i and kept.index(row) == col) else ring.zero for col in range(len(kept))]
        for row in range(chart.l)
    ]
    morphism = ChartMorphism(reduced, chart, images, h)
    logger.debug("reduced %s: eliminated f[%d] with %s", chart.label, i, chart.fiber_vars[j])
    return ReductionResult(reduced, morphism, i, chart.fiber_vars[j])


def reduce_to(chart: BasedChart, keep: Sequence[str]) -> Tuple[BasedChart, Optional[ChartMorphism], List[ReductionResult]]:
    """
    Repeatedly eliminate fiber variables outside `keep`. Returns the final
    chart, the composite inclusion into the original chart, and the steps.
    Raises NotEliminableError when the chain gets stuck.
    """
    steps: List[ReductionResult] = []
    current, composite = chart, None
    while any(v not in keep for v in current.fiber_vars):
        found = find_eliminable(current, [v for v in current.fiber_vars if v not in keep])
        if found is None:
            raise NotEliminableError(
                f"stuck at {current.label}: cannot eliminate {[v for v in current.fiber_vars if v not in keep]}"
            )
        step = reduction_step(current, *found)
        steps.append(step)
        composite = step.morphism if composite is None else compose_morphisms(composite, step.morphism)
        current = step.chart
    return current, composite, steps


# --- product chart ---
def product_chart(
    a: BasedChart,
    b: BasedChart,
    identification: Optional[Dict[str, PolyElement]] = None,
) -> Tuple[BasedChart, Dict[str, str]]:
    """
    Joint chart on a's fiber variables and primed copies of b's. The
    relations are f_a, then z'_v - psi_v for each fiber variable v of b that
    is identified (explicitly, or by sharing a name with a fiber variable of
    a), then f_b in primed coordinates. A relation of f_b that already lies in
    the ideal of the others is dropped, so the product stays a complete
    intersection. Unidentified primed variables are left to reduce_to.
    Returns the chart and the renaming of b's fiber variables.
    """
    if list(a.base_vars) != list(b.base_vars):
        raise ChartMismatchError(f"incompatible base variables {a.base_vars} vs {b.base_vars}")
    if not b.fiber_vars:
        return a, {}
    taken = set(a.fiber_vars) | set(a.base_vars)
    renaming = {}
    for v in b.fiber_vars:
        new = _fresh_name(v, taken)
        taken.add(new)
        renaming[v] = new
    fiber = list(a.fiber_vars) + [renaming[v] for v in b.fiber_vars]
    ring = make_ring(fiber + list(a.base_vars), str(a.ring.order))
    a_images = list(ring.gens[: a.m]) + list(ring.gens[len(fiber):])
    b_images = list(ring.gens[a.m:len(fiber)]) + list(ring.gens[len(fiber):])

    def lift(p: PolyElement) -> PolyElement:
        return substitute(p, a_images, ring)

    identification = identification or {}
    relations = [lift(g) for g in a.f]
    for k, v in enumerate(b.fiber_vars):
        if v in identification:
            relations.append(ring.gens[a.m + k] - lift(identification[v]))
        elif v in a.fiber_vars:
            relations.append(ring.gens[a.m + k] - ring.gens[a.fiber_vars.index(v)])
    relations += [substitute(g, b_images, ring) for g in b.f]
    for g in list(relations[len(relations) - b.l:]):
        others = [r for r in relations if r is not g]
        if others and Ideal(ring, others).contains(g):
            relations = others
    codim = a.codim + len(relations) - a.l if a.codim is not None else None
    chart = BasedChart(f"{a.label}x{b.label}", ring, fiber, list(a.base_vars), [lift(p) for p in a.phi], relations, codim)
    return chart, renaming


def identification_is_valid(a: BasedChart, b: BasedChart, product: BasedChart, renaming: Dict[str, str]) -> bool:
    """
    The product presents the same U as both factors: it is a regular chart
    and its relative dimension m - l equals that of a and of b.
    """
    if b.fiber_vars and set(renaming) != set(b.fiber_vars):
        return False
    dimension = a.m - a.l
    if b.m - b.l != dimension or product.m - product.l != dimension:
        return False
    return validate_chart(product).regular
