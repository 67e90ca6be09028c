"""
Cech side: atlases of charts, based liftings and the lifted Cech complexes.

Implements:
- AtlasSpec: charts given by coordinate maps out of a common model, with an explicit nerve
- build_based_lifting: f_K in groups I (coordinate differences) and II (t - Phi),
  transition morphisms h_K^K' in four blocks, transitivity defects
- cech_module / lifted_coboundary / unlifted_coboundary
- totalize_truncate: TR, TR_ker and the Cech complex of Omega^p_{U/S},
  optionally totalized over p with d_DR
- total_cohomology on weighted-degree slices, with a stabilization flag
- les_check: rank bookkeeping of 0 -> TR_ker -> TR -> C(Omega^p) -> 0
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from scipy.special import comb
from sympy.polys.rings import PolyElement, PolyRing

from app.utils.charts import (
    ChartMorphism,
    DifferenceQuotients,
    compose_morphisms,
    difference_quotients,
    pullback_diamond,
    validate_chart,
)
from app.utils.errors import (
    BrokenComplexError,
    ChartDefinitionError,
    FiltrationError,
    NotInNerveError,
    SpecError,
    TransitivityError,
)
from app.utils.exact_algebra import (
    TOP,
    Ideal,
    ModuleGroebnerBasis,
    PolyMatrix,
    groebner_basis,
    make_ring,
    monomials_of_degree,
    rank_over_qq,
    substitute,
    to_sparse,
)
from app.utils.kd_algebra import (
    BasedChart,
    BasisSymbol,
    KDContext,
    KDElement,
    apply_diff,
    build_algebra,
    component_basis,
    element_to_vector,
    operator_matrix,
)
from app.utils.koszul_cohomology import relative_forms_module

logger = logging.getLogger(__name__)

Simplex = Tuple[int, ...]

# Complex variants
FULL = "full"
KERNEL = "kernel"
FORMS = "forms"
VARIANTS = (FULL, KERNEL, FORMS)


@dataclass
class AtlasSpec:
    """
    Charts of one U given as coordinate maps out of a common model.
    `maps[k][j]` is the j-th chart coordinate of chart k as a polynomial
    in the model fiber variables; `phi` is Phi on the model.
    """

    label: str
    model_ring: PolyRing
    model_vars: List[str]
    base_vars: List[str]
    phi: List[PolyElement]
    maps: List[List[PolyElement]]
    nerve: List[Simplex]
    chart_vars: List[List[str]] = field(default_factory=list)
    order: str = "grevlex"

    def __post_init__(self):
        n = len(self.maps)
        self.nerve = sorted({tuple(sorted(K)) for K in self.nerve}, key=lambda K: (len(K), K))
        for k in range(n):
            if (k,) not in self.nerve:
                self.nerve.append((k,))
        self.nerve.sort(key=lambda K: (len(K), K))
        members = set(self.nerve)
        for K in self.nerve:
            if any(k < 0 or k >= n for k in K):
                raise SpecError(f"nerve element {list(K)} refers to a chart that does not exist")
            for size in range(1, len(K)):
                for face in combinations(K, size):
                    if face not in members:
                        raise SpecError(f"nerve is not closed under subsets: {list(face)} missing below {list(K)}")
        for k, images in enumerate(self.maps):
            if len(images) != len(self.model_vars):
                raise SpecError(f"chart {k} gives {len(images)} coordinates for {len(self.model_vars)} model variables")
        if len(self.phi) != len(self.base_vars):
            raise SpecError(f"phi has {len(self.phi)} components for {len(self.base_vars)} base variables")
        if not self.chart_vars:
            if len(self.model_vars) == 1:
                self.chart_vars = [[f"z{k}"] for k in range(n)]
            else:
                self.chart_vars = [[f"z{k}_{j}" for j in range(len(self.model_vars))] for k in range(n)]
        elif len(self.chart_vars) != n or any(len(v) != len(self.model_vars) for v in self.chart_vars):
            raise SpecError("chart_vars must name one coordinate per model variable for every chart")

    @property
    def n_charts(self) -> int:
        return len(self.maps)


@dataclass
class TransitivityDefect:
    """A chain K < K' < K'' where h_K^K'' differs from h_K^K' h_K'^K''."""

    chain: Tuple[Simplex, Simplex, Simplex]
    entries: List[str]
    holds_modulo_ideal: bool


def _invert_map(spec: AtlasSpec, k: int) -> List[PolyElement]:
    """Model coordinates as polynomials in chart k's coordinates, by lex elimination."""
    n = len(spec.model_vars)
    model_names = list(spec.model_vars)
    while set(model_names) & set(spec.chart_vars[k]):
        model_names = [f"_{v}" for v in model_names]
    names = model_names + list(spec.chart_vars[k])
    ring = make_ring(names, "lex")
    model_images = list(ring.gens[:n]) + [None] * len(spec.base_vars)
    for b, name in enumerate(spec.base_vars):
        if any(p.degree(spec.model_ring.gens[n + b]) > 0 for p in spec.maps[k]):
            raise SpecError(f"chart {k} map depends on base variable {name}")
        model_images[n + b] = ring.zero
    gens = [ring.gens[n + j] - substitute(p, model_images, ring) for j, p in enumerate(spec.maps[k])]
    basis = groebner_basis(gens)
    chart_ring = make_ring(list(spec.chart_vars[k]) + list(spec.base_vars), spec.order)
    to_chart = [chart_ring.zero] * n + list(chart_ring.gens[:n])
    inverse = []
    for i in range(n):
        unit = tuple(1 if v == i else 0 for v in range(len(names)))
        found = next((g for g in basis if g.LM == unit), None)
        if found is None:
            raise SpecError(f"chart {k} map is not polynomially invertible in {spec.model_vars[i]}")
        rest = found - ring.gens[i]
        if any(any(m[:n]) for m in rest.keys()):
            raise SpecError(f"chart {k} map is not polynomially invertible in {spec.model_vars[i]}")
        inverse.append(-substitute(rest, to_chart, chart_ring))
    return inverse


@dataclass
class BasedLiftingAtlas:
    """Intersection charts f_K with groups I/II and the transition morphisms between them."""

    spec: AtlasSpec
    global_ring: PolyRing
    inverses: List[List[PolyElement]]
    charts: Dict[Simplex, BasedChart]
    groups: Dict[Simplex, Tuple[int, int]]
    transitions: Dict[Tuple[Simplex, Simplex], ChartMorphism]
    quotients: Optional[DifferenceQuotients]
    defects: List[TransitivityDefect] = field(default_factory=list)
    _contexts: Dict[Simplex, KDContext] = field(default_factory=dict, repr=False)
    _empty: Dict[Simplex, BasedChart] = field(default_factory=dict, repr=False)

    @property
    def nerve(self) -> List[Simplex]:
        return self.spec.nerve

    @property
    def transitive(self) -> bool:
        return not self.defects

    def simplices(self, size: int) -> List[Simplex]:
        return [K for K in self.nerve if len(K) == size]

    def cofaces(self, K: Simplex) -> List[Tuple[Simplex, int]]:
        """(K', position of the added index) for K' = K + {k} in the nerve."""
        out = []
        for K2 in self.simplices(len(K) + 1):
            if set(K) <= set(K2):
                added = next(k for k in K2 if k not in K)
                out.append((K2, K2.index(added)))
        return out

    def chart(self, K: Simplex) -> BasedChart:
        """Intersection chart; index sets outside the nerve get f_K = {1}."""
        K = tuple(sorted(K))
        if K in self.charts:
            return self.charts[K]
        if K not in self._empty:
            ring = _simplex_ring(self.spec, K)
            u0 = _inverse_on(self, K[0], K, ring)
            phi = [substitute(p, u0 + list(ring.gens[len(ring.gens) - len(self.spec.base_vars):]), ring) for p in self.spec.phi]
            fiber = [v for k in K for v in self.spec.chart_vars[k]]
            self._empty[K] = BasedChart(_label(K), ring, fiber, list(self.spec.base_vars), phi, [ring.one], 1)
        return self._empty[K]

    def ctx(self, K: Simplex) -> KDContext:
        if K not in self._contexts:
            self._contexts[K] = build_algebra(self.chart(K))
        return self._contexts[K]

    def transition(self, K: Simplex, K2: Simplex) -> ChartMorphism:
        """Morphism chart(K2) -> chart(K) for K a proper subset of K2."""
        K, K2 = tuple(sorted(K)), tuple(sorted(K2))
        if (K, K2) in self.transitions:
            m = self.transitions[(K, K2)]
            if m._source_ctx is None:
                m._source_ctx = self.ctx(K2)
            return m
        if not set(K) < set(K2):
            raise NotInNerveError(f"{list(K)} is not a proper subset of {list(K2)}")
        if K2 in self.charts:
            raise NotInNerveError(f"no transition {list(K)} <- {list(K2)}")
        source, target = self.chart(K2), self.chart(K)
        w = _inclusion_images(target, source)
        m = ChartMorphism(source, target, w, [[substitute(g, w, source.ring)] for g in target.f])
        m._source_ctx = self.ctx(K2)
        self.transitions[(K, K2)] = m
        return m


def _label(K: Simplex) -> str:
    return "U{" + ",".join(str(k) for k in K) + "}"


def _simplex_ring(spec: AtlasSpec, K: Simplex) -> PolyRing:
    return make_ring([v for k in K for v in spec.chart_vars[k]] + list(spec.base_vars), spec.order)


def _inverse_on(lifting: BasedLiftingAtlas, k: int, K: Simplex, ring: PolyRing) -> List[PolyElement]:
    """u_k on the ring of K (chart k's coordinates sit at their block)."""
    n = len(lifting.spec.model_vars)
    offset = K.index(k) * n
    nb = len(lifting.spec.base_vars)
    images = list(ring.gens[offset: offset + n]) + list(ring.gens[ring.ngens - nb:])
    return [substitute(u, images, ring) for u in lifting.inverses[k]]


def _inclusion_images(target: BasedChart, source: BasedChart) -> List[PolyElement]:
    names = [str(s) for s in source.ring.symbols]
    return [source.ring.gens[names.index(str(s))] for s in target.ring.symbols]


def _pair_columns(K2: Simplex, a: int, b: int) -> List[int]:
    """Consecutive-pair indices of K2 telescoping from chart a to chart b (a before b)."""
    return list(range(K2.index(a), K2.index(b)))


def _build_chart(lifting: BasedLiftingAtlas, K: Simplex) -> BasedChart:
    spec = lifting.spec
    n = len(spec.model_vars)
    ring = _simplex_ring(spec, K)
    base = list(ring.gens[ring.ngens - len(spec.base_vars):])
    u = {k: _inverse_on(lifting, k, K, ring) for k in K}
    group_i = [u[a][j] - u[b][j] for a, b in zip(K, K[1:]) for j in range(n)]
    phi = [substitute(p, u[K[0]] + base, ring) for p in spec.phi]
    group_ii = [t - p for t, p in zip(base, phi)]
    fiber = [v for k in K for v in spec.chart_vars[k]]
    lifting.groups[K] = (len(group_i), len(group_ii))
    return BasedChart(_label(K), ring, fiber, list(spec.base_vars), phi, group_i + group_ii, (len(K) - 1) * n + len(base))


def _build_transition(lifting: BasedLiftingAtlas, K: Simplex, K2: Simplex) -> ChartMorphism:
    """h in four blocks: (I,I) telescoping, (I,II) = 0, (II,II) = 1, (II,I) from F_ij."""
    spec = lifting.spec
    n = len(spec.model_vars)
    source, target = lifting.charts[K2], lifting.charts[K]
    ring = source.ring
    n_i2, _ = lifting.groups[K2]
    h = [[ring.zero] * source.l for _ in range(target.l)]
    row = 0
    for a, b in zip(K, K[1:]):
        for j in range(n):
            for c in _pair_columns(K2, a, b):
                h[row][c * n + j] = ring.one
            row += 1
    k0, k0_src = K[0], K2[0]
    u_new = _inverse_on(lifting, k0_src, K2, ring)
    u_old = _inverse_on(lifting, k0, K2, ring)
    base_images = {}
    if lifting.quotients is not None:
        dq_names = [str(s) for s in lifting.quotients.ring.symbols]
        for b, name in enumerate(spec.base_vars):
            base_images[dq_names.index(name)] = ring.gens[ring.ngens - len(spec.base_vars) + b]
    for i in range(len(spec.base_vars)):
        h[row][n_i2 + i] = ring.one
        if k0 != k0_src:
            for j in range(n):
                F = lifting.quotients.evaluate(i, j, u_new, u_old, base_images, ring)
                for c in _pair_columns(K2, k0_src, k0):
                    h[row][c * n + j] = F
        row += 1
    return ChartMorphism(source, target, _inclusion_images(target, source), h)


def _check_transitivity(lifting: BasedLiftingAtlas, strict: bool) -> None:
    for K2 in lifting.nerve:
        for size in range(1, len(K2) - 1):
            for K in combinations(K2, size):
                for size1 in range(size + 1, len(K2)):
                    for K1 in combinations(K2, size1):
                        if not set(K) < set(K1):
                            continue
                        composite = compose_morphisms(lifting.transitions[(K, K1)], lifting.transitions[(K1, K2)])
                        direct = lifting.transitions[(K, K2)]
                        group_i = direct.source.f[: lifting.groups[K2][0]]
                        entries, ideal = [], Ideal(direct.source.ring, list(group_i))
                        modulo = True
                        for r, (row_a, row_b) in enumerate(zip(composite.h, direct.h)):
                            for c, (x, y) in enumerate(zip(row_a, row_b)):
                                if x != y:
                                    entries.append(f"[{r},{c}]: {x - y}")
                                    modulo = modulo and ideal.contains(x - y)
                        if not entries:
                            continue
                        defect = TransitivityDefect((K, K1, K2), entries, modulo)
                        lifting.defects.append(defect)
                        message = f"h not transitive on {list(K)} < {list(K1)} < {list(K2)}: {entries[0]}"
                        if strict:
                            raise TransitivityError(message)
                        logger.warning(message)


def build_based_lifting(spec: AtlasSpec, strict: bool = False) -> BasedLiftingAtlas:
    """Intersection charts and transitions for every K < K' in the nerve."""
    inverses = [_invert_map(spec, k) for k in range(spec.n_charts)]
    names = [v for k in range(spec.n_charts) for v in spec.chart_vars[k]] + list(spec.base_vars)
    if len(set(names)) != len(names):
        raise ChartDefinitionError(f"chart variable names collide: {names}")
    n = len(spec.model_vars)
    model_fiber = list(spec.model_ring.gens[:n])
    quotients = difference_quotients(spec.phi, model_fiber) if spec.phi and model_fiber else None
    lifting = BasedLiftingAtlas(spec, make_ring(names, spec.order), inverses, {}, {}, {}, quotients)
    for K in spec.nerve:
        lifting.charts[K] = _build_chart(lifting, K)
    for K2 in spec.nerve:
        for size in range(1, len(K2)):
            for K in combinations(K2, size):
                lifting.transitions[(K, K2)] = _build_transition(lifting, K, K2)
    _check_transitivity(lifting, strict)
    logger.info(
        "lifting %s: %d charts, %d transitions, %d transitivity defects",
        spec.label, len(lifting.charts), len(lifting.transitions), len(lifting.defects),
    )
    return lifting


def intersection_chart(lifting: BasedLiftingAtlas, K: Sequence[int]) -> BasedChart:
    K = tuple(sorted(K))
    if K not in lifting.charts:
        raise NotInNerveError(f"{list(K)} is not in the nerve of {lifting.spec.label}")
    chart = lifting.charts[K]
    diagnostics = validate_chart(chart)
    if not diagnostics.regular or not diagnostics.codim_ok:
        raise ChartDefinitionError(f"intersection chart {chart.label}: {diagnostics.message}")
    return chart


# --- Cech modules and coboundaries ---
@dataclass
class CechSummand:
    K: Simplex
    p: int
    s: int
    basis: List[BasisSymbol]

    @property
    def q(self) -> int:
        return len(self.K) - 1

    @property
    def rank(self) -> int:
        return len(self.basis)


@dataclass
class CechModule:
    """C^q at (p, s): direct sum over K in the nerve with #K = q + 1."""

    p: int
    s: int
    q: int
    summands: List[CechSummand]

    @property
    def rank(self) -> int:
        return sum(sm.rank for sm in self.summands)

    def offsets(self) -> Dict[Simplex, int]:
        out, acc = {}, 0
        for sm in self.summands:
            out[sm.K] = acc
            acc += sm.rank
        return out


def cech_module(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> CechModule:
    summands = [CechSummand(K, p, s, component_basis(lifting.ctx(K), p, s)) for K in lifting.simplices(q + 1)]
    return CechModule(p, s, q, summands)


def _pullback_block(lifting: BasedLiftingAtlas, K: Simplex, K2: Simplex, p: int, s: int) -> List[KDElement]:
    m = lifting.transition(K, K2)
    ctx = lifting.ctx(K)
    return [pullback_diamond(m, ctx.basis_element(sym)) for sym in component_basis(ctx, p, s)]


def lifted_coboundary(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> PolyMatrix:
    """delta: C^q -> C^{q+1} over the ring of all chart coordinates; sign (-1)^position."""
    source, target = cech_module(lifting, p, s, q), cech_module(lifting, p, s, q + 1)
    ring = lifting.global_ring
    rows = target.offsets()
    cols = source.offsets()
    entries: Dict[Tuple[int, int], PolyElement] = {}
    for sm in source.summands:
        for K2, pos in lifting.cofaces(sm.K):
            index = {sym.key: i for i, sym in enumerate(component_basis(lifting.ctx(K2), p, s))}
            sign = -1 if pos % 2 else 1
            for j, image in enumerate(_pullback_block(lifting, sm.K, K2, p, s)):
                for key, g in image.components.items():
                    cell = (rows[K2] + index[key], cols[sm.K] + j)
                    entries[cell] = entries.get(cell, ring.zero) + sign * g.set_ring(ring)
    return PolyMatrix(ring, target.rank, source.rank, {c: g for c, g in entries.items() if g})


def unlifted_coboundary(lifting: BasedLiftingAtlas, p: int, q: int) -> PolyMatrix:
    """Alternating sum of restrictions of relative p-forms; the s = 0 slice of delta."""
    return lifted_coboundary(lifting, p, 0, q)


def _block_of(matrix: PolyMatrix, rows: range, cols: range) -> bool:
    return any(r in rows and c in cols for (r, c) in matrix.entries)


def coboundary_square(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> Tuple[bool, List[str]]:
    """delta^2 on C^q with the (K, K'') blocks where it fails."""
    square = lifted_coboundary(lifting, p, s, q + 1) @ lifted_coboundary(lifting, p, s, q)
    if square.is_zero():
        return True, []
    source, target = cech_module(lifting, p, s, q), cech_module(lifting, p, s, q + 2)
    rows, cols = target.offsets(), source.offsets()
    witness = []
    for sm in source.summands:
        for tm in target.summands:
            block_rows = range(rows[tm.K], rows[tm.K] + tm.rank)
            block_cols = range(cols[sm.K], cols[sm.K] + sm.rank)
            if _block_of(square, block_rows, block_cols):
                witness.append(f"{list(sm.K)} -> {list(tm.K)}")
    logger.warning("delta^2 != 0 on %s at (p,s,q)=(%d,%d,%d): %s", lifting.spec.label, p, s, q, witness)
    return False, witness


def _koszul_block(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> PolyMatrix:
    """Block-diagonal koszul differential on C^q at (p, s), over the global ring."""
    source, target = cech_module(lifting, p, s, q), cech_module(lifting, p, s - 1, q)
    ring = lifting.global_ring
    rows, cols = target.offsets(), source.offsets()
    entries = {}
    for sm in source.summands:
        local = operator_matrix(lifting.ctx(sm.K), "koszul", p, s)
        for (i, j), g in local.entries.items():
            entries[(rows[sm.K] + i, cols[sm.K] + j)] = g.set_ring(ring)
    return PolyMatrix(ring, target.rank, source.rank, entries)


def commutes_with_koszul(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> bool:
    left = _koszul_block(lifting, p, s, q + 1) @ lifted_coboundary(lifting, p, s, q)
    right = lifted_coboundary(lifting, p, s - 1, q) @ _koszul_block(lifting, p, s, q)
    return all(left.get(i, j) == right.get(i, j) for i in range(left.nrows) for j in range(left.ncols))


def commutes_with_derham(lifting: BasedLiftingAtlas, p: int, s: int, q: int) -> bool:
    """delta d_DR = d_DR delta on g * b for each basis symbol b and g in {1, chart variables}."""
    for K in lifting.simplices(q + 1):
        ctx = lifting.ctx(K)
        for sym in component_basis(ctx, p, s):
            for g in [ctx.ring.one] + list(ctx.ring.gens):
                a = ctx.basis_element(sym, g)
                for K2, _ in lifting.cofaces(K):
                    m = lifting.transition(K, K2)
                    if apply_diff(pullback_diamond(m, a), "derham") != pullback_diamond(m, apply_diff(a, "derham")):
                        return False
    return True


# --- closed-form ranks ---
def closed_form_rank(m: int, l: int, p: int, s: int) -> int:  # noqa: E741
    """rank K^{p,s} = sum_a C(m, p-a) C(l, s-a) C(a+l-1, l-1)."""
    if p < 0 or s < 0:
        return 0
    total = 0
    for a in range(min(p, s) + 1):
        if l == 0:
            eta = 1 if a == 0 else 0
        else:
            eta = comb(a + l - 1, l - 1, exact=True)
        total += comb(m, p - a, exact=True) * comb(l, s - a, exact=True) * eta
    return int(total)


# --- truncated total complexes ---
@dataclass
class Summand:
    """One (K, p, s) piece of a truncated complex."""

    K: Simplex
    p: int
    s: int
    kind: str
    rank: int

    @property
    def q(self) -> int:
        return len(self.K) - 1


@dataclass
class TruncatedComplex:
    """
    Bounded complex in total degree n = q - s (+ p when totalized over p).
    kind: "full" free K^{p,s}; "kernel" the submodule koszul(K^{p,1}) of Omega^p_{W/S};
    "forms" the quotient Omega^p_{U/S}.
    """

    lifting: BasedLiftingAtlas
    variant: str
    p_values: List[int]
    triple: bool
    terms: Dict[int, List[Summand]]
    strip_ok: bool = True
    _forms: Dict[Tuple[Simplex, int], ModuleGroebnerBasis] = field(default_factory=dict, repr=False)
    _kernels: Dict[Tuple[Simplex, int], ModuleGroebnerBasis] = field(default_factory=dict, repr=False)
    _pullbacks: Dict[Tuple[Simplex, Simplex, tuple], KDElement] = field(default_factory=dict, repr=False)

    def degrees(self) -> List[int]:
        return sorted(self.terms)

    def ranks(self) -> Dict[int, int]:
        return {n: sum(sm.rank for sm in self.terms[n]) for n in self.degrees()}

    def closed_form_ranks(self) -> Dict[int, int]:
        out = {}
        for n, summands in self.terms.items():
            out[n] = sum(
                closed_form_rank(self.lifting.ctx(sm.K).m, self.lifting.ctx(sm.K).l, sm.p, sm.s)
                for sm in summands if sm.kind == FULL
            ) + sum(sm.rank for sm in summands if sm.kind != FULL)
        return out

    def degree_of(self, q: int, p: int, s: int) -> int:
        return q - s + (p if self.triple else 0)

    def differential_matrix(self, n: int) -> PolyMatrix:
        """D_n = delta + (-1)^q koszul over the global ring (full variant, fixed p)."""
        if self.variant != FULL or self.triple:
            raise ValueError("matrices over the global ring exist only for the full complex at fixed p")
        lifting = self.lifting
        source, target = self.terms.get(n, []), self.terms.get(n + 1, [])
        rows = _summand_offsets(target)
        cols = _summand_offsets(source)
        ring = lifting.global_ring
        entries: Dict[Tuple[int, int], PolyElement] = {}
        for sm in source:
            ctx = lifting.ctx(sm.K)
            for K2, pos in lifting.cofaces(sm.K):
                key = (K2, sm.p, sm.s)
                if key not in rows:
                    continue
                index = {sym.key: i for i, sym in enumerate(component_basis(lifting.ctx(K2), sm.p, sm.s))}
                sign = -1 if pos % 2 else 1
                for j, image in enumerate(_pullback_block(lifting, sm.K, K2, sm.p, sm.s)):
                    for k, g in image.components.items():
                        cell = (rows[key] + index[k], cols[(sm.K, sm.p, sm.s)] + j)
                        entries[cell] = entries.get(cell, ring.zero) + sign * g.set_ring(ring)
            key = (sm.K, sm.p, sm.s - 1)
            if key in rows:
                twist = -1 if sm.q % 2 else 1
                for (i, j), g in operator_matrix(ctx, "koszul", sm.p, sm.s).entries.items():
                    cell = (rows[key] + i, cols[(sm.K, sm.p, sm.s)] + j)
                    entries[cell] = entries.get(cell, ring.zero) + twist * g.set_ring(ring)
        total_rows = sum(sm.rank for sm in target)
        total_cols = sum(sm.rank for sm in source)
        return PolyMatrix(ring, total_rows, total_cols, {c: g for c, g in entries.items() if g})

    def square_zero(self, bound: int = 2) -> bool:
        """D^2 = 0: as matrices for the full fixed-p complex, on slice vectors otherwise."""
        if self.variant == FULL and not self.triple:
            for n in self.degrees():
                if n + 1 in self.terms and not (self.differential_matrix(n + 1) @ self.differential_matrix(n)).is_zero():
                    logger.warning("D^2 != 0 in degree %d of %s", n, self.lifting.spec.label)
                    return False
            return True
        for n in self.degrees():
            for _, vector in _slice_vectors(self, n, bound):
                once = _apply_total(self, vector)
                if _flatten(self, _apply_total(self, once)):
                    logger.warning("D^2 != 0 in degree %d of %s", n, self.lifting.spec.label)
                    return False
        return True


def _summand_offsets(summands: Sequence[Summand]) -> Dict[Tuple[Simplex, int, int], int]:
    out, acc = {}, 0
    for sm in summands:
        out[(sm.K, sm.p, sm.s)] = acc
        acc += sm.rank
    return out


def totalize_truncate(
    lifting: BasedLiftingAtlas,
    p: Optional[int] = None,
    variant: str = FULL,
    triple: bool = False,
    p_max: Optional[int] = None,
) -> TruncatedComplex:
    """
    TR at fixed p (or over the window 0 <= p <= p_max with d_DR when `triple`).
    variant: "full", "kernel" (s = 0 term replaced by koszul(K^{p,1})) or
    "forms" (the Cech complex of Omega^p_{U/S}).
    """
    if variant not in VARIANTS:
        raise ValueError(f"Unknown variant: {variant}")
    if triple:
        top = p_max if p_max is not None else max((lifting.ctx(K).m for K in lifting.nerve), default=0)
        p_values = list(range(0, top + 1))
    else:
        if p is None:
            raise ValueError("a fixed p is required unless totalizing over p")
        p_values = [p]
    complex_ = TruncatedComplex(lifting, variant, p_values, triple, {})
    for K in lifting.nerve:
        ctx = lifting.ctx(K)
        q = len(K) - 1
        for pv in p_values:
            s_values = [0] if variant == FORMS else range(0, pv + ctx.l + 1)
            for s in s_values:
                rank = len(component_basis(ctx, pv, s))
                if rank == 0:
                    continue
                kind = FULL if s > 0 or variant == FULL else variant
                n = complex_.degree_of(q, pv, s)
                complex_.terms.setdefault(n, []).append(Summand(K, pv, s, kind, rank))
                if not (-ctx.l <= pv - s <= ctx.m):
                    complex_.strip_ok = False
    logger.info(
        "totalized %s (%s%s): degrees %s",
        lifting.spec.label, variant, ", over p" if triple else f", p={p}", complex_.degrees(),
    )
    return complex_


# --- slices ---
Cochain = Dict[Tuple[Simplex, int, int], KDElement]


def _total_degree(g: PolyElement) -> int:
    return max((sum(m) for m in g.keys()), default=0)


def _symbol_weight(ctx: KDContext, key) -> int:
    """dz_j weighs 1, xi_i and eta_i weigh deg f_i; every differential is then weight non-increasing."""
    w, x, e = key
    degrees = [_total_degree(fi) for fi in ctx.chart.f]
    return len(w) + sum(degrees[i] for i in x) + sum(n * degrees[i] for i, n in enumerate(e))


def _forms_basis(complex_: TruncatedComplex, K: Simplex, p: int) -> ModuleGroebnerBasis:
    if (K, p) not in complex_._forms:
        module = relative_forms_module(complex_.lifting.ctx(K), p)
        complex_._forms[(K, p)] = ModuleGroebnerBasis(module.ring, (to_sparse(r) for r in module.relations), order=TOP)
    return complex_._forms[(K, p)]


def _kernel_basis(complex_: TruncatedComplex, K: Simplex, p: int) -> ModuleGroebnerBasis:
    if (K, p) not in complex_._kernels:
        ctx = complex_.lifting.ctx(K)
        columns = operator_matrix(ctx, "koszul", p, 1).columns()
        complex_._kernels[(K, p)] = ModuleGroebnerBasis(ctx.ring, (to_sparse(c) for c in columns), order=TOP)
    return complex_._kernels[(K, p)]


def _slice_vectors(complex_: TruncatedComplex, n: int, bound: int) -> List[Tuple[int, Cochain]]:
    """(weight, cochain) spanning term n up to weight `bound`; weights are exact for each vector."""
    out = []
    for sm in complex_.terms.get(n, []):
        ctx = complex_.lifting.ctx(sm.K)
        ring = ctx.ring
        basis = component_basis(ctx, sm.p, sm.s)
        if sm.kind == FULL:
            for sym in basis:
                wt = _symbol_weight(ctx, sym.key)
                for d in range(0, bound - wt + 1):
                    for mono in monomials_of_degree(ring.ngens, d):
                        g = ring.from_dict({mono: 1})
                        out.append((wt + d, {(sm.K, sm.p, sm.s): ctx.basis_element(sym, g)}))
        elif sm.kind == KERNEL:
            gb = _kernel_basis(complex_, sm.K, sm.p)
            for d in range(bound - sm.p + 1):
                for pos in range(len(basis)):
                    for mono in monomials_of_degree(ring.ngens, d):
                        found = next(
                            ((g, gm) for g, (gp, gm) in zip(gb.elements, gb.leads)
                             if gp == pos and all(a <= b for a, b in zip(gm, mono))),
                            None,
                        )
                        if found is None:
                            continue
                        hit, lead = found
                        shift = tuple(b - a for a, b in zip(lead, mono))
                        terms = {}
                        for (hp, hm), c in hit.items():
                            mono2 = tuple(a + b for a, b in zip(hm, shift))
                            key = basis[hp].key
                            terms[key] = terms.get(key, ring.zero) + ring.from_dict({mono2: c})
                        out.append((sm.p + d, {(sm.K, sm.p, 0): ctx.element(terms)}))
        else:
            gb = _forms_basis(complex_, sm.K, sm.p)
            for d in range(bound - sm.p + 1):
                for pos in range(len(basis)):
                    for mono in monomials_of_degree(ring.ngens, d):
                        if any(gp == pos and all(a <= b for a, b in zip(gm, mono)) for gp, gm in gb.leads):
                            continue
                        out.append((sm.p + d, {(sm.K, sm.p, 0): ctx.basis_element(basis[pos], ring.from_dict({mono: 1}))}))
    return out


def _pullback_symbol(complex_: TruncatedComplex, K: Simplex, K2: Simplex, key) -> KDElement:
    cache_key = (K, K2, key)
    if cache_key not in complex_._pullbacks:
        lifting = complex_.lifting
        m = lifting.transition(K, K2)
        complex_._pullbacks[cache_key] = pullback_diamond(m, lifting.ctx(K).element({key: lifting.ctx(K).ring.one}))
    return complex_._pullbacks[cache_key]


def _apply_total(complex_: TruncatedComplex, cochain: Cochain) -> Cochain:
    """D = delta + (-1)^q (koszul + d_DR when totalized over p)."""
    lifting = complex_.lifting
    out: Cochain = {}

    def add(key, element):
        if element:
            out[key] = out[key] + element if key in out else element

    top = max(complex_.p_values)
    for (K, p, s), a in cochain.items():
        twist = -1 if (len(K) - 1) % 2 else 1
        for K2, pos in lifting.cofaces(K):
            sign = -1 if pos % 2 else 1
            m = lifting.transition(K, K2)
            image = lifting.ctx(K2).zero()
            for key, g in a.components.items():
                image = image + _pullback_symbol(complex_, K, K2, key).scale(m.pullback_poly(g))
            add((K2, p, s), image.scale(sign))
        if complex_.variant != FORMS and s > 0:
            add((K, p, s - 1), apply_diff(a, "koszul").scale(twist))
        if complex_.triple and p + 1 <= top:
            add((K, p + 1, s), apply_diff(a, "derham").scale(twist))
    return out


def _flatten(complex_: TruncatedComplex, cochain: Cochain) -> Dict[tuple, object]:
    """Rational coordinates; forms are reduced to their normal form first."""
    flat: Dict[tuple, object] = {}
    for (K, p, s), a in cochain.items():
        if complex_.variant == FORMS:
            ctx = a.ctx
            gb = _forms_basis(complex_, K, p)
            reduced = gb.reduce(to_sparse(element_to_vector(a, p, 0)))
            for (pos, mono), c in reduced.items():
                flat[(K, p, s, pos, mono)] = c
        else:
            for key, g in a.components.items():
                for mono, c in g.items():
                    flat[(K, p, s, key, mono)] = c
    return flat


def _key_weight(complex_: TruncatedComplex, key: tuple) -> int:
    K, p, s, sym, mono = key
    if complex_.variant == FORMS:
        return p + sum(mono)
    return sum(mono) + _symbol_weight(complex_.lifting.ctx(K), sym)


@dataclass
class _Slices:
    """Per degree: vector weights and the flattened images under D."""

    complex_: TruncatedComplex
    weights: Dict[int, List[int]]
    images: Dict[int, List[Dict[tuple, object]]]


def _build_slices(complex_: TruncatedComplex, bound: int) -> _Slices:
    weights, images = {}, {}
    for n in complex_.degrees():
        vectors = _slice_vectors(complex_, n, bound)
        weights[n] = [w for w, _ in vectors]
        images[n] = []
        for w, v in vectors:
            flat = _flatten(complex_, _apply_total(complex_, v))
            for key in flat:
                if _key_weight(complex_, key) > w:
                    raise FiltrationError(
                        f"differential raises the weight of a degree-{n} vector above {w} in {complex_.lifting.spec.label}"
                    )
            images[n].append(flat)
    return _Slices(complex_, weights, images)


def _image_rank(slices: _Slices, n: int, d: int, above: Optional[int] = None) -> int:
    """Rank of D on F_d of degree n; with `above`, only the coordinates of weight > above count."""
    if n not in slices.weights:
        return 0
    columns = [img for w, img in zip(slices.weights[n], slices.images[n]) if w <= d]
    rows: Dict[tuple, int] = {}
    entries = {}
    for j, col in enumerate(columns):
        for key, c in col.items():
            if above is not None and _key_weight(slices.complex_, key) <= above:
                continue
            i = rows.setdefault(key, len(rows))
            entries[(i, j)] = c
    return rank_over_qq(entries, len(rows), len(columns))


def _slice_dimension(slices: _Slices, n: int, d: int) -> int:
    return sum(1 for w in slices.weights.get(n, []) if w <= d)


def _truncated_dimension(slices: _Slices, n: int, d: int, primitive_bound: int) -> int:
    """dim of cycles in F_d modulo the boundaries D(F_B) that land in F_d, B = primitive_bound."""
    cycles = _slice_dimension(slices, n, d) - _image_rank(slices, n, d)
    boundaries = _image_rank(slices, n - 1, primitive_bound) - _image_rank(slices, n - 1, primitive_bound, above=d)
    dim = cycles - boundaries
    if dim < 0:
        raise BrokenComplexError(f"negative cohomology dimension in degree {n}: D^2 != 0")
    return dim


@dataclass
class DegreeCohomology:
    """
    dim F_d H^n for d = 0..bound, with primitives of weight <= bound + 2, and
    the successive differences. `dims_next` repeats the count with primitives
    of weight <= bound + 4; the degree is stabilized when both agree.
    """

    degree: int
    dims: List[int]
    graded: List[int]
    bound: int
    stabilized: bool
    dims_next: List[int] = field(default_factory=list)


@dataclass
class TotalCohomology:
    label: str
    variant: str
    bound: int
    degrees: Dict[int, DegreeCohomology]

    @property
    def stabilized(self) -> bool:
        return all(dc.stabilized for dc in self.degrees.values())


def total_cohomology(complex_: TruncatedComplex, bound: int) -> TotalCohomology:
    """Truncated cohomology per total degree; stabilized when raising the primitive bound by 2 changes nothing."""
    if bound < 0:
        raise ValueError("degree bound must be >= 0")
    slices = _build_slices(complex_, bound + 4)
    degrees = {}
    for n in complex_.degrees():
        dims = [_truncated_dimension(slices, n, d, bound + 2) for d in range(bound + 1)]
        dims_next = [_truncated_dimension(slices, n, d, bound + 4) for d in range(bound + 1)]
        graded = [dims[0]] + [b - a for a, b in zip(dims, dims[1:])]
        stable = dims == dims_next
        if not stable:
            logger.warning(
                "H^%d of %s not stabilized at bound %d: %s then %s",
                n, complex_.lifting.spec.label, bound, dims, dims_next,
            )
        degrees[n] = DegreeCohomology(n, dims, graded, bound, stable, dims_next)
    return TotalCohomology(complex_.lifting.spec.label, complex_.variant, bound, degrees)


# --- the exact triangle ---
@dataclass
class LESReport:
    """Rank additivity and Euler-characteristic consistency of 0 -> TR_ker -> TR -> C(Omega^p) -> 0."""

    label: str
    p: int
    bound: int
    termwise_ok: bool
    alternating_ok: bool
    mismatches: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.termwise_ok and self.alternating_ok


def les_check(lifting: BasedLiftingAtlas, p: int, bound: int) -> LESReport:
    full = totalize_truncate(lifting, p, FULL)
    kernel = totalize_truncate(lifting, p, KERNEL)
    forms = totalize_truncate(lifting, p, FORMS)
    slices = {name: _build_slices(c, bound) for name, c in (("full", full), ("kernel", kernel), ("forms", forms))}
    complexes = {"full": full, "kernel": kernel, "forms": forms}
    degrees = sorted(set(full.degrees()) | set(kernel.degrees()) | set(forms.degrees()))
    mismatches = []
    termwise_ok, alternating_ok = True, True
    for d in range(bound + 1):
        euler = 0
        for n in degrees:
            dims = {name: _slice_dimension(slices[name], n, d) for name in complexes}
            if dims["full"] != dims["kernel"] + dims["forms"]:
                termwise_ok = False
                mismatches.append(f"d={d}, n={n}: {dims['full']} != {dims['kernel']} + {dims['forms']}")
            h = {
                name: dims[name] - _image_rank(slices[name], n, d) - _image_rank(slices[name], n - 1, d)
                for name in complexes
            }
            euler += (-1) ** (n % 2) * (h["kernel"] - h["full"] + h["forms"])
        if euler:
            alternating_ok = False
            mismatches.append(f"d={d}: alternating sum {euler}")
    logger.info("LES check %s p=%d: termwise=%s alternating=%s", lifting.spec.label, p, termwise_ok, alternating_ok)
    return LESReport(lifting.spec.label, p, bound, termwise_ok, alternating_ok, mismatches)


def pi_chain_map_check(lifting: BasedLiftingAtlas, p: int) -> bool:
    """delta maps the relations of Omega^p_{U_K/S} into those of Omega^p_{U_K'/S}."""
    for K in lifting.nerve:
        ctx = lifting.ctx(K)
        relations = relative_forms_module(ctx, p).relations
        for K2, _ in lifting.cofaces(K):
            m = lifting.transition(K, K2)
            target = relative_forms_module(lifting.ctx(K2), p)
            for r in relations:
                image = pullback_diamond(m, ctx.element({sym.key: g for sym, g in zip(component_basis(ctx, p, 0), r)}))
                if not target.is_zero_class(element_to_vector(image, p, 0)):
                    return False
    return True
