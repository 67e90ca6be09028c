"""
Exact polynomial algebra over the rationals.

Implements:
- Polynomial rings over QQ (sympy PolyRing, degree-reverse-lexicographic by default)
- Ideal Groebner bases, normal forms, ideal and radical membership
- Module Groebner bases on sparse vectors, position-over-term for elimination
  (kernels, lifts) and term-over-position for Hilbert functions
- Finitely presented modules (generators + relation columns) and their
  truncated Hilbert functions
- Jacobian minors
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, combinations_with_replacement
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from sympy import Dummy
from sympy.polys.domains import QQ
from sympy.polys.groebnertools import groebner as _sympy_groebner
from sympy.polys.matrices import DomainMatrix
from sympy.polys.monomials import monomial_deg, monomial_div, monomial_divides, monomial_lcm, monomial_mul
from sympy.polys.orderings import grevlex
from sympy.polys.polyerrors import ExactQuotientFailed
from sympy.polys.rings import PolyElement, PolyRing

from app.utils.errors import (
    BrokenComplexError,
    InexactDivisionError,
    MinorSizeError,
    RingMismatchError,
)

logger = logging.getLogger(__name__)

Monom = Tuple[int, ...]
Vector = List[PolyElement]
SparseVector = Dict[Tuple[int, Monom], Any]

# Module term orders
POT = "pot"
TOP = "top"


def make_ring(names: Sequence[str], order: str = "grevlex") -> PolyRing:
    """Polynomial ring over QQ on the given variable names."""
    return PolyRing(list(names), QQ, order)


def _same_ring(*polys: PolyElement) -> PolyRing:
    ring = polys[0].ring
    for p in polys[1:]:
        if p.ring != ring:
            raise RingMismatchError(f"{p.ring} != {ring}")
    return ring


def poly_arith(a: PolyElement, b: PolyElement, op: str) -> PolyElement:
    """Exact add / mul / exact_div; exact_div never truncates."""
    _same_ring(a, b)
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "exact_div":
        if not b:
            raise InexactDivisionError("division by zero polynomial")
        try:
            return a.exquo(b)
        except ExactQuotientFailed as exc:
            raise InexactDivisionError(f"{b} does not divide {a}") from exc
    raise ValueError(f"Unknown operation: {op}")


def groebner_basis(gens: Iterable[PolyElement], order: Optional[str] = None) -> List[PolyElement]:
    """
    Reduced Groebner basis of the ideal spanned by gens.
    With an explicit order the basis lives in a clone of the ring with that order.
    """
    gens = [g for g in gens if g]
    if not gens:
        return []
    ring = _same_ring(*gens)
    if order is not None and str(order) != str(ring.order):
        ring = ring.clone(order=order)
        gens = [g.set_ring(ring) for g in gens]
    return _sympy_groebner(gens, ring)


def normal_form(p: PolyElement, basis: Sequence[PolyElement]) -> PolyElement:
    """Remainder of p modulo a Groebner basis; zero iff p lies in the ideal."""
    if not basis or not p:
        return p
    _same_ring(p, *basis)
    return p.rem(list(basis))


@dataclass
class Ideal:
    """Ideal of a polynomial ring given by generators; the Groebner basis is cached."""

    ring: PolyRing
    generators: List[PolyElement]
    _basis: Optional[List[PolyElement]] = field(default=None, repr=False, compare=False)

    def groebner(self) -> List[PolyElement]:
        if self._basis is None:
            self._basis = groebner_basis(self.generators)
        return self._basis

    def reduce(self, p: PolyElement) -> PolyElement:
        return normal_form(p, self.groebner())

    def contains(self, p: PolyElement) -> bool:
        return not self.reduce(p)

    def is_unit(self) -> bool:
        return any(g.is_ground and g for g in self.groebner())


def ideal_membership(p: PolyElement, ideal: Ideal) -> bool:
    return ideal.contains(p)


def radical_membership(p: PolyElement, ideal: Ideal) -> bool:
    """p lies in rad(I) iff 1 lies in I + (1 - y p) over a ring with one extra variable."""
    ring = ideal.ring
    if not p:
        return True
    extended = PolyRing(ring.symbols + (Dummy("y"),), QQ, ring.order)
    y = extended.gens[-1]
    gens = [g.set_ring(extended) for g in ideal.generators if g]
    gens.append(extended.one - y * p.set_ring(extended))
    return Ideal(extended, gens).is_unit()


# --- matrices over a polynomial ring ---
@dataclass
class PolyMatrix:
    """Sparse matrix over a polynomial ring; columns are module vectors."""

    ring: PolyRing
    nrows: int
    ncols: int
    entries: Dict[Tuple[int, int], PolyElement] = field(default_factory=dict)

    @classmethod
    def from_columns(cls, ring: PolyRing, nrows: int, columns: Sequence[Vector]) -> "PolyMatrix":
        entries = {}
        for j, col in enumerate(columns):
            for i, p in enumerate(col):
                if p:
                    entries[(i, j)] = p
        return cls(ring, nrows, len(columns), entries)

    def get(self, i: int, j: int) -> PolyElement:
        return self.entries.get((i, j), self.ring.zero)

    def column(self, j: int) -> Vector:
        return [self.get(i, j) for i in range(self.nrows)]

    def columns(self) -> List[Vector]:
        return [self.column(j) for j in range(self.ncols)]

    def apply(self, vector: Sequence[PolyElement]) -> Vector:
        out = [self.ring.zero] * self.nrows
        for (i, j), p in self.entries.items():
            if vector[j]:
                out[i] = out[i] + p * vector[j]
        return out

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.nrows}x{self.ncols} @ {other.nrows}x{other.ncols}")
        by_row: Dict[int, List[Tuple[int, PolyElement]]] = {}
        for (k, j), q in other.entries.items():
            by_row.setdefault(k, []).append((j, q))
        entries: Dict[Tuple[int, int], PolyElement] = {}
        for (i, k), p in self.entries.items():
            for j, q in by_row.get(k, []):
                entries[(i, j)] = entries.get((i, j), self.ring.zero) + p * q
        return PolyMatrix(self.ring, self.nrows, other.ncols, {ij: v for ij, v in entries.items() if v})

    def is_zero(self) -> bool:
        return not any(self.entries.values())

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nrows, self.ncols)


# --- module Groebner bases ---
def _term_key(ring: PolyRing, order: str) -> Callable:
    if order == POT:
        mono_key = ring.order
        return lambda t: (-t[0], mono_key(t[1]))
    return lambda t: (grevlex(t[1]), -t[0])


def to_sparse(vector: Sequence[PolyElement], offset: int = 0) -> SparseVector:
    return {(offset + pos, m): c for pos, p in enumerate(vector) for m, c in p.items()}


def from_sparse(ring: PolyRing, sparse: SparseVector, positions: range) -> Vector:
    buckets: Dict[int, Dict[Monom, Any]] = {pos: {} for pos in positions}
    for (pos, m), c in sparse.items():
        if pos in buckets:
            buckets[pos][m] = c
    return [ring.from_dict(buckets[pos]) if buckets[pos] else ring.zero for pos in positions]


def _sub_multiple(f: SparseVector, g: SparseVector, factor: Any, monom: Monom) -> None:
    for (pos, m), c in g.items():
        t = (pos, monomial_mul(m, monom))
        v = f.get(t, 0) - factor * c
        if v:
            f[t] = v
        else:
            f.pop(t, None)


class ModuleGroebnerBasis:
    """Groebner basis of a submodule of a free module, on sparse vectors."""

    def __init__(self, ring: PolyRing, vectors: Iterable[SparseVector], order: str = POT):
        self.ring = ring
        self.key = _term_key(ring, order)
        self.elements: List[SparseVector] = []
        self.leads: List[Tuple[int, Monom]] = []
        self._buchberger([v for v in vectors if v])

    def reduce(self, f: SparseVector) -> SparseVector:
        f = dict(f)
        rem: SparseVector = {}
        while f:
            lt = max(f, key=self.key)
            c = f[lt]
            for g, (gpos, gmon) in zip(self.elements, self.leads):
                if gpos == lt[0] and monomial_divides(gmon, lt[1]):
                    _sub_multiple(f, g, c, monomial_div(lt[1], gmon))
                    break
            else:
                rem[lt] = c
                del f[lt]
        return rem

    def _add(self, h: SparseVector, pairs: set) -> None:
        lt = max(h, key=self.key)
        c = h[lt]
        idx = len(self.elements)
        for j, (pos, _) in enumerate(self.leads):
            if pos == lt[0]:
                pairs.add((j, idx))
        self.elements.append({t: v / c for t, v in h.items()})
        self.leads.append(lt)

    def _chain_skip(self, i: int, j: int, lcm: Monom, pairs: set) -> bool:
        pos = self.leads[i][0]
        for k, (kpos, kmon) in enumerate(self.leads):
            if k in (i, j) or kpos != pos or not monomial_divides(kmon, lcm):
                continue
            if (min(i, k), max(i, k)) not in pairs and (min(j, k), max(j, k)) not in pairs:
                return True
        return False

    def _buchberger(self, vectors: List[SparseVector]) -> None:
        pairs: set = set()
        for v in vectors:
            r = self.reduce(v)
            if r:
                self._add(r, pairs)

        def lcm_of(pair):
            return monomial_lcm(self.leads[pair[0]][1], self.leads[pair[1]][1])

        while pairs:
            i, j = min(pairs, key=lambda p: (monomial_deg(lcm_of(p)), p))
            pairs.discard((i, j))
            lcm = lcm_of((i, j))
            if self._chain_skip(i, j, lcm, pairs):
                continue
            s = {}
            _sub_multiple(s, self.elements[i], -1, monomial_div(lcm, self.leads[i][1]))
            _sub_multiple(s, self.elements[j], 1, monomial_div(lcm, self.leads[j][1]))
            r = self.reduce(s)
            if r:
                self._add(r, pairs)
        self._interreduce()

    def _interreduce(self) -> None:
        keep = []
        for i, (pos, mon) in enumerate(self.leads):
            redundant = any(
                k != i and kpos == pos and monomial_divides(kmon, mon) and (kmon != mon or k < i)
                for k, (kpos, kmon) in enumerate(self.leads)
            )
            if not redundant:
                keep.append(i)
        elements = [self.elements[i] for i in keep]
        leads = [self.leads[i] for i in keep]
        reduced = []
        for idx, (g, lt) in enumerate(zip(elements, leads)):
            self.elements = elements[:idx] + elements[idx + 1:]
            self.leads = leads[:idx] + leads[idx + 1:]
            tail = self.reduce({t: c for t, c in g.items() if t != lt})
            tail[lt] = g[lt]
            reduced.append(tail)
        order = sorted(range(len(reduced)), key=lambda i: self.key(leads[i]))
        self.elements = [reduced[i] for i in order]
        self.leads = [leads[i] for i in order]


class Submodule:
    """Submodule of R^rank spanned by generator vectors: membership, normal forms, lifts."""

    def __init__(self, ring: PolyRing, rank: int, generators: Sequence[Vector]):
        self.ring = ring
        self.rank = rank
        self.generators = [list(g) for g in generators]
        self._basis: Optional[ModuleGroebnerBasis] = None
        self._lift_basis: Optional[ModuleGroebnerBasis] = None

    @property
    def basis(self) -> ModuleGroebnerBasis:
        if self._basis is None:
            self._basis = ModuleGroebnerBasis(self.ring, (to_sparse(g) for g in self.generators))
        return self._basis

    def normal_form(self, vector: Sequence[PolyElement]) -> Vector:
        rem = self.basis.reduce(to_sparse(vector))
        return from_sparse(self.ring, rem, range(self.rank))

    def contains(self, vector: Sequence[PolyElement]) -> bool:
        return not self.basis.reduce(to_sparse(vector))

    def lift(self, vector: Sequence[PolyElement]) -> Optional[Vector]:
        """Cofactors c with sum c_j g_j = vector, or None when vector is not in the span."""
        n, g = self.rank, len(self.generators)
        if self._lift_basis is None:
            columns = []
            for j, gen in enumerate(self.generators):
                sparse = to_sparse(gen)
                sparse[(n + j, self.ring.zero_monom)] = self.ring.domain.one
                columns.append(sparse)
            self._lift_basis = ModuleGroebnerBasis(self.ring, columns)
        rem = self._lift_basis.reduce(to_sparse(vector))
        if any(pos < n for pos, _ in rem):
            return None
        return [-c for c in from_sparse(self.ring, rem, range(n, n + g))]


def module_lift(vector: Sequence[PolyElement], gens: Sequence[Vector], ring: PolyRing) -> Optional[Vector]:
    return Submodule(ring, len(vector), gens).lift(vector)


def module_kernel(matrix: PolyMatrix) -> List[Vector]:
    """Generators of {v : M v = 0}, from a position-over-term basis of [M; I]."""
    n, c = matrix.nrows, matrix.ncols
    if c == 0:
        return []
    ring = matrix.ring
    columns = []
    for j, col in enumerate(matrix.columns()):
        sparse = to_sparse(col)
        sparse[(n + j, ring.zero_monom)] = ring.domain.one
        columns.append(sparse)
    basis = ModuleGroebnerBasis(ring, columns)
    kernel = [
        from_sparse(ring, g, range(n, n + c))
        for g, (pos, _) in zip(basis.elements, basis.leads)
        if pos >= n
    ]
    logger.debug("kernel of %dx%d matrix: %d generators", n, c, len(kernel))
    return kernel


# --- finitely presented modules ---
@dataclass
class HilbertFunction:
    """Dimensions of the degree-k pieces, k = 0..bound."""

    graded: List[int]

    @property
    def cumulative(self) -> List[int]:
        out, acc = [], 0
        for v in self.graded:
            acc += v
            out.append(acc)
        return out

    def first_difference(self, other: "HilbertFunction") -> Optional[int]:
        for k, (a, b) in enumerate(zip(self.graded, other.graded)):
            if a != b:
                return k
        return None


@dataclass
class FPModule:
    """
    Module R^rank / span(relations). Generators have weight 0;
    `generators` keeps their ambient vectors for audit.
    """

    ring: PolyRing
    rank: int
    relations: List[Vector]
    generators: List[Vector] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)
    _relation_module: Optional[Submodule] = field(default=None, repr=False, compare=False)

    @property
    def relation_module(self) -> Submodule:
        if self._relation_module is None:
            self._relation_module = Submodule(self.ring, self.rank, self.relations)
        return self._relation_module

    def unit(self, i: int) -> Vector:
        return [self.ring.one if k == i else self.ring.zero for k in range(self.rank)]

    def is_zero_class(self, coefficients: Sequence[PolyElement]) -> bool:
        return self.relation_module.contains(coefficients)

    def is_zero(self) -> bool:
        return all(self.is_zero_class(self.unit(i)) for i in range(self.rank))

    def annihilator(self) -> Ideal:
        """{r : r e_i in N for all i}, read off one kernel of [e_i | N] stacked per i."""
        n, rels = self.rank, [r for r in self.relations if any(r)]
        if n == 0:
            return Ideal(self.ring, [self.ring.one])
        nr = len(rels)
        entries: Dict[Tuple[int, int], PolyElement] = {}
        for i in range(n):
            entries[(i * n + i, 0)] = self.ring.one
            for j, rel in enumerate(rels):
                for k, p in enumerate(rel):
                    if p:
                        entries[(i * n + k, 1 + i * nr + j)] = p
        stacked = PolyMatrix(self.ring, n * n, 1 + n * nr, entries)
        gens = [v[0] for v in module_kernel(stacked) if v[0]]
        return Ideal(self.ring, gens)

    def hilbert_function(self, bound: int) -> HilbertFunction:
        return truncated_dimension(self, bound)


def quotient_presentation(
    kernel_gens: Sequence[Vector],
    image_gens: Sequence[Vector],
    ambient_rank: int,
    ring: PolyRing,
    prune: bool = False,
) -> FPModule:
    """
    span(kernel_gens) / span(image_gens) presented on the kernel generators.
    With prune, generators in the span of the others plus the image are dropped.
    """
    kernel_gens = [list(g) for g in kernel_gens if any(g)]
    image_gens = [list(b) for b in image_gens if any(b)]
    kernel = Submodule(ring, ambient_rank, kernel_gens)
    for b in image_gens:
        if not kernel.contains(b):
            raise BrokenComplexError(f"image vector {b} is not in the kernel")

    if prune:
        kept = list(kernel_gens)
        idx = 0
        while idx < len(kept):
            others = kept[:idx] + kept[idx + 1:] + image_gens
            if Submodule(ring, ambient_rank, others).contains(kept[idx]):
                kept.pop(idx)
            else:
                idx += 1
        kernel_gens = kept

    g = len(kernel_gens)
    if g == 0:
        return FPModule(ring, 0, [], [])
    joined = PolyMatrix.from_columns(ring, ambient_rank, kernel_gens + image_gens)
    relations = [v[:g] for v in module_kernel(joined) if any(v[:g])]
    return FPModule(ring, g, relations, kernel_gens)


@lru_cache(maxsize=None)
def monomials_of_degree(nvars: int, degree: int) -> Tuple[Monom, ...]:
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        exps = [0] * nvars
        for v in combo:
            exps[v] += 1
        out.append(tuple(exps))
    return tuple(out)


def _is_standard(monom: Monom, leads: Sequence[Monom]) -> bool:
    return not any(monomial_divides(lead, monom) for lead in leads)


def truncated_dimension(module: FPModule, bound: int) -> HilbertFunction:
    """Hilbert function of the module to total degree `bound` (generators of weight 0)."""
    if bound < 0:
        raise ValueError("degree bound must be >= 0")
    ring = module.ring
    basis = ModuleGroebnerBasis(ring, (to_sparse(r) for r in module.relations), order=TOP)
    leads: Dict[int, List[Monom]] = {}
    for pos, mon in basis.leads:
        leads.setdefault(pos, []).append(mon)
    graded = []
    for k in range(bound + 1):
        monoms = monomials_of_degree(ring.ngens, k)
        graded.append(
            sum(1 for pos in range(module.rank) for m in monoms if _is_standard(m, leads.get(pos, [])))
        )
    return HilbertFunction(graded)


def staircase(basis: Sequence[PolyElement]) -> Optional[List[Monom]]:
    """Standard monomials of a Groebner basis, or None if there are infinitely many."""
    if not basis:
        return None
    ring = basis[0].ring
    leads = [g.LM for g in basis]
    if any(not any(m) for m in leads):
        return []
    bounds = []
    for v in range(ring.ngens):
        pure = [m[v] for m in leads if m[v] and sum(m) == m[v]]
        if not pure:
            return None
        bounds.append(min(pure))
    out = []
    for degree in range(sum(bounds) + 1):
        out.extend(m for m in monomials_of_degree(ring.ngens, degree) if _is_standard(m, leads))
    return out


def _determinant(rows: List[List[PolyElement]], ring: PolyRing) -> PolyElement:
    if len(rows) == 1:
        return rows[0][0]
    total = ring.zero
    for j, p in enumerate(rows[0]):
        if p:
            minor = [row[:j] + row[j + 1:] for row in rows[1:]]
            total += (-1) ** j * p * _determinant(minor, ring)
    return total


def jacobian_minors(components: Sequence[PolyElement], variables: Sequence[PolyElement], size: int) -> Ideal:
    """Ideal of all size x size minors of d(components)/d(variables)."""
    if not components or not variables:
        raise MinorSizeError("empty Jacobian")
    ring = _same_ring(*components, *variables)
    if size < 1 or size > min(len(components), len(variables)):
        raise MinorSizeError(f"minor size {size} out of range for {len(components)}x{len(variables)}")
    jac = [[c.diff(v) for v in variables] for c in components]
    minors = []
    for rows in combinations(range(len(components)), size):
        for cols in combinations(range(len(variables)), size):
            det = _determinant([[jac[i][j] for j in cols] for i in rows], ring)
            if det:
                minors.append(det)
    return Ideal(ring, minors)


def rank_over_qq(entries: Dict[Tuple[int, int], Any], nrows: int, ncols: int) -> int:
    """Rank of a sparse rational matrix."""
    if nrows == 0 or ncols == 0 or not entries:
        return 0
    rows: Dict[int, Dict[int, Any]] = {}
    for (i, j), v in entries.items():
        if v:
            rows.setdefault(i, {})[j] = QQ.convert(v)
    return DomainMatrix(rows, (nrows, ncols), QQ).rank()


def substitute(p: PolyElement, images: Sequence[PolyElement], target: PolyRing) -> PolyElement:
    """Ring map sending the i-th variable of p's ring to images[i]."""
    powers: Dict[Tuple[int, int], PolyElement] = {}
    result = target.zero
    for monom, c in p.items():
        term = target.ground_new(c)
        for i, e in enumerate(monom):
            if e:
                if (i, e) not in powers:
                    powers[(i, e)] = images[i] ** e
                term = term * powers[(i, e)]
        result += term
    return result
