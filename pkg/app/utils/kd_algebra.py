"""
Koszul–De Rham algebra of a based relative chart.

Elements are finite sums g * dz_W * xi_X * eta^E with g a polynomial on the
chart ring, W an ascending set of fiber indices, X an ascending set of
relation indices and E an exponent vector. Factors are kept in canonical
order (dz ascending, then xi ascending); eta is even and commutes with all.

Differentials (odd derivations):
- koszul:  xi_i -> f_i,  eta_i -> -df_i   (= partial + tilde)
- derham:  relative d on coefficients, xi_i -> eta_i
- partial: xi_i -> f_i,  eta_i -> 0
- tilde:   xi_i -> 0,    eta_i -> -df_i

Bidegree: deg_DR = |W| + |E|, deg_K = |X| + |E|.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy.polys.rings import PolyElement, PolyRing

from app.utils.errors import ChartDefinitionError, ChartMismatchError
from app.utils.exact_algebra import PolyMatrix

logger = logging.getLogger(__name__)

Key = Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]

DIFFERENTIALS = ("koszul", "derham", "partial", "tilde")


@dataclass
class BasedChart:
    """
    Polynomial model of a based relative chart. The ring variables are the
    fiber variables followed by the base variables.
    """

    label: str
    ring: PolyRing
    fiber_vars: List[str]
    base_vars: List[str]
    phi: List[PolyElement]
    f: List[PolyElement]
    codim: Optional[int] = None

    def __post_init__(self):
        names = list(self.fiber_vars) + list(self.base_vars)
        if len(set(names)) != len(names):
            raise ChartDefinitionError(f"duplicate variable names in chart {self.label!r}: {names}")
        if [str(s) for s in self.ring.symbols] != names:
            raise ChartDefinitionError(f"ring {self.ring} does not match variables {names}")
        for p in list(self.phi) + list(self.f):
            if p.ring != self.ring:
                raise ChartDefinitionError(f"polynomial {p} is not in the ring of chart {self.label!r}")

    @property
    def m(self) -> int:
        return len(self.fiber_vars)

    @property
    def k(self) -> int:
        return len(self.base_vars)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.f)

    @property
    def fiber_gens(self) -> List[PolyElement]:
        return list(self.ring.gens[: self.m])

    @property
    def base_gens(self) -> List[PolyElement]:
        return list(self.ring.gens[self.m:])

    def with_f(self, f: Sequence[PolyElement], label: Optional[str] = None) -> "BasedChart":
        return BasedChart(label or self.label, self.ring, self.fiber_vars, self.base_vars, self.phi, list(f), self.codim)


@dataclass(frozen=True)
class KDTerm:
    """One term coeff * x^mono * dz_wedge * xi_xi * eta^eta."""

    coeff: object
    mono: Tuple[int, ...]
    wedge: Tuple[int, ...]
    xi: Tuple[int, ...]
    eta: Tuple[int, ...]

    @property
    def deg_dr(self) -> int:
        return len(self.wedge) + sum(self.eta)

    @property
    def deg_k(self) -> int:
        return len(self.xi) + sum(self.eta)

    @property
    def parity(self) -> int:
        return (len(self.wedge) + len(self.xi)) % 2


@dataclass(frozen=True)
class BasisSymbol:
    """Free-module basis symbol of a component K^{p,s}; split = (b, c) for K^{p,{b,c}}."""

    wedge: Tuple[int, ...]
    xi: Tuple[int, ...]
    eta: Tuple[int, ...]

    @property
    def key(self) -> Key:
        return (self.wedge, self.xi, self.eta)

    @property
    def split(self) -> Tuple[int, int]:
        return (len(self.xi), sum(self.eta))


def _merge_sign(a: Sequence[int], b: Sequence[int]) -> int:
    inversions = sum(1 for x in a for y in b if x > y)
    return -1 if inversions % 2 else 1


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class KDContext:
    """The algebra K_{W/S,f} of one chart; immutable after construction."""

    def __init__(self, chart: BasedChart):
        self.chart = chart
        self.ring = chart.ring
        self.m = chart.m
        self.l = chart.l
        self.k = chart.k
        fiber = chart.fiber_gens
        # jac[i][j] = d f_i / d z_j
        self.jac = [[fi.diff(z) for z in fiber] for fi in chart.f]
        self._zero_eta = (0,) * self.l
        self._basis_cache: Dict[Tuple[int, int], List[BasisSymbol]] = {}

    # --- constructors ---
    def element(self, terms: Optional[Dict[Key, PolyElement]] = None) -> "KDElement":
        return KDElement(self, terms or {})

    def zero(self) -> "KDElement":
        return KDElement(self, {})

    def scalar(self, p: Union[PolyElement, int]) -> "KDElement":
        p = self.ring(p) if not isinstance(p, PolyElement) else p
        return KDElement(self, {((), (), self._zero_eta): p})

    def one(self) -> "KDElement":
        return self.scalar(1)

    def var(self, name: str) -> "KDElement":
        return self.scalar(self.ring.gens[[str(s) for s in self.ring.symbols].index(name)])

    def dz(self, j: int) -> "KDElement":
        return KDElement(self, {((j,), (), self._zero_eta): self.ring.one})

    def xi(self, i: int) -> "KDElement":
        return KDElement(self, {((), (i,), self._zero_eta): self.ring.one})

    def eta(self, i: int) -> "KDElement":
        e = tuple(1 if k == i else 0 for k in range(self.l))
        return KDElement(self, {((), (), e): self.ring.one})

    def basis_element(self, symbol: BasisSymbol, coeff: Optional[PolyElement] = None) -> "KDElement":
        return KDElement(self, {symbol.key: self.ring.one if coeff is None else coeff})

    def form(self, coeff: PolyElement, wedge: Sequence[int]) -> "KDElement":
        return KDElement(self, {(tuple(wedge), (), self._zero_eta): coeff})


def build_algebra(chart: BasedChart) -> KDContext:
    logger.debug("building KD algebra for chart %s (m=%d, l=%d)", chart.label, chart.m, chart.l)
    return KDContext(chart)


class KDElement:
    """Sparse element of a KD algebra: {(W, X, E): coefficient polynomial}."""

    __slots__ = ("ctx", "_terms")

    def __init__(self, ctx: KDContext, terms: Dict[Key, PolyElement]):
        self.ctx = ctx
        self._terms = {key: c for key, c in terms.items() if c}

    # --- access ---
    @property
    def components(self) -> Dict[Key, PolyElement]:
        return dict(self._terms)

    def coefficient(self, key: Key) -> PolyElement:
        return self._terms.get(key, self.ctx.ring.zero)

    def terms(self) -> List[KDTerm]:
        out = []
        for (w, x, e), g in sorted(self._terms.items()):
            for mono, c in sorted(g.items()):
                out.append(KDTerm(c, mono, w, x, e))
        return out

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def parity(self) -> int:
        parities = {(len(w) + len(x)) % 2 for (w, x, _) in self._terms}
        if len(parities) > 1:
            raise ValueError("element has mixed parity")
        return parities.pop() if parities else 0

    # --- arithmetic ---
    def _check(self, other: "KDElement") -> None:
        if other.ctx is not self.ctx and other.ctx.chart != self.ctx.chart:
            raise ChartMismatchError(f"{self.ctx.chart.label} vs {other.ctx.chart.label}")

    def __add__(self, other: "KDElement") -> "KDElement":
        self._check(other)
        terms = dict(self._terms)
        for key, c in other._terms.items():
            terms[key] = terms.get(key, self.ctx.ring.zero) + c
        return KDElement(self.ctx, terms)

    def __neg__(self) -> "KDElement":
        return KDElement(self.ctx, {key: -c for key, c in self._terms.items()})

    def __sub__(self, other: "KDElement") -> "KDElement":
        return self + (-other)

    def scale(self, p: Union[PolyElement, int]) -> "KDElement":
        return KDElement(self.ctx, {key: c * p for key, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, KDElement):
            return kd_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KDElement):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash(tuple(sorted(self._terms)))

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for (w, x, e), g in sorted(self._terms.items()):
            sym = "".join(f"dz{j}" for j in w) + "".join(f"xi{i}" for i in x)
            sym += "".join(f"eta{i}^{n}" for i, n in enumerate(e) if n)
            parts.append(f"({g})*{sym or '1'}")
        return " + ".join(parts)

    # --- gradings ---
    def bidegree_split(self) -> Dict[Tuple[int, int], "KDElement"]:
        return bidegree_split(self)

    def koszul(self) -> "KDElement":
        return apply_diff(self, "koszul")

    def derham(self) -> "KDElement":
        return apply_diff(self, "derham")


def kd_mul(a: KDElement, b: KDElement) -> KDElement:
    """Graded-commutative product with canonical sign normalization."""
    a._check(b)
    ring = a.ctx.ring
    out: Dict[Key, PolyElement] = {}
    for (w1, x1, e1), g1 in a._terms.items():
        for (w2, x2, e2), g2 in b._terms.items():
            if set(w1) & set(w2) or set(x1) & set(x2):
                continue
            sign = -1 if (len(x1) * len(w2)) % 2 else 1
            sign *= _merge_sign(w1, w2) * _merge_sign(x1, x2)
            key = (
                tuple(sorted(w1 + w2)),
                tuple(sorted(x1 + x2)),
                tuple(p + q for p, q in zip(e1, e2)),
            )
            out[key] = out.get(key, ring.zero) + sign * g1 * g2
    return KDElement(a.ctx, out)


def _partial_terms(ctx: KDContext, w, x, e, g, out: Dict[Key, PolyElement]) -> None:
    for pos, i in enumerate(x):
        sign = -1 if (len(w) + pos) % 2 else 1
        key = (w, x[:pos] + x[pos + 1:], e)
        out[key] = out.get(key, ctx.ring.zero) + sign * g * ctx.chart.f[i]


def _tilde_terms(ctx: KDContext, w, x, e, g, out: Dict[Key, PolyElement]) -> None:
    for i, n in enumerate(e):
        if not n:
            continue
        lowered = e[:i] + (n - 1,) + e[i + 1:]
        for j in range(ctx.m):
            if j in w or not ctx.jac[i][j]:
                continue
            above = sum(1 for v in w if v > j)
            sign = -1 if (len(w) + 1 + above) % 2 else 1
            key = (tuple(sorted(w + (j,))), x, lowered)
            out[key] = out.get(key, ctx.ring.zero) + sign * n * ctx.jac[i][j] * g


def _derham_terms(ctx: KDContext, w, x, e, g, out: Dict[Key, PolyElement]) -> None:
    for j, z in enumerate(ctx.chart.fiber_gens):
        if j in w:
            continue
        dg = g.diff(z)
        if not dg:
            continue
        below = sum(1 for v in w if v < j)
        sign = -1 if below % 2 else 1
        key = (tuple(sorted(w + (j,))), x, e)
        out[key] = out.get(key, ctx.ring.zero) + sign * dg
    for pos, i in enumerate(x):
        sign = -1 if (len(w) + pos) % 2 else 1
        raised = e[:i] + (e[i] + 1,) + e[i + 1:]
        key = (w, x[:pos] + x[pos + 1:], raised)
        out[key] = out.get(key, ctx.ring.zero) + sign * g


def apply_diff(a: KDElement, which: str) -> KDElement:
    """Apply one of the differentials as an odd derivation."""
    if which not in DIFFERENTIALS:
        raise ValueError(f"Unknown differential: {which}")
    ctx = a.ctx
    out: Dict[Key, PolyElement] = {}
    for (w, x, e), g in a._terms.items():
        if which in ("koszul", "partial"):
            _partial_terms(ctx, w, x, e, g, out)
        if which in ("koszul", "tilde"):
            _tilde_terms(ctx, w, x, e, g, out)
        if which == "derham":
            _derham_terms(ctx, w, x, e, g, out)
    return KDElement(ctx, out)


def bidegree_split(a: KDElement) -> Dict[Tuple[int, int], KDElement]:
    parts: Dict[Tuple[int, int], Dict[Key, PolyElement]] = {}
    for (w, x, e), g in a._terms.items():
        deg = (len(w) + sum(e), len(x) + sum(e))
        parts.setdefault(deg, {})[(w, x, e)] = g
    return {deg: KDElement(a.ctx, terms) for deg, terms in sorted(parts.items())}


def split_component(a: KDElement) -> Dict[Tuple[int, int, int], KDElement]:
    """Pieces of a keyed by (p, b, c), the summands K^{p,{b,c}} of the split double complex."""
    parts: Dict[Tuple[int, int, int], Dict[Key, PolyElement]] = {}
    for (w, x, e), g in a._terms.items():
        c = sum(e)
        parts.setdefault((len(w) + c, len(x), c), {})[(w, x, e)] = g
    return {key: KDElement(a.ctx, terms) for key, terms in sorted(parts.items())}


def component_basis(ctx: KDContext, p: int, s: int) -> List[BasisSymbol]:
    """Ordered basis of K^{p,s}: by a = |E|, then dz-subsets, xi-subsets, eta-compositions."""
    if p < 0 or s < 0 or p - s < -ctx.l or p - s > ctx.m:
        return []
    cached = ctx._basis_cache.get((p, s))
    if cached is not None:
        return cached
    basis = []
    for a in range(min(p, s) + 1):
        if a > 0 and ctx.l == 0:
            break
        if p - a > ctx.m or s - a > ctx.l:
            continue
        for w in combinations(range(ctx.m), p - a):
            for x in combinations(range(ctx.l), s - a):
                for e in _compositions(a, ctx.l):
                    basis.append(BasisSymbol(w, x, e))
    ctx._basis_cache[(p, s)] = basis
    return basis


def target_bidegree(which: str, p: int, s: int) -> Tuple[int, int]:
    return (p + 1, s) if which == "derham" else (p, s - 1)


def operator_matrix(ctx: KDContext, which: str, p: int, s: int) -> PolyMatrix:
    """
    Matrix of a differential on K^{p,s}; columns indexed by the source basis.
    Only the Koszul matrix is O-linear. For derham the columns are d_DR of the
    basis symbols, and g e must go through apply_diff.
    """
    source = component_basis(ctx, p, s)
    tp, ts = target_bidegree(which, p, s)
    target = component_basis(ctx, tp, ts)
    index = {sym.key: i for i, sym in enumerate(target)}
    entries = {}
    for j, sym in enumerate(source):
        image = apply_diff(ctx.basis_element(sym), which)
        for key, g in image.components.items():
            entries[(index[key], j)] = g
    return PolyMatrix(ctx.ring, len(target), len(source), entries)


def vector_to_element(ctx: KDContext, p: int, s: int, vector: Sequence[PolyElement]) -> KDElement:
    basis = component_basis(ctx, p, s)
    return KDElement(ctx, {sym.key: g for sym, g in zip(basis, vector)})


def element_to_vector(a: KDElement, p: int, s: int) -> List[PolyElement]:
    basis = component_basis(a.ctx, p, s)
    index = {sym.key: i for i, sym in enumerate(basis)}
    vector = [a.ctx.ring.zero] * len(basis)
    for key, g in a.components.items():
        if key not in index:
            raise ValueError(f"term {key} is not in K^{{{p},{s}}}")
        vector[index[key]] = g
    return vector


# --- sampling ---
def random_polynomial(ring: PolyRing, rng: np.random.Generator, degree: int = 2, n_terms: int = 3) -> PolyElement:
    p = ring.zero
    for _ in range(n_terms):
        exps = [0] * ring.ngens
        for _ in range(int(rng.integers(0, degree + 1))):
            exps[int(rng.integers(0, ring.ngens))] += 1
        c = int(rng.integers(-3, 4))
        if c:
            p += ring.from_dict({tuple(exps): c})
    return p


def random_element(
    ctx: KDContext,
    rng: np.random.Generator,
    p_max: Optional[int] = None,
    s_max: Optional[int] = None,
    n_terms: int = 3,
    degree: int = 2,
) -> KDElement:
    """Seeded random bi-homogeneous element; zero only if every drawn coefficient vanished."""
    p_max = ctx.m if p_max is None else p_max
    s_max = ctx.l + 1 if s_max is None else s_max
    for _ in range(32):
        p, s = int(rng.integers(0, p_max + 1)), int(rng.integers(0, s_max + 1))
        basis = component_basis(ctx, p, s)
        if basis:
            break
    else:
        basis = component_basis(ctx, 0, 0)
    terms: Dict[Key, PolyElement] = {}
    for _ in range(n_terms):
        sym = basis[int(rng.integers(0, len(basis)))]
        terms[sym.key] = terms.get(sym.key, ctx.ring.zero) + random_polynomial(ctx.ring, rng, degree)
    return KDElement(ctx, terms)


@dataclass
class IdentityResult:
    """Outcome of one identity checked on a sample."""

    name: str
    samples: int
    failures: int = 0
    witness: str = ""

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _leibniz_residual(D: str, a: KDElement, b: KDElement) -> KDElement:
    sign = -1 if a.parity() else 1
    lhs = apply_diff(kd_mul(a, b), D)
    rhs = kd_mul(apply_diff(a, D), b) + kd_mul(a, apply_diff(b, D)).scale(sign)
    return lhs - rhs


def identity_suite(ctx: KDContext, samples: int, seed: int) -> List[IdentityResult]:
    """Check every differential identity of the algebra on seeded random elements."""
    rng = np.random.default_rng(seed)
    checks = {
        "koszul^2": lambda a: a.koszul().koszul(),
        "derham^2": lambda a: a.derham().derham(),
        "koszul*derham+derham*koszul": lambda a: a.koszul().derham() + a.derham().koszul(),
        "partial^2": lambda a: apply_diff(apply_diff(a, "partial"), "partial"),
        "tilde^2": lambda a: apply_diff(apply_diff(a, "tilde"), "tilde"),
        "partial*tilde+tilde*partial": lambda a: apply_diff(apply_diff(a, "partial"), "tilde")
        + apply_diff(apply_diff(a, "tilde"), "partial"),
        "partial+tilde-koszul": lambda a: apply_diff(a, "partial") + apply_diff(a, "tilde") - a.koszul(),
        "bidegree-split-sum": lambda a: sum(a.bidegree_split().values(), ctx.zero()) - a,
    }
    results = {name: IdentityResult(name, samples) for name in checks}
    results["leibniz-koszul"] = IdentityResult("leibniz-koszul", samples)
    results["leibniz-derham"] = IdentityResult("leibniz-derham", samples)
    for _ in range(samples):
        a = random_element(ctx, rng)
        for name, check in checks.items():
            residual = check(a)
            if residual:
                results[name].failures += 1
                results[name].witness = results[name].witness or repr(a)
        b = random_element(ctx, rng)
        for D in ("koszul", "derham"):
            if _leibniz_residual(D, a, b):
                res = results[f"leibniz-{D}"]
                res.failures += 1
                res.witness = res.witness or f"{a!r} ; {b!r}"
    logger.info(
        "chart %s: %d identities on %d samples, %d failing",
        ctx.chart.label, len(results), samples, sum(1 for r in results.values() if not r.passed),
    )
    return list(results.values())
