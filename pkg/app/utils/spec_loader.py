"""
Loading chart and atlas files.

Files are JSON trees validated by the schemas in app.schemas; polynomials are
infix strings ("t - x**2 - y^2") parsed by sympy over the declared variables
only. Every problem is reported as SpecError with a line and column.
"""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from pydantic import ValidationError
from sympy import Symbol
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.rings import PolyElement, PolyRing

from app.config import get_settings
from app.schemas import AtlasFile, ChartFile
from app.utils.cech_complex import AtlasSpec
from app.utils.errors import SpecError
from app.utils.exact_algebra import make_ring
from app.utils.kd_algebra import BasedChart

logger = logging.getLogger(__name__)

TRANSFORMATIONS = standard_transformations + (convert_xor,)


def _locate(text: str, needle: str) -> Tuple[int, int]:
    """1-based line and column of the first occurrence of needle (0, 0 when absent)."""
    idx = text.find(needle)
    if idx < 0:
        return 0, 0
    line = text.count("\n", 0, idx) + 1
    column = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, column


def parse_polynomial(source: str, ring: PolyRing, text: str = "") -> PolyElement:
    """Parse an infix polynomial over the ring's variables; anything else is undeclared."""
    names = [str(s) for s in ring.symbols]
    local = {name: Symbol(name) for name in names}
    line, column = _locate(text, source) if text else (0, 0)
    try:
        expr = parse_expr(source, local_dict=local, transformations=TRANSFORMATIONS, evaluate=True)
    except (SyntaxError, TypeError, ValueError) as e:
        raise SpecError(f"cannot parse polynomial {source!r}: {e}", line, column)
    unknown = sorted(str(s) for s in expr.free_symbols if str(s) not in names)
    if unknown:
        raise SpecError(f"undeclared variable {unknown[0]!r} in {source!r}", line, column)
    try:
        return ring.from_expr(expr)
    except (ValueError, TypeError) as e:
        raise SpecError(f"{source!r} is not a polynomial with rational coefficients: {e}", line, column)


def _read(path: Union[str, Path]) -> Tuple[dict, str]:
    p = Path(path)
    if not p.is_file():
        raise SpecError(f"no such file: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"{p.name}: {e.msg}", e.lineno, e.colno)
    if not isinstance(data, dict):
        raise SpecError(f"{p.name}: top level must be an object", 1, 1)
    return data, text


def _validation_error(name: str, e: ValidationError, text: str) -> SpecError:
    first = e.errors()[0]
    where = ".".join(str(part) for part in first.get("loc", ()))
    line, column = _locate(text, f'"{first["loc"][0]}"') if first.get("loc") else (0, 0)
    return SpecError(f"{name}: {where}: {first['msg']}", line, column)


def _fresh(prefix: str, taken: set) -> str:
    k = 0
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


def build_chart(spec: ChartFile, text: str = "", order: str = None) -> BasedChart:
    """BasedChart from a validated chart file; `invert` entries adjoin u with g*u - 1."""
    order = order or get_settings().MONOMIAL_ORDER
    declared = make_ring(spec.fiber_vars + spec.base_vars, order)
    inverted = [parse_polynomial(g, declared, text) for g in spec.invert]
    taken = set(spec.fiber_vars) | set(spec.base_vars)
    aux: List[str] = []
    for _ in inverted:
        name = _fresh("u", taken)
        taken.add(name)
        aux.append(name)
    fiber = spec.fiber_vars + aux
    ring = make_ring(fiber + spec.base_vars, order)
    f = [parse_polynomial(g, ring, text) for g in spec.f]
    for g, name in zip(inverted, aux):
        f.append(g.set_ring(ring) * ring.gens[fiber.index(name)] - 1)
    phi = [parse_polynomial(g, ring, text) for g in spec.phi]
    if len(phi) != len(spec.base_vars):
        raise SpecError(f"{spec.label}: phi has {len(phi)} components for {len(spec.base_vars)} base variables")
    codim = spec.codim + len(aux) if spec.codim is not None else None
    return BasedChart(spec.label, ring, fiber, list(spec.base_vars), phi, f, codim)


def build_atlas(spec: AtlasFile, text: str = "", order: str = None) -> AtlasSpec:
    order = order or get_settings().MONOMIAL_ORDER
    model_ring = make_ring(spec.model_vars + spec.base_vars, order)
    phi = [parse_polynomial(g, model_ring, text) for g in spec.phi]
    maps = [[parse_polynomial(g, model_ring, text) for g in entry.map] for entry in spec.charts]
    chart_vars = [entry.vars for entry in spec.charts] if all(entry.vars for entry in spec.charts) and spec.charts else []
    return AtlasSpec(
        spec.label,
        model_ring,
        list(spec.model_vars),
        list(spec.base_vars),
        phi,
        maps,
        [tuple(K) for K in spec.nerve or [] if K],
        chart_vars,
        order,
    )


def load_spec(path: Union[str, Path]) -> Union[BasedChart, AtlasSpec]:
    """Parse and validate a chart or atlas file."""
    data, text = _read(path)
    name = Path(path).name
    kind = data.get("kind") or ("atlas" if "charts" in data else "chart")
    model = AtlasFile if kind == "atlas" else ChartFile
    try:
        spec = model.model_validate(data)
    except ValidationError as e:
        raise _validation_error(name, e, text)
    result = build_atlas(spec, text) if kind == "atlas" else build_chart(spec, text)
    logger.info("loaded %s %s from %s", kind, spec.label, name)
    return result


def parse_variables(names: Union[str, Sequence[str]]) -> List[str]:
    if isinstance(names, str):
        names = names.split(",")
    out = [n.strip() for n in names if n.strip()]
    if not out:
        raise SpecError("no variables given")
    return out


def load_chart(path: Union[str, Path]) -> BasedChart:
    spec = load_spec(path)
    if not isinstance(spec, BasedChart):
        raise SpecError(f"{Path(path).name}: expected a chart file, got an atlas")
    return spec


def load_atlas(path: Union[str, Path]) -> AtlasSpec:
    spec = load_spec(path)
    if not isinstance(spec, AtlasSpec):
        raise SpecError(f"{Path(path).name}: expected an atlas file, got a chart")
    return spec
