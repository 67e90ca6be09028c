import numpy as np
import pytest

from app.utils.charts import (
    ChartMorphism,
    compose_morphisms,
    critical_ideal,
    difference_quotients,
    identification_is_valid,
    identity_morphism,
    product_chart,
    pullback_diamond,
    reduce_to,
    reduction_step,
    validate_chart,
)
from app.utils.errors import ChartMismatchError, MorphismError, NotEliminableError
from app.utils.exact_algebra import make_ring
from app.utils.kd_algebra import BasedChart, build_algebra, random_element


def _chart(label, fiber, f, phi=None):
    ring = make_ring(fiber + ["t"])
    gens = dict(zip(fiber + ["t"], ring.gens))
    return BasedChart(label, ring, fiber, ["t"], [phi(gens)] if phi else [gens["t"]], [g(gens) for g in f], len(f))


def test_example_charts_are_regular(e1, e2, e3):
    for chart in (e1, e2, e3):
        diagnostics = validate_chart(chart)
        assert diagnostics.regular, diagnostics.message
        assert diagnostics.codim_ok


def test_zerodivisor_is_reported():
    chart = _chart("zd", ["x", "y"], [lambda g: g["x"], lambda g: g["x"] * g["y"]])
    diagnostics = validate_chart(chart)
    assert not diagnostics.regular
    assert diagnostics.failed_at == 1


def test_unit_ideal_is_not_proper():
    chart = _chart("unit", ["x"], [lambda g: g["x"], lambda g: g["x"] + 1])
    diagnostics = validate_chart(chart)
    assert not diagnostics.proper
    assert not diagnostics.regular


def test_declared_codimension_mismatch(e1):
    chart = BasedChart("bad", e1.ring, e1.fiber_vars, e1.base_vars, e1.phi, e1.f, 2)
    assert not validate_chart(chart).codim_ok


def test_critical_ideal_of_e1(e1):
    x = e1.ring.gens[0]
    assert critical_ideal(e1).contains(x)


def test_difference_quotients_of_square():
    ring = make_ring(["x", "t"])
    x = ring.gens[0]
    dq = difference_quotients([x**2], [x])
    xp = dq.primed[0]
    assert dq.F[0][0] == xp + x.set_ring(dq.ring)
    assert dq.identity_holds()


def test_difference_quotients_in_two_variables():
    ring = make_ring(["x", "y", "t"])
    x, y = ring.gens[0], ring.gens[1]
    dq = difference_quotients([x**2 * y**2], [x, y])
    assert dq.identity_holds()


def test_morphism_rejects_wrong_h(e1):
    ring = e1.ring
    with pytest.raises(MorphismError):
        ChartMorphism(e1, e1, list(ring.gens), [[ring(2)]])


def test_reduction_step_drops_auxiliary_variable(e1_aux):
    step = reduction_step(e1_aux)
    assert step.variable == "u"
    assert step.chart.fiber_vars == ["x"]
    assert step.chart.l == 1
    assert validate_chart(step.chart).regular


def test_reduction_needs_constant_coefficient(e1):
    with pytest.raises(NotEliminableError):
        reduction_step(e1)
    with pytest.raises(NotEliminableError):
        reduce_to(e1, [])


def test_pullback_commutes_with_differentials(e1_aux):
    step = reduction_step(e1_aux)
    target = build_algebra(e1_aux)
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = random_element(target, rng)
        assert pullback_diamond(step.morphism, a.koszul()) == pullback_diamond(step.morphism, a).koszul()
        assert pullback_diamond(step.morphism, a.derham()) == pullback_diamond(step.morphism, a).derham()


def test_pullback_rejects_foreign_elements(e1, e2):
    with pytest.raises(ChartMismatchError):
        pullback_diamond(identity_morphism(e1), build_algebra(e2).one())


def test_identity_morphism_composes(e1):
    ident = identity_morphism(e1)
    composite = compose_morphisms(ident, ident)
    assert composite.w == ident.w
    assert composite.h == ident.h


def test_product_chart_and_reductions(e1, e1_aux):
    product, renaming = product_chart(e1, e1_aux)
    assert renaming == {"x": "x'", "u": "u'"}
    assert product.fiber_vars == ["x", "x'", "u'"]
    assert identification_is_valid(e1, e1_aux, product, renaming)
    reduced, inclusion, steps = reduce_to(product, e1.fiber_vars)
    assert reduced.fiber_vars == ["x"]
    assert len(steps) == 2
    assert inclusion.target == product


def test_product_keeps_the_auxiliary_relation(e2, e2_aux1):
    product, renaming = product_chart(e2, e2_aux1)
    assert product.fiber_vars == ["x", "y", "x'", "y'", "u'"]
    # t - x'^2 y'^2 is implied by the identification and is dropped
    assert product.l == 4
    assert identification_is_valid(e2, e2_aux1, product, renaming)
    toward_a, _, steps_a = reduce_to(product, e2.fiber_vars)
    assert [st.variable for st in steps_a] == ["x'", "y'", "u'"]
    assert toward_a.l == 1
    toward_b, _, _ = reduce_to(product, [renaming[v] for v in e2_aux1.fiber_vars])
    assert toward_b.fiber_vars == ["x'", "y'", "u'"]
    assert toward_b.l == 2
    assert validate_chart(toward_b).regular


def test_product_needs_matching_bases(e1):
    ring = make_ring(["x", "s"])
    other = BasedChart("other", ring, ["x"], ["s"], [ring.gens[0]], [])
    with pytest.raises(ChartMismatchError):
        product_chart(e1, other)


def test_invalid_identification_is_detected(e1):
    shifted = _chart("shifted", ["x"], [lambda g: g["t"] - g["x"] ** 2 - 1])
    product, renaming = product_chart(e1, shifted)
    assert not identification_is_valid(e1, shifted, product, renaming)
