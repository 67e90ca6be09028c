import numpy as np
import pytest

from app.utils.errors import ChartDefinitionError, ChartMismatchError
from app.utils.exact_algebra import make_ring
from app.utils.kd_algebra import (
    BasedChart,
    apply_diff,
    build_algebra,
    component_basis,
    element_to_vector,
    identity_suite,
    kd_mul,
    operator_matrix,
    random_element,
    split_component,
    vector_to_element,
)


def test_generators_and_differentials_on_e1(e1_ctx):
    ctx = e1_ctx
    x = ctx.ring.gens[0]
    f = ctx.chart.f[0]
    assert ctx.xi(0).koszul() == ctx.scalar(f)
    assert ctx.xi(0).derham() == ctx.eta(0)
    # koszul(eta) = -df restricted to the fiber = 2x dx
    assert ctx.eta(0).koszul() == ctx.dz(0).scale(2 * x)
    assert ctx.var("x").derham() == ctx.dz(0)
    assert ctx.var("t").derham().is_zero()


def test_graded_commutative_signs(e2_ctx):
    ctx = e2_ctx
    dx, dy, xi, eta = ctx.dz(0), ctx.dz(1), ctx.xi(0), ctx.eta(0)
    assert kd_mul(dx, dx).is_zero()
    assert kd_mul(xi, xi).is_zero()
    assert kd_mul(dx, dy) == -kd_mul(dy, dx)
    assert kd_mul(dx, xi) == -kd_mul(xi, dx)
    assert kd_mul(eta, dx) == kd_mul(dx, eta)
    assert not kd_mul(eta, eta).is_zero()


def test_product_is_associative_on_samples(e2_ctx):
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b, c = (random_element(e2_ctx, rng) for _ in range(3))
        assert kd_mul(kd_mul(a, b), c) == kd_mul(a, kd_mul(b, c))


def test_koszul_matrix_on_k11_of_e1(e1_ctx):
    ctx = e1_ctx
    x = ctx.ring.gens[0]
    f = ctx.chart.f[0]
    basis = component_basis(ctx, 1, 1)
    assert [sym.split for sym in basis] == [(1, 0), (0, 1)]
    matrix = operator_matrix(ctx, "koszul", 1, 1)
    assert matrix.shape == (1, 2)
    assert matrix.get(0, 0) == -f
    assert matrix.get(0, 1) == 2 * x


def test_component_basis_respects_strip(e1_ctx):
    assert component_basis(e1_ctx, 3, 0) == []
    assert component_basis(e1_ctx, 0, 2) == []
    assert len(component_basis(e1_ctx, 1, 2)) == 1
    assert len(component_basis(e1_ctx, 2, 2)) == 2


def test_vector_round_trip(e2_ctx):
    rng = np.random.default_rng(7)
    basis = component_basis(e2_ctx, 1, 1)
    vector = [e2_ctx.ring.gens[0] * (i + 1) for i in range(len(basis))]
    element = vector_to_element(e2_ctx, 1, 1, vector)
    assert element_to_vector(element, 1, 1) == vector
    with pytest.raises(ValueError):
        element_to_vector(random_element(e2_ctx, rng, p_max=0, s_max=0) + e2_ctx.dz(0), 0, 0)


def test_bidegree_split_recovers_element(e3_ctx):
    a = e3_ctx.dz(0) + e3_ctx.xi(0) + e3_ctx.eta(0)
    parts = a.bidegree_split()
    assert set(parts) == {(1, 0), (0, 1), (1, 1)}
    assert sum(parts.values(), e3_ctx.zero()) == a


def test_split_component_keys(e3_ctx):
    a = e3_ctx.dz(0) + e3_ctx.xi(0) + e3_ctx.eta(0) + e3_ctx.dz(1) * e3_ctx.eta(0)
    parts = split_component(a)
    assert set(parts) == {(1, 0, 0), (0, 1, 0), (1, 0, 1), (2, 0, 1)}
    assert sum(parts.values(), e3_ctx.zero()) == a


@pytest.mark.parametrize("name", ["e1_ctx", "e2_ctx", "e3_ctx"])
def test_identity_suite_passes(name, request):
    ctx = request.getfixturevalue(name)
    results = identity_suite(ctx, 25, 0)
    assert results
    failed = [r.name for r in results if not r.passed]
    assert failed == []


def test_identity_suite_is_reproducible(e2_ctx):
    first = [(r.name, r.failures) for r in identity_suite(e2_ctx, 5, 11)]
    second = [(r.name, r.failures) for r in identity_suite(e2_ctx, 5, 11)]
    assert first == second


def test_unknown_differential(e1_ctx):
    with pytest.raises(ValueError):
        apply_diff(e1_ctx.one(), "lie")


def test_elements_of_different_charts_do_not_mix(e1_ctx, e2_ctx):
    with pytest.raises(ChartMismatchError):
        e1_ctx.dz(0) + e2_ctx.dz(0)


def test_chart_rejects_duplicate_names():
    ring = make_ring(["x", "t"])
    with pytest.raises(ChartDefinitionError):
        BasedChart("dup", ring, ["x"], ["x"], [], [])


def test_chart_without_relations_has_only_forms():
    ring = make_ring(["x", "y", "t"])
    ctx = build_algebra(BasedChart("free", ring, ["x", "y"], ["t"], [ring.gens[0]], []))
    assert ctx.l == 0
    assert len(component_basis(ctx, 1, 0)) == 2
    assert component_basis(ctx, 1, 1) == []
