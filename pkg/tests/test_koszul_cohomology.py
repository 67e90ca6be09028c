import pytest

from app.utils.exact_algebra import Ideal, make_ring
from app.utils.koszul_cohomology import (
    InducedDeRham,
    annihilator_checks,
    check_pi_iso,
    cohomology_table,
    depth_vanishing,
    glue_compare,
    ideals_equal,
    induced_derham,
    koszul_cohomology,
    milnor_number,
    relative_forms_module,
)
from app.utils.spec_loader import parse_polynomial


def test_e1_first_cohomology_vanishes(e1_ctx):
    H = koszul_cohomology(e1_ctx, 1, 1)
    assert H.in_strip
    assert H.ambient_rank == 2
    assert H.is_zero()


def test_e1_functions_on_the_fiber(e1_ctx):
    H = koszul_cohomology(e1_ctx, 0, 0)
    assert H.hilbert(3).graded == [1, 2, 2, 2]


def test_e2_cyclic_module_and_annihilator(e2_ctx):
    H = koszul_cohomology(e2_ctx, 2, 1)
    assert not H.is_zero()
    assert H.module.rank == 1
    assert H.hilbert(8).graded == [1, 2, 2, 2, 2, 2, 2, 2, 2]
    x, y, t = e2_ctx.ring.gens
    assert ideals_equal(H.module.annihilator(), Ideal(e2_ctx.ring, [x * y, t]))


def test_e2_annihilator_checks(e2_ctx):
    report = annihilator_checks(koszul_cohomology(e2_ctx, 2, 1), max_power=4)
    assert report.f_annihilates
    assert report.support_checked
    assert report.support_ok
    assert all(power is not None for power in report.minor_powers)
    assert report.passed


def test_e2_induced_derham_on_the_cyclic_class(e2_ctx):
    induced = induced_derham(e2_ctx, 2, 1)
    assert induced.check_well_defined()
    # d(x e) = dx ^ e + x de survives in H^{3,1} = O/(f, xy^2, x^2y)
    assert not induced.target.is_zero()
    assert not induced.is_zero_map(bound=1)


@pytest.mark.parametrize("name, expected", [("e1_ctx", [1]), ("e3_ctx", [1, 0])])
def test_induced_derham_differentiates_coefficients(name, expected, request):
    ctx = request.getfixturevalue(name)
    induced = InducedDeRham(koszul_cohomology(ctx, 0, 0), koszul_cohomology(ctx, 1, 0))
    x = ctx.ring.gens[0]
    image = induced.apply_vector([x])
    ring = ctx.ring
    assert induced.target.module.is_zero_class([a - ring(b) for a, b in zip(image, expected)])
    assert not induced.target.module.is_zero_class(image)


def test_e3_top_forms_are_one_dimensional(e3_ctx):
    H = koszul_cohomology(e3_ctx, 2, 0)
    assert H.hilbert(3).graded == [1, 0, 0, 0]
    assert relative_forms_module(e3_ctx, 2).hilbert_function(3).graded == [1, 0, 0, 0]


@pytest.mark.parametrize("p", [0, 1])
def test_pi_comparison_on_e1(e1_ctx, p):
    report = check_pi_iso(e1_ctx, p, bound=4)
    assert report.first_discrepancy is None
    assert report.derham_matches
    assert report.passed


@pytest.mark.parametrize("p", [0, 1, 2])
def test_pi_comparison_on_e3(e3_ctx, p):
    assert check_pi_iso(e3_ctx, p, bound=3).passed


def test_depth_vanishing(e3_ctx, e1_ctx):
    assert depth_vanishing(e3_ctx, 1) == (True, [])
    assert depth_vanishing(e1_ctx, 1) == (True, [])


def test_cohomology_table_covers_window(e1_ctx):
    table = cohomology_table(e1_ctx, 1, 2)
    assert [(H.p, H.s) for H in table] == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    assert all(H.is_zero() for H in table if H.s > 0)


def test_ideals_equal():
    ring = make_ring(["x", "y"])
    x, y = ring.gens
    assert ideals_equal(Ideal(ring, [x, y]), Ideal(ring, [x + y, x - y]))
    assert not ideals_equal(Ideal(ring, [x]), Ideal(ring, [x, y]))


@pytest.mark.parametrize(
    "source, names, expected",
    [
        ("x**2", ["x"], 1),
        ("x**3 + y**3", ["x", "y"], 4),
        ("x**3 + y**4", ["x", "y"], 6),
        ("x**2*y**2", ["x", "y"], "infinite"),
    ],
)
def test_milnor_number(source, names, expected):
    ring = make_ring(names)
    phi = parse_polynomial(source, ring)
    assert milnor_number(phi, names) == expected


def test_milnor_number_needs_every_variable():
    ring = make_ring(["x", "y"])
    x, y = ring.gens
    with pytest.raises(ValueError):
        milnor_number(x**2 + y, ["x"])


def test_glue_e1_with_auxiliary_presentation(e1, e1_aux):
    report = glue_compare(e1, e1_aux, 0, 0, bound=3)
    assert report.identification_valid
    assert not report.stuck
    assert report.hilbert_a == report.hilbert_b == [1, 2, 2, 2]
    assert report.derham_commutes
    assert report.equal


@pytest.mark.parametrize("aux", ["e2_aux1", "e2_aux2"])
def test_glue_e2_with_auxiliary_embeddings(e2, aux, request):
    other = request.getfixturevalue(aux)
    report = glue_compare(e2, other, 2, 1, bound=4)
    assert report.identification_valid
    assert not report.stuck
    assert report.hilbert_a == report.hilbert_b == [1, 2, 2, 2, 2]
    assert report.hilbert_reduced_a == report.hilbert_reduced_b == report.hilbert_a
    assert report.equal


def test_glue_e3_with_scaled_relation(e3, e3_scaled):
    report = glue_compare(e3, e3_scaled, 2, 0, bound=3)
    assert report.hilbert_a == report.hilbert_b == [1, 0, 0, 0]
    assert report.equal


@pytest.mark.parametrize("p", [0, 1, 2])
def test_pi_comparison_on_e2(e2_ctx, p):
    report = check_pi_iso(e2_ctx, p, bound=4)
    assert report.first_discrepancy is None
    assert report.derham_matches
