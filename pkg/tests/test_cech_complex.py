import pytest

from app.utils.cech_complex import (
    FORMS,
    FULL,
    KERNEL,
    AtlasSpec,
    build_based_lifting,
    cech_module,
    closed_form_rank,
    coboundary_square,
    commutes_with_derham,
    commutes_with_koszul,
    intersection_chart,
    les_check,
    lifted_coboundary,
    pi_chain_map_check,
    total_cohomology,
    totalize_truncate,
    unlifted_coboundary,
)
from app.utils.charts import validate_chart
from app.utils.errors import NotInNerveError, SpecError, TransitivityError
from app.utils.exact_algebra import make_ring
from app.utils.kd_algebra import component_basis
from app.utils.spec_loader import load_atlas


def test_nerve_and_intersection_charts(line3):
    assert len(line3.nerve) == 7
    chart = intersection_chart(line3, (0, 1))
    assert chart.fiber_vars == ["z0", "z1"]
    assert chart.l == 2
    assert validate_chart(chart).regular
    assert line3.groups[(0, 1, 2)] == (2, 1)


def test_intersection_outside_nerve(line2):
    with pytest.raises(NotInNerveError):
        intersection_chart(line2, (0, 2))


def test_nonlinear_phi_reports_transitivity_defects(line3):
    assert not line3.transitive
    assert all(defect.holds_modulo_ideal for defect in line3.defects)
    assert all(len(defect.chain) == 3 for defect in line3.defects)


def test_strict_transitivity_raises(specs_dir):
    with pytest.raises(TransitivityError):
        build_based_lifting(load_atlas(specs_dir / "atlas_line3.json"), strict=True)


def test_linear_phi_is_transitive(linear3):
    assert linear3.transitive


def test_cech_module_ranks(line3):
    assert [sm.rank for sm in cech_module(line3, 0, 1, 0).summands] == [1, 1, 1]
    assert [sm.rank for sm in cech_module(line3, 0, 1, 1).summands] == [2, 2, 2]
    assert cech_module(line3, 0, 1, 3).rank == 0


def test_coboundary_shapes(line2):
    delta = lifted_coboundary(line2, 0, 1, 0)
    assert delta.shape == (cech_module(line2, 0, 1, 1).rank, cech_module(line2, 0, 1, 0).rank)
    assert unlifted_coboundary(line2, 1, 0).shape == (
        cech_module(line2, 1, 0, 1).rank,
        cech_module(line2, 1, 0, 0).rank,
    )


@pytest.mark.parametrize("p", [0, 1])
@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_coboundary_squares_to_zero_on_linear_atlas(linear3, p, s):
    ok, witness = coboundary_square(linear3, p, s, 0)
    assert ok, witness


@pytest.mark.parametrize("p, s", [(0, 1), (1, 1)])
def test_coboundary_commutes_with_koszul(linear3, p, s):
    assert commutes_with_koszul(linear3, p, s, 0)


def test_coboundary_commutes_with_derham(line2):
    assert commutes_with_derham(line2, 0, 1, 0)
    assert commutes_with_derham(line2, 0, 0, 0)


def test_pi_chain_map(line2):
    assert pi_chain_map_check(line2, 0)
    assert pi_chain_map_check(line2, 1)


@pytest.mark.parametrize(
    "m, l, p, s, expected",
    [(1, 1, 1, 1, 2), (2, 1, 2, 1, 3), (1, 0, 1, 0, 1), (1, 0, 1, 1, 0), (2, 2, 1, 2, 6), (0, 1, 0, 3, 0)],
)
def test_closed_form_rank(m, l, p, s, expected):  # noqa: E741
    assert closed_form_rank(m, l, p, s) == expected


def test_closed_form_matches_component_basis(line3):
    for K in line3.nerve:
        ctx = line3.ctx(K)
        for p in range(ctx.m + 1):
            for s in range(p + ctx.l + 1):
                assert closed_form_rank(ctx.m, ctx.l, p, s) == len(component_basis(ctx, p, s))


def test_truncated_complex_on_line2(line2):
    complex_ = totalize_truncate(line2, 0, FULL)
    assert complex_.strip_ok
    assert complex_.ranks() == complex_.closed_form_ranks()
    assert complex_.square_zero()


@pytest.mark.parametrize("p", [0, 1])
def test_truncated_complex_on_three_charts(linear3, p):
    complex_ = totalize_truncate(linear3, p, FULL)
    assert complex_.strip_ok
    assert complex_.square_zero()


def test_kernel_and_forms_variants(line2):
    kernel = totalize_truncate(line2, 0, KERNEL)
    forms = totalize_truncate(line2, 0, FORMS)
    assert all(sm.s == 0 for n in forms.degrees() for sm in forms.terms[n])
    assert any(sm.kind == KERNEL for n in kernel.degrees() for sm in kernel.terms[n])
    with pytest.raises(ValueError):
        forms.differential_matrix(0)
    with pytest.raises(ValueError):
        totalize_truncate(line2, 0, "sheaf")


@pytest.fixture(scope="module")
def e3_de_rham(specs_dir):
    lifting = build_based_lifting(load_atlas(specs_dir / "e3_single_atlas.json"))
    complex_ = totalize_truncate(lifting, variant=FORMS, triple=True, p_max=2)
    return total_cohomology(complex_, 4)


def test_de_rham_functions_of_e3_come_from_the_base(e3_de_rham):
    h0 = e3_de_rham.degrees[0]
    assert h0.dims == [1, 2, 3, 4, 5]
    assert set(h0.graded) == {1}
    assert h0.stabilized


def test_de_rham_first_cohomology_of_e3_has_rank_one(e3_de_rham):
    # generated over Q[t] by t(x dy - y dx), of weight 3
    h1 = e3_de_rham.degrees[1]
    assert h1.graded[:4] == [0, 0, 0, 1]
    assert all(g in (0, 1) for g in h1.graded)


def test_de_rham_top_cohomology_of_e3_vanishes(e3_de_rham):
    # d(x dy) = dx ^ dy
    h2 = e3_de_rham.degrees[2]
    assert h2.dims == [0, 0, 0, 0, 0]
    assert h2.stabilized


def test_top_forms_slice_of_e3(specs_dir):
    lifting = build_based_lifting(load_atlas(specs_dir / "e3_single_atlas.json"))
    result = total_cohomology(totalize_truncate(lifting, 2, FORMS), 3)
    # Omega^2 of E3 is Q dx ^ dy, of weight 2
    assert result.degrees[0].dims == [0, 0, 1, 1]
    assert result.degrees[0].graded == [0, 0, 1, 0]


def test_exact_triangle_on_single_chart(specs_dir):
    lifting = build_based_lifting(load_atlas(specs_dir / "e1_single_atlas.json"))
    report = les_check(lifting, 0, 2)
    assert report.termwise_ok, report.mismatches
    assert report.passed


def test_exact_triangle_for_top_forms_of_e3(specs_dir):
    lifting = build_based_lifting(load_atlas(specs_dir / "e3_single_atlas.json"))
    report = les_check(lifting, 2, 3)
    assert report.passed, report.mismatches


def test_total_cohomology_rejects_negative_bound(line2):
    with pytest.raises(ValueError):
        total_cohomology(totalize_truncate(line2, 0, FULL), -1)


def test_atlas_spec_validation():
    ring = make_ring(["x", "t"])
    x, _ = ring.gens
    with pytest.raises(SpecError):
        AtlasSpec("bad", ring, ["x"], ["t"], [x**2], [[x], [x + 1]], [(0, 2)])
    with pytest.raises(SpecError):
        AtlasSpec("bad", ring, ["x"], ["t"], [x**2], [[x], [x + 1], [x + 2]], [(0, 1, 2)])
    with pytest.raises(SpecError):
        AtlasSpec("bad", ring, ["x"], ["t"], [x**2, x], [[x]], [(0,)])


def test_non_invertible_chart_map():
    ring = make_ring(["x", "t"])
    x, _ = ring.gens
    spec = AtlasSpec("square", ring, ["x"], ["t"], [x**2], [[x**2]], [(0,)])
    with pytest.raises(SpecError):
        build_based_lifting(spec)
