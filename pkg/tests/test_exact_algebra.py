import pytest

from app.utils.errors import BrokenComplexError, InexactDivisionError, MinorSizeError, RingMismatchError
from app.utils.exact_algebra import (
    FPModule,
    Ideal,
    PolyMatrix,
    Submodule,
    groebner_basis,
    ideal_membership,
    jacobian_minors,
    make_ring,
    module_kernel,
    module_lift,
    normal_form,
    poly_arith,
    quotient_presentation,
    radical_membership,
    rank_over_qq,
    staircase,
    substitute,
    truncated_dimension,
)


@pytest.fixture
def xy():
    ring = make_ring(["x", "y"])
    return ring, ring.gens[0], ring.gens[1]


def test_exact_division(xy):
    ring, x, y = xy
    assert poly_arith(x**2 - y**2, x - y, "exact_div") == x + y
    with pytest.raises(InexactDivisionError):
        poly_arith(x**2 + y, x, "exact_div")
    with pytest.raises(InexactDivisionError):
        poly_arith(x, ring.zero, "exact_div")


def test_ring_mismatch_is_rejected(xy):
    _, x, _ = xy
    other = make_ring(["x", "z"])
    with pytest.raises(RingMismatchError):
        poly_arith(x, other.gens[0], "add")


def test_ideal_membership(xy):
    ring, x, y = xy
    ideal = Ideal(ring, [x**2, y])
    assert ideal.contains(x**2 + x * y)
    assert not ideal.contains(x)
    assert not ideal.is_unit()
    assert Ideal(ring, [x, x + 1]).is_unit()


def test_groebner_basis_of_twisted_cubic_equations(xy):
    ring, x, y = xy
    basis = groebner_basis([x**2 - y, x * y - 1])
    ideal = Ideal(ring, basis)
    # x^3 = xy = 1 on the variety
    assert ideal.contains(x**3 - 1)
    assert ideal.contains(y**3 - 1)


def test_normal_form_and_ideal_membership(xy):
    ring, x, y = xy
    basis = groebner_basis([x**2 - y, x * y - 1])
    assert not normal_form(x**3 - 1, basis)
    assert normal_form(x + 1, basis) == x + 1
    ideal = Ideal(ring, basis)
    assert ideal_membership(x * y**2 - y, ideal)
    assert not ideal_membership(x, ideal)


def test_radical_membership(xy):
    ring, x, y = xy
    ideal = Ideal(ring, [x**3, y**2 - x])
    assert radical_membership(x, ideal)
    assert radical_membership(y, ideal)
    assert not radical_membership(x + 1, ideal)


def test_module_kernel_of_koszul_row(xy):
    ring, x, y = xy
    row = PolyMatrix.from_columns(ring, 1, [[x], [y]])
    kernel = module_kernel(row)
    assert kernel
    for v in kernel:
        assert row.apply(v) == [ring.zero]
    # the Koszul syzygy (y, -x) generates the kernel
    assert Submodule(ring, 2, kernel).contains([y, -x])


def test_module_lift_returns_cofactors(xy):
    ring, x, y = xy
    gens = [[x, ring.zero], [y, x]]
    target = [x * y + y**2, x * y]
    cofactors = module_lift(target, gens, ring)
    assert cofactors is not None
    combined = [sum((c * g[i] for c, g in zip(cofactors, gens)), ring.zero) for i in range(2)]
    assert combined == target
    assert module_lift([ring.one, ring.zero], gens, ring) is None


def test_matrix_product_shape_check(xy):
    ring, x, y = xy
    a = PolyMatrix.from_columns(ring, 2, [[x, y]])
    with pytest.raises(ValueError):
        a @ a
    assert (PolyMatrix.from_columns(ring, 1, [[y], [-x]]) @ PolyMatrix.from_columns(ring, 2, [[x, y]])).is_zero()


def test_quotient_presentation_and_hilbert_function(xy):
    ring, x, y = xy
    # (x, y) / (x^2, y) presented on two generators
    module = quotient_presentation([[x], [y]], [[x**2], [y]], 1, ring)
    assert module.rank == 2
    assert not module.is_zero()
    assert module.is_zero_class([ring.zero, ring.one])
    # only the class of x survives, in weight 0
    assert module.hilbert_function(3).graded == [1, 0, 0, 0]


def test_quotient_presentation_rejects_broken_complex(xy):
    ring, x, y = xy
    with pytest.raises(BrokenComplexError):
        quotient_presentation([[x]], [[y]], 1, ring)


def test_quotient_presentation_prunes_redundant_generators(xy):
    ring, x, y = xy
    module = quotient_presentation([[x], [x * y], [y]], [], 1, ring, prune=True)
    assert module.rank == 2


def test_annihilator_of_cyclic_module(xy):
    ring, x, y = xy
    module = FPModule(ring, 1, [[x * y], [y**2]])
    ann = module.annihilator()
    assert ann.contains(x * y)
    assert ann.contains(y**2)
    assert not ann.contains(y)
    assert not ann.contains(x)


def test_hilbert_function_of_free_module(xy):
    ring, _, _ = xy
    free = FPModule(ring, 2, [])
    assert free.hilbert_function(3).graded == [2, 4, 6, 8]
    assert free.hilbert_function(3).cumulative == [2, 6, 12, 20]


def test_staircase(xy):
    ring, x, y = xy
    assert len(staircase(groebner_basis([3 * x**2, 3 * y**2]))) == 4
    assert staircase(groebner_basis([x**2])) is None
    assert staircase(groebner_basis([ring.one])) == []


def test_jacobian_minors(xy):
    ring, x, y = xy
    minors = jacobian_minors([x**2 + y**2, x * y], [x, y], 2)
    # det [[2x, 2y], [y, x]] = 2x^2 - 2y^2
    assert minors.contains(x**2 - y**2)
    with pytest.raises(MinorSizeError):
        jacobian_minors([x**2], [x, y], 2)


def test_rank_over_qq():
    assert rank_over_qq({(0, 0): 1, (0, 1): 2, (1, 0): 2, (1, 1): 4}, 2, 2) == 1
    assert rank_over_qq({(0, 0): 1, (1, 1): 3}, 2, 2) == 2
    assert rank_over_qq({}, 3, 3) == 0


def test_substitute_between_rings(xy):
    ring, x, y = xy
    target = make_ring(["u"])
    u = target.gens[0]
    assert substitute(x**2 + y, [u + 1, u], target) == u**2 + 3 * u + 1


def test_truncated_dimension_of_cyclic_quotient(xy):
    ring, x, y = xy
    module = FPModule(ring, 1, [[x**2], [y]])
    assert truncated_dimension(module, 3).graded == [1, 1, 0, 0]
    with pytest.raises(ValueError):
        truncated_dimension(module, -1)
