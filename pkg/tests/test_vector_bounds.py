import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import geometry as geo
from cellbounds import scalar_bounds as sb
from cellbounds import vector_bounds as vb
from cellbounds.errors import DependentNormalsError, PreconditionError


def _pair(beta, phi=0.0):
    n1 = [math.cos(phi), math.sin(phi)]
    n2 = [math.cos(phi + beta), math.sin(phi + beta)]
    return geo.NormalSystem.from_vectors([n1, n2])


def test_right_angle_gives_max_constant():
    v = vb.vector_constant_2d(0.3, 0.5, math.pi / 2)
    assert v.value == pytest.approx(0.5)
    assert v.lambda_min == pytest.approx(1.0)


def test_angle_formula_value():
    beta = math.pi / 3
    v = vb.vector_constant_2d(1.0, 1.0, beta)
    assert v.value == pytest.approx(math.sqrt((1 + 0.5) / (1 - 0.5)))


def test_dependent_normals_rejected():
    for beta in (0.0, math.pi, -0.1, 1e-12):
        with pytest.raises(DependentNormalsError):
            vb.vector_constant_2d(1.0, 1.0, beta)


def test_small_angle_has_no_cancellation():
    beta = 1e-6
    v = vb.vector_constant_2d(1.0, 1.0, beta)
    exact = math.sqrt((1 + math.cos(beta)) / (1 - math.cos(beta)))
    # 1/tan(beta/2) is the stable form of the same expression
    assert v.value == pytest.approx(1 / math.tan(beta / 2), rel=1e-9)
    assert v.value == pytest.approx(exact, rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, math.pi - 0.01), st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(0, 2 * math.pi))
def test_general_form_dominates_angle_form(beta, c1, c2, phi):
    ang = vb.vector_constant_2d(c1, c2, beta).value
    gen = vb.vector_constant_general([c1, c2], _pair(beta, phi)).value
    assert gen >= ang * (1 - 1e-12)
    ratio = math.sqrt(2 / (1 + abs(math.cos(beta))))
    assert gen / ang == pytest.approx(ratio, rel=1e-9)


def test_lower_bound_cannot_feed_vector_constant():
    with pytest.raises(PreconditionError):
        vb.vector_constant_2d(sb.ConstantBound(0.3, "lower", "x"), 0.5, 1.0)


def test_cell_dispatch_2d_and_3d():
    sq = geo.rectangle(1, 1)
    v = vb.vector_constant_for_cell(sq, (3, 0))
    assert v.formula == vb.FORMULA_ANGLE
    assert v.value == pytest.approx(2 / math.pi)
    tet = geo.tetrahedron([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    w = vb.vector_constant_for_cell(tet, (1, 2, 3))
    assert w.formula == vb.FORMULA_EIGEN
    cs = [sb.best_c_gamma(tet, f).value for f in (1, 2, 3)]
    assert w.value == pytest.approx(max(cs) * math.sqrt(3 / w.lambda_min))


def test_macrocell_pairs():
    a = geo.triangle([[0, 0], [1, 0], [1, 1]])
    b = geo.triangle([[0, 0], [1, 1], [0, 1]])
    m = geo.macrocell([a, b])
    # bottom edge of a and left edge of b: adjacent sides of the square
    pair = vb.FacePair((0, 1), ((0, 0), (1, 2)))
    v = vb.pair_constant(m, pair)
    assert v.value == pytest.approx(2 / math.pi)
    total = vb.macrocell_vector_constant([(pair, v)], m)
    assert total.formula == vb.FORMULA_MACRO
    bad = vb.FacePair((0, 1), ((0, 2), (1, 2)))  # face 2 of the first child is the diagonal
    with pytest.raises(PreconditionError):
        vb.pair_constant(m, bad)


def test_macrocell_scalar_constant_is_max():
    bs = [sb.ConstantBound(0.2, "upper", "a"), sb.ConstantBound(0.4, "exact", "b")]
    assert vb.macrocell_scalar_constant(bs).value == 0.4
    with pytest.raises(PreconditionError):
        vb.macrocell_scalar_constant([sb.ConstantBound(0.1, "lower", "c")])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_jacobi_matches_numpy_3d(seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((3, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    try:
        ns = geo.NormalSystem.from_vectors(v)
    except DependentNormalsError:
        return
    lam = geo.t_matrix(ns).lambda_min
    assert lam == pytest.approx(np.linalg.eigvalsh(v.T @ v)[0], abs=1e-10)
