import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellbounds import fields
from cellbounds.errors import ParseError


def _numeric_grad(f, x, h=1e-6):
    g = np.zeros((len(x),) + (() if f.components == 1 else (f.components,)) + (x.shape[1],))
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = h
        g[..., k] = (f.value(x + e) - f.value(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("name", fields.REGISTRY_EXAMPLES)
def test_registry_gradients(name):
    dim = 3 if "x3" in name else 2
    f = fields.parse_field(name, dim)
    x = np.random.default_rng(1).uniform(0, 1, (7, dim))
    assert f.gradient(x) == pytest.approx(_numeric_grad(f, x), abs=1e-6)


def test_values():
    f = fields.parse_field("x1^2*x2", 2)
    assert f([[2.0, 3.0]]) == pytest.approx([12.0])
    assert f.degree == 3
    s = fields.parse_field("sin(2*pi*x1)", 2)
    assert s([[0.25, 0]]) == pytest.approx([1.0])
    assert s.degree is None
    assert fields.parse_field("const:2.5", 2)([[1, 1]]) == pytest.approx([2.5])


def test_vector_field():
    v = fields.parse_field("[x2; x1]", 2)
    assert v.is_vector
    np.testing.assert_allclose(v([[1.0, 2.0]]), [[2.0, 1.0]])


@pytest.mark.parametrize("bad", ["x4", "tan(x1)", "x1**2", "", "x3", "[x1]", "const:abc"])
def test_bad_names(bad):
    with pytest.raises(ParseError):
        fields.parse_field(bad, 2)


def test_nodal_field_reproduces_linear_data():
    pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1.0]])
    f = fields.nodal(pts, 2 * pts[:, 0] - pts[:, 1])
    x = np.array([[0.3, 0.4], [0.9, 0.2]])
    assert f(x) == pytest.approx(2 * x[:, 0] - x[:, 1])
    assert f.gradient(x) == pytest.approx(np.tile([2.0, -1.0], (2, 1)))
    with pytest.raises(ValueError):
        f([[2.0, 2.0]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3))
def test_random_polynomial_gradient(seed, degree):
    f = fields.random_polynomial(3, degree, np.random.default_rng(seed))
    x = np.random.default_rng(seed + 1).uniform(-1, 1, (5, 3))
    assert f.gradient(x) == pytest.approx(_numeric_grad(f, x), abs=1e-5)
    assert f.degree <= degree


def test_constant_vector():
    c = fields.constant([1.0, -2.0])
    assert c.components == 2
    assert np.all(c.gradient(np.zeros((3, 2))) == 0)
    assert math.isclose(c([[5, 5]])[0, 1], -2.0)
