"""Scalar and vector fields with exact gradients, and a registry of named fields.

Names are products of factors joined by ``*``: a number, ``x2``, ``x1^3``,
``sin(2*pi*x1)`` or ``cos(pi*x3)``.  Vector fields are written
``[f1; f2]`` (or with three components).  ``const`` and ``const:c`` are
shorthands for constants.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import Delaunay

from .errors import ParseError


@dataclass(frozen=True, eq=False)
class Field:
    """``value(x)`` maps (N, d) points to (N,) or (N, k); ``gradient`` to (N, d) or (N, k, d)."""

    value: Callable
    gradient: Callable
    components: int = 1  # 1 for scalar fields
    degree: int | None = None  # polynomial degree, None if not a polynomial
    name: str = ""

    @property
    def is_vector(self) -> bool:
        return self.components > 1

    def __call__(self, x):
        return self.value(np.atleast_2d(x))


# ---------------------------------------------------------------------------
# building blocks


def constant(c, dim: int | None = None) -> Field:
    c = np.asarray(c, dtype=float)
    if c.ndim == 0:
        return Field(
            lambda x: np.full(len(x), float(c)),
            lambda x: np.zeros_like(x, dtype=float),
            1,
            0,
            f"const:{float(c)!r}",
        )
    k = len(c)
    return Field(
        lambda x: np.tile(c, (len(x), 1)),
        lambda x: np.zeros((len(x), k, x.shape[1])),
        k,
        0,
        "[" + "; ".join(f"const:{v!r}" for v in c) + "]",
    )


def polynomial(terms: dict, name: str = "") -> Field:
    """Sum of ``coef * prod x_k^e_k`` over ``{(e_1, ..., e_d): coef}``."""
    items = [(np.asarray(e, dtype=int), float(c)) for e, c in terms.items()]
    deg = max((int(e.sum()) for e, _ in items), default=0)

    def value(x):
        out = np.zeros(len(x))
        for e, c in items:
            out += c * np.prod(x[:, : len(e)] ** e, axis=1)
        return out

    def gradient(x):
        g = np.zeros_like(x, dtype=float)
        for e, c in items:
            for k in range(len(e)):
                if e[k] == 0:
                    continue
                ek = e.copy()
                ek[k] -= 1
                g[:, k] += c * e[k] * np.prod(x[:, : len(e)] ** ek, axis=1)
        return g

    return Field(value, gradient, 1, deg, name)


def vector(*components: Field, name: str = "") -> Field:
    if any(c.is_vector for c in components):
        raise ValueError("components of a vector field must be scalar")
    degs = [c.degree for c in components]
    deg = None if any(d is None for d in degs) else max(degs)
    name = name or "[" + "; ".join(c.name for c in components) + "]"
    return Field(
        lambda x: np.stack([c.value(x) for c in components], axis=1),
        lambda x: np.stack([c.gradient(x) for c in components], axis=1),
        len(components),
        deg,
        name,
    )


def random_polynomial(dim: int, degree: int, rng: np.random.Generator, components: int = 1) -> Field:
    """Random dense polynomial of total degree <= ``degree``; coefficients standard normal."""
    import itertools

    exps = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    scal = [polynomial({e: rng.standard_normal() for e in exps}, name="random") for _ in range(components)]
    return scal[0] if components == 1 else vector(*scal, name="random")


def nodal(points, values) -> Field:
    """Piecewise-linear field on the Delaunay triangulation of ``points``."""
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    tri = Delaunay(pts)
    d = pts.shape[1]
    k = 1 if vals.ndim == 1 else vals.shape[1]
    v2 = vals.reshape(len(pts), k)

    def locate(x):
        s = tri.find_simplex(x, tol=1e-10)
        if np.any(s < 0):
            raise ValueError("point outside the nodal data hull")
        return s

    def bary(x, s):
        t = tri.transform[s]
        b = np.einsum("nij,nj->ni", t[:, :d], x - t[:, d])
        return np.c_[b, 1 - b.sum(axis=1)]

    def value(x):
        s = locate(x)
        b = bary(x, s)
        out = np.einsum("ni,nik->nk", b, v2[tri.simplices[s]])
        return out[:, 0] if k == 1 else out

    def gradient(x):
        s = locate(x)
        t = tri.transform[s][:, :d]  # rows: grad of the first d barycentrics
        gb = np.concatenate([t, -t.sum(axis=1, keepdims=True)], axis=1)
        out = np.einsum("nik,nij->nkj", v2[tri.simplices[s]], gb)
        return out[:, 0] if k == 1 else out

    return Field(value, gradient, k, None, "nodal")


# ---------------------------------------------------------------------------
# names

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_MONO = re.compile(r"^x([123])(?:\^(\d+))?$")
_TRIG = re.compile(rf"^(sin|cos)\((?:({_NUM})\*)?pi\*x([123])\)$")


def _factor(tok: str, dim: int):
    """(value, gradient, degree) callables for a single factor."""
    if re.fullmatch(_NUM, tok):
        c = float(tok)
        return (lambda x: np.full(len(x), c)), (lambda x: np.zeros_like(x, dtype=float)), 0
    m = _MONO.match(tok)
    if m:
        k, e = int(m.group(1)) - 1, int(m.group(2) or 1)
        if k >= dim:
            raise ParseError(f"field {tok!r} uses x{k + 1} in {dim}D")

        def val(x):
            return x[:, k] ** e

        def grad(x):
            g = np.zeros_like(x, dtype=float)
            g[:, k] = e * x[:, k] ** (e - 1)
            return g

        return val, grad, e
    m = _TRIG.match(tok)
    if m:
        fn, a, k = m.group(1), float(m.group(2) or 1.0), int(m.group(3)) - 1
        if k >= dim:
            raise ParseError(f"field {tok!r} uses x{k + 1} in {dim}D")
        w = a * math.pi
        f, df = (np.sin, np.cos) if fn == "sin" else (np.cos, lambda t: -np.sin(t))

        def val(x):
            return f(w * x[:, k])

        def grad(x):
            g = np.zeros_like(x, dtype=float)
            g[:, k] = w * df(w * x[:, k])
            return g

        return val, grad, None
    raise ParseError(f"unknown field factor {tok!r}")


def _scalar(expr: str, dim: int) -> Field:
    expr = expr.replace(" ", "")
    if expr == "const":
        return constant(1.0)
    if expr.startswith("const:"):
        try:
            return constant(float(expr[6:]))
        except ValueError:
            raise ParseError(f"bad constant in {expr!r}") from None
    # split on '*' outside parentheses
    toks, depth, cur = [], 0, ""
    for ch in expr:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "*" and depth == 0:
            toks.append(cur)
            cur = ""
        else:
            cur += ch
    toks.append(cur)
    if not all(toks):
        raise ParseError(f"malformed field name {expr!r}")
    parts = [_factor(t, dim) for t in toks]
    degs = [p[2] for p in parts]
    deg = None if any(d is None for d in degs) else sum(degs)

    def value(x):
        out = np.ones(len(x))
        for v, _, _ in parts:
            out = out * v(x)
        return out

    def gradient(x):
        vals = [v(x) for v, _, _ in parts]
        g = np.zeros_like(x, dtype=float)
        for i, (_, gr, _) in enumerate(parts):
            other = np.ones(len(x))
            for j, v in enumerate(vals):
                if j != i:
                    other = other * v
            g += gr(x) * other[:, None]
        return g

    return Field(value, gradient, 1, deg, expr)


def parse_field(name: str, dim: int) -> Field:
    """Field from its registry name, e.g. ``x1^2*x2`` or ``[x2; x1]``."""
    s = name.strip()
    if s.startswith("[") and s.endswith("]"):
        comps = [c for c in s[1:-1].split(";")]
        if len(comps) != dim:
            raise ParseError(f"vector field {name!r} needs {dim} components")
        return vector(*(_scalar(c, dim) for c in comps), name=s)
    return _scalar(s, dim)


REGISTRY_EXAMPLES = (
    "const",
    "const:2.5",
    "x1",
    "x1^2*x2",
    "x1*x2*x3",
    "sin(pi*x1)",
    "sin(pi*x1)*cos(2*pi*x2)",
    "[x2; x1]",
)
