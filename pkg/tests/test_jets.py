from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from idealsurf import jets
from idealsurf.jets import Jet

ORDER = 6
u_, v_ = sp.symbols("u v")


def _check_against_sympy(expr, jet_fn, u0, v0, rtol=1e-10):
    u = Jet.variable(np.array(u0), 0, ORDER)
    v = Jet.variable(np.array(v0), 1, ORDER)
    J = jet_fn(u, v)
    for i in range(ORDER + 1):
        for j in range(ORDER + 1 - i):
            want = float(sp.diff(expr, u_, i, v_, j).subs({u_: u0, v_: v0}))
            got = float(J.derivative(i, j))
            assert got == pytest.approx(want, rel=rtol, abs=1e-9 * max(1, abs(want)))


def test_product_quotient_power():
    _check_against_sympy(
        (u_ ** 2 * v_ + 3) / (1 + u_ ** 2 + v_ ** 4) * sp.sqrt(2 + u_ * v_),
        lambda u, v: (u ** 2 * v + 3) / (1 + u ** 2 + v ** 4) * jets.sqrt(2 + u * v),
        0.3, -0.7)


def test_trig_exp_composition():
    _check_against_sympy(
        sp.sin(u_) * sp.cos(v_ + u_ ** 2) + sp.exp(u_ * v_),
        lambda u, v: jets.sin(u) * jets.cos(v + u ** 2) + jets.exp(u * v),
        0.4, 1.1)


def test_fractional_power():
    _check_against_sympy((1 + u_ ** 2 + v_ ** 2) ** sp.Rational(-3, 2),
                         lambda u, v: (1 + u ** 2 + v ** 2) ** -1.5, 0.2, 0.5)


def test_derivative_operator_lowers_order():
    u = Jet.variable(np.array(0.5), 0, 4)
    f = u ** 3
    assert f.du().order == 3
    assert float(f.du().value) == pytest.approx(3 * 0.25)
    with pytest.raises(ValueError):
        f.derivative(5, 0)


def test_broadcast_over_points():
    pts = np.linspace(-1, 1, 7)
    u = Jet.variable(pts, 0, 3)
    f = jets.sin(u)
    assert np.allclose(f.derivative(1, 0), np.cos(pts))
    assert np.allclose(f.derivative(3, 0), -np.cos(pts))


def test_longdouble_preserved():
    u = Jet.variable(np.array(0.1, dtype=np.longdouble), 0, 3)
    assert (jets.sin(u) * u / (1 + u)).c.dtype == np.longdouble


finite = st.floats(-2, 2, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(finite, finite, finite, finite)
def test_ring_identities(a, b, u0, v0):
    u = Jet.variable(np.array(u0), 0, 4)
    v = Jet.variable(np.array(v0), 1, 4)
    x = a * u + v * v
    y = b + u * v
    lhs = (x + y) * (x - y)
    rhs = x * x - y * y
    assert np.allclose(lhs.c, rhs.c, atol=1e-9 * (1 + np.abs(rhs.c).max()))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 3.0), finite)
def test_reciprocal_inverts(x0, v0):
    u = Jet.variable(np.array(x0), 0, 5) + 0.1 * (Jet.variable(np.array(v0), 1, 5) - v0)
    one = u * u.reciprocal()
    expect = np.zeros_like(one.c)
    expect[..., 0] = 1.0
    assert np.allclose(one.c, expect, atol=1e-10)


def test_taylor_coefficient_layout():
    u = Jet.variable(np.array(0.0), 0, 4)
    e = jets.exp(u)
    for k in range(5):
        assert float(e.derivative(k, 0)) == pytest.approx(1.0)
        assert float(e.c[..., k * (k + 1) // 2]) == pytest.approx(1 / math.factorial(k))
