"""Fiber map evaluation, derivatives, branch inverse, observables."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quenched_limits.maps import (FiberMap, Observable, apply, derivative,
                                  fiber_map, get_observable,
                                  left_branch_inverse, orbit)
from quenched_limits.omega import make_sequence


def test_lsv_point_values():
    f = FiberMap("lsv", 0.1)
    assert apply(f, 0.25) == pytest.approx(0.48326, abs=1e-5)
    assert apply(f, 0.0) == 0.0
    assert apply(f, 0.5) == 0.0          # branch point belongs to the right branch
    assert apply(f, 0.75) == 0.5
    assert apply(f, 1.0) == 1.0


def test_lsv_derivative_value():
    # 1 + 2^a (1+a) x^a at a=0.1, x=0.25
    f = FiberMap("lsv", 0.1)
    expected = 1.0 + 2.0 ** 0.1 * 1.1 * 0.25 ** 0.1
    assert derivative(f, 0.25) == pytest.approx(expected, rel=1e-15)
    assert derivative(f, 0.25) == pytest.approx(2.0263362906904883, rel=1e-12)


def test_derivative_matches_finite_difference():
    f = FiberMap("lsv", 0.3)
    for x in (0.1, 0.2, 0.4, 0.6, 0.9):
        h = 1e-7
        fd = (apply(f, x + h) - apply(f, x - h)) / (2 * h)
        assert derivative(f, x) == pytest.approx(fd, rel=1e-5)


def test_neutral_fixed_point():
    f = FiberMap("lsv", 0.5)
    assert apply(f, 0.0) == 0.0
    assert derivative(f, 0.0) == 1.0


def test_doubling_period_two():
    d = FiberMap("doubling", 0.0)
    x = 1.0 / 3.0
    y = apply(d, x)
    assert y == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert apply(d, y) == pytest.approx(x, abs=1e-15)


def test_domain_check():
    f = FiberMap("lsv", 0.2)
    with pytest.raises(ValueError):
        apply(f, -0.1)
    with pytest.raises(ValueError):
        apply(f, np.array([0.2, 1.3]))


def test_vectorized_matches_scalar():
    f = FiberMap("lsv", 0.25)
    xs = np.linspace(0.0, 1.0, 37)
    ys = apply(f, xs)
    assert ys == pytest.approx([apply(f, float(x)) for x in xs])


@given(st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
       st.floats(min_value=0.05, max_value=0.95))
def test_left_branch_inverse_roundtrip(t, alpha):
    f = FiberMap("lsv", alpha)
    y = left_branch_inverse(f, t)
    assert 0.0 <= y < 0.5
    assert apply(f, y) == pytest.approx(t, abs=1e-13)


def test_left_branch_inverse_doubling():
    d = FiberMap("doubling", 0.0)
    assert left_branch_inverse(d, 0.3) == pytest.approx(0.15, abs=1e-15)


def test_orbit_composition_order():
    # orbit must apply f_{w0} first, then f_{w1}, ...
    seq = make_sequence(9, "lsv", (0.05, 0.4))
    pts = orbit(seq, 0.3, 4)
    x = 0.3
    for k in range(4):
        x = apply(fiber_map(seq, k), x)
        assert pts[k + 1] == x


def test_observable_registry():
    phi = get_observable("cos2pi")
    assert phi(0.0) == pytest.approx(1.0)
    assert phi(0.5) == pytest.approx(-1.0)
    hg = get_observable("holder_gamma", gamma=0.5)
    assert hg(0.5) == 0.0
    assert hg(1.0) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        get_observable("holder_gamma", gamma=0.0)
    with pytest.raises(ValueError):
        get_observable("nope")


def test_coboundary_observable_is_exact_coboundary():
    # phi = u o f - u with u = cos(2 pi x) and f the doubling map
    phi = get_observable("coboundary_cos")
    d = FiberMap("doubling", 0.0)
    u = lambda x: np.cos(2.0 * np.pi * x)
    xs = np.linspace(0.0, 1.0, 101)[:-1]
    assert phi(xs) == pytest.approx(u(apply(d, xs)) - u(xs), abs=1e-12)


@given(st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=1.0))
def test_holder_certificates(x, y):
    for name in ("cos2pi", "smooth_indicator", "coboundary_cos"):
        phi = get_observable(name)
        lhs = abs(float(phi(x)) - float(phi(y)))
        assert lhs <= phi.holder_constant * abs(x - y) ** phi.holder_exponent + 1e-12
