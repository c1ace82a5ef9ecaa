from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from hopfbounds import geometry as geo
from hopfbounds.errors import DomainError, ValidationError
from hopfbounds.geometry import JacobiState, SurfaceKind

KINDS = list(SurfaceKind)
angles = st.floats(0.0, 2 * math.pi)
small = st.floats(0.0, 1.2)


def _point(kind, r, theta):
    if kind is SurfaceKind.FLAT:
        return np.array([r * math.cos(theta), r * math.sin(theta)])
    if kind is SurfaceKind.SPHERE:
        return np.array([math.sin(r) * math.cos(theta), math.sin(r) * math.sin(theta), math.cos(r)])
    return np.array([math.sinh(r) * math.cos(theta), math.sinh(r) * math.sin(theta), math.cosh(r)])


def _unit_tangent(kind, p, theta):
    if kind is SurfaceKind.FLAT:
        return np.array([math.cos(theta), math.sin(theta)])
    e = np.array([math.cos(theta), math.sin(theta), 0.0])
    # project onto the tangent plane of the model and normalize
    d = e - p * (kind.kappa * geo.inner(kind, p, e))
    return d / geo.norm(kind, d)


def test_parse_and_constants():
    assert SurfaceKind.parse("plane") is SurfaceKind.FLAT
    assert SurfaceKind.parse("Sphere") is SurfaceKind.SPHERE
    assert SurfaceKind.HYPERBOLIC.kappa == -1
    with pytest.raises(ValidationError):
        SurfaceKind.parse("torus")


@pytest.mark.parametrize("kind", [SurfaceKind.SPHERE, SurfaceKind.HYPERBOLIC])
def test_validate_point_rejects_off_model(kind):
    with pytest.raises(ValidationError):
        geo.validate_point(kind, [0.0, 0.0, 2.0])


@pytest.mark.parametrize("kind", KINDS)
@given(r=small, th=angles, phi=angles, s=st.floats(0.0, 3.0))
@settings(max_examples=60, deadline=None)
def test_geodesic_advance_stays_on_model_at_unit_speed(kind, r, th, phi, s):
    p = _point(kind, r, th)
    d = _unit_tangent(kind, p, phi)
    q, v = geo.geodesic_advance(kind, p, d, s)
    if kind is not SurfaceKind.FLAT:
        assert geo.inner(kind, q, q) == pytest.approx(kind.kappa, abs=1e-10)
        assert geo.inner(kind, q, v) == pytest.approx(0.0, abs=1e-9 * max(1.0, math.cosh(s)))
    assert geo.norm(kind, v) == pytest.approx(1.0, rel=1e-9)
    if kind is not SurfaceKind.SPHERE or s < math.pi - 1e-3:
        dist = geo.geodesic_distance(kind, p, q)
        assert dist == pytest.approx(s, abs=1e-8 * max(1.0, s))


@pytest.mark.parametrize("kind", KINDS)
@given(r1=small, t1=angles, r2=small, t2=angles)
@settings(max_examples=60, deadline=None)
def test_distance_symmetric(kind, r1, t1, r2, t2):
    p, q = _point(kind, r1, t1), _point(kind, r2, t2)
    assert geo.geodesic_distance(kind, p, q) == pytest.approx(
        geo.geodesic_distance(kind, q, p), abs=1e-12)


def test_sphere_antipodal_distance_raises():
    with pytest.raises(DomainError):
        geo.geodesic_distance(SurfaceKind.SPHERE, [0, 0, 1.0], [0, 0, -1.0])


def test_distance_known_values():
    assert geo.geodesic_distance(SurfaceKind.SPHERE, [0, 0, 1.0], [1.0, 0, 0]) == pytest.approx(math.pi / 2)
    p = _point(SurfaceKind.HYPERBOLIC, 0.7, 0.0)
    assert geo.geodesic_distance(SurfaceKind.HYPERBOLIC, [0, 0, 1.0], p) == pytest.approx(0.7, abs=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_rotate_is_a_quarter_turn(kind):
    p = _point(kind, 0.4, 1.0)
    v = _unit_tangent(kind, p, 0.3)
    w = geo.rotate(kind, p, v)
    assert geo.inner(kind, v, w) == pytest.approx(0.0, abs=1e-14)
    assert geo.norm(kind, w) == pytest.approx(1.0, abs=1e-14)
    if kind is not SurfaceKind.FLAT:
        assert geo.inner(kind, p, w) == pytest.approx(0.0, abs=1e-14)
    ww = geo.rotate(kind, p, w)
    np.testing.assert_allclose(ww, -v, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("L", [0.1, 0.8, 2.0])
def test_jacobi_flight_matches_ode(kind, L):
    state = JacobiState(0.3, -0.7)
    sol = solve_ivp(lambda t, y: [y[1], -kind.kappa * y[0]], (0, L), list(state),
                    rtol=1e-12, atol=1e-14)
    out = geo.jacobi_flight(kind, state, L)
    assert out.J == pytest.approx(sol.y[0, -1], abs=1e-10)
    assert out.Jp == pytest.approx(sol.y[1, -1], abs=1e-10)


def test_focal_functions():
    L = 0.9
    assert geo.focal_length(SurfaceKind.FLAT, L) == L
    assert geo.focal_length(SurfaceKind.SPHERE, L) == pytest.approx(math.sin(L))
    assert geo.focal_length(SurfaceKind.HYPERBOLIC, L) == pytest.approx(math.sinh(L))
    assert geo.focal_ratio(SurfaceKind.SPHERE, L) == pytest.approx(1 / math.tan(L))
    assert geo.focal_ratio(SurfaceKind.HYPERBOLIC, L) == pytest.approx(1 / math.tanh(L))
