from __future__ import annotations

import math

import mpmath as mp
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hopfbounds.billiard_bounds import bounds_for_curve, evaluate_billiard_bounds
from hopfbounds.curves import Ellipse, GeodesicCircle, SupportFourier, build_curve
from hopfbounds.errors import ConsistencyError, DomainError

mp.mp.dps = 40


def oracle_plane(P, A, k):
    P, A, k = mp.mpf(P), mp.mpf(A), mp.mpf(k)
    d = P**2 - 4 * mp.pi * A
    return {"b2_strong": mp.pi * d / (4 * P * (P + mp.sqrt(4 * mp.pi * A))),
            "b2_weak": mp.pi * d / (8 * P**2), "b1": d * k / (8 * P)}


def test_ellipse_values_high_precision():
    P = 8 * mp.ellipe(mp.mpf(3) / 4)
    c = build_curve(Ellipse(2.0, 1.0))
    assert c.P == pytest.approx(float(P), abs=1e-10)
    rep = evaluate_billiard_bounds("flat", c.P, c.A, c.k_min)
    ref = oracle_plane(P, 2 * mp.pi, mp.mpf(1) / 4)
    for name, val in ref.items():
        assert getattr(rep, name) == pytest.approx(float(val), rel=1e-10)
    assert rep.b2_strong == pytest.approx(0.0651, abs=5e-5)
    assert rep.b1 == pytest.approx(0.0481, abs=5e-5)
    assert rep.best == rep.b2_strong


@pytest.mark.parametrize("surface,r", [("flat", 1.0), ("sphere", 0.3), ("sphere", 0.5),
                                       ("sphere", 0.7), ("hyperbolic", 0.5),
                                       ("hyperbolic", 1.0)])
def test_rigidity_zeros(surface, r):
    rep = bounds_for_curve(build_curve(GeodesicCircle(r, surface)))
    assert rep.present()
    for v in rep.present().values():
        assert v == pytest.approx(0.0, abs=1e-9)


def test_sphere_circle_defect_identity():
    r = 0.5
    P, A = 2 * math.pi * math.sin(r), 2 * math.pi * (1 - math.cos(r))
    rep = evaluate_billiard_bounds("sphere", P, A, 1 / math.tan(r), in_hemisphere=True)
    assert rep.b3 == pytest.approx(0.0, abs=1e-12)


def test_applicability_flags():
    rep = evaluate_billiard_bounds("sphere", 3.0, 0.7, 1.5, in_hemisphere=None)
    assert rep.b3 is None and "inapplicable" in rep.applicability["b3"]
    circ = build_curve(GeodesicCircle(3.0, "hyperbolic"))
    # k_min = coth 3 > 1 always holds for circles; an explicit k_min <= 1 is inapplicable
    rep = evaluate_billiard_bounds("hyperbolic", circ.P, circ.A, 0.9)
    assert rep.b4 is None and rep.best == 0.0
    assert "inapplicable" in rep.applicability["b4"]


def test_invalid_inputs():
    with pytest.raises(DomainError):
        evaluate_billiard_bounds("flat", -1.0, 1.0, 1.0)
    with pytest.raises(ConsistencyError):
        # violates the isoperimetric inequality
        evaluate_billiard_bounds("flat", 3.0, 1.0, 1.0)
    with pytest.raises(ConsistencyError):
        evaluate_billiard_bounds("hyperbolic", 20.0, 1.0, 2.0)


def test_clamps_rounding_noise():
    P = 2 * math.pi
    A = math.pi * (1 + 1e-12)
    rep = evaluate_billiard_bounds("flat", P, A, 1.0)
    assert rep.b1 == 0.0 and rep.b2_strong == 0.0


plane_inputs = st.tuples(st.floats(0.1, 10.0), st.floats(0.01, 1.0), st.floats(0.01, 5.0))


@given(plane_inputs)
def test_strong_dominates_weak(args):
    r, frac, k = args
    A = math.pi * r * r * frac
    P = 2 * math.pi * r
    rep = evaluate_billiard_bounds("flat", P, A, k)
    assert rep.b2_strong >= rep.b2_weak - 1e-15
    assert 0.0 <= rep.b2_strong < 1.0


@given(plane_inputs, st.floats(0.1, 10.0))
def test_scale_invariance(args, lam):
    r, frac, k = args
    P, A = 2 * math.pi * r, math.pi * r * r * frac
    a = evaluate_billiard_bounds("flat", P, A, k)
    b = evaluate_billiard_bounds("flat", lam * P, lam * lam * A, k / lam)
    for name in ("b2_strong", "b2_weak", "b1"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-12, abs=1e-15)


@given(st.floats(0.05, 1.5), st.floats(0.0, 0.9))
def test_bounds_vanish_iff_defect_vanishes(r, squeeze):
    assume(squeeze == 0.0 or squeeze > 1e-3)
    for surface, P, A in [("sphere", 2 * math.pi * math.sin(r), 2 * math.pi * (1 - math.cos(r))),
                          ("hyperbolic", 2 * math.pi * math.sinh(r),
                           2 * math.pi * (math.cosh(r) - 1))]:
        A2 = A * (1 - squeeze)
        if surface == "hyperbolic" and P >= 2 * math.pi + A2:
            continue
        rep = evaluate_billiard_bounds(surface, P, A2, 1.0 / math.tan(r) if surface == "sphere"
                                       else 1.0 / math.tanh(r), in_hemisphere=True)
        vals = list(rep.present().values())
        if squeeze == 0.0:
            assert all(abs(v) < 1e-9 for v in vals)
        else:
            assert all(v > 0 for v in vals)


def test_incomparability_pair():
    near = bounds_for_curve(build_curve(Ellipse(1.1, 1.0)))
    far = bounds_for_curve(build_curve(Ellipse(2.0, 1.0)))
    assert near.b1 > near.b2_strong
    assert far.b2_strong > far.b1
    trefoil = bounds_for_curve(build_curve(SupportFourier(1.0, ((3, 0.1, 0.0),))))
    assert trefoil.b1 > trefoil.b2_strong
