from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfbounds import geodesic_sim as gs
from hopfbounds.conformal import TrigPoly
from hopfbounds.errors import DomainError, ValidationError
from hopfbounds.sampling import SeededStream, sample_liouville_torus

# on x1 = 0 the cos factor has zero gradient, so the vertical line is a geodesic
K_RIDGE = (2 * math.pi) ** 2 * 0.3 / (2 * 1.3**2)


def test_flat_geodesic_is_straight(flat_factor):
    path = gs.integrate_geodesic(flat_factor, (0.1, 0.2), 0.7, 5.0)
    st_ = path.state(5.0)
    expected = np.mod(np.array([0.1, 0.2]) + 5.0 * np.array([math.cos(0.7), math.sin(0.7)]), 1)
    np.testing.assert_allclose(st_.x, expected, atol=1e-10)
    assert st_.phi == pytest.approx(0.7, abs=1e-12)
    assert st_.J == pytest.approx(5.0, abs=1e-10) and st_.Jp == pytest.approx(1.0, abs=1e-12)


def test_constant_scale_halves_coordinate_speed():
    p = TrigPoly(2, 4.0)
    path = gs.integrate_geodesic(p, (0.0, 0.0), 0.0, 2.0)
    assert path.state(2.0).x[0] == pytest.approx(1.0 % 1.0, abs=1e-10)
    assert path.sol(2.0)[0] == pytest.approx(1.0, abs=1e-10)
    assert path.energy_defect < 1e-12


def test_energy_and_wronskian_long_run(cos_factor):
    path = gs.integrate_geodesic(cos_factor, (0.13, 0.41), 0.9, 100.0,
                                 jacobi=((0.0, 1.0), (1.0, 0.0)))
    assert path.energy_defect < 1e-8
    w = path.wronskian(path.t)
    assert np.max(np.abs(w + 1.0)) < 1e-8


def test_time_reversal(cos_factor):
    fwd = gs.integrate_geodesic(cos_factor, (0.3, 0.6), 1.2, 7.0)
    end = fwd.state(7.0)
    back = gs.integrate_geodesic(cos_factor, end.x, end.phi + math.pi, 7.0)
    home = back.state(7.0)
    d = (np.array(home.x) - np.array([0.3, 0.6]) + 0.5) % 1.0 - 0.5
    assert np.max(np.abs(d)) < 1e-8
    assert math.remainder(home.phi - (1.2 + math.pi), 2 * math.pi) == pytest.approx(0, abs=1e-8)


def test_angle_and_velocity_forms_agree(cos_factor):
    path = gs.integrate_geodesic(cos_factor, (0.2, 0.1), 0.4, 3.0)
    y, _ = gs._dop853_batch(lambda y: gs._angle_rhs(cos_factor, y),
                            np.array([[0.2, 0.1, 0.4, 0.0, 1.0]]), 3.0, 1e-11, jacobi=True)
    s = path.state(3.0)
    np.testing.assert_allclose(np.mod(y[0, :2], 1.0), s.x, atol=1e-8)
    assert y[0, 3] == pytest.approx(s.J, abs=1e-7)


def test_ridge_zero_spacing(cos_factor):
    """Along x1 = 0 the curvature is constant, so Jacobi zeros are pi/sqrt(K) apart."""
    rep = gs.has_conjugate_points(cos_factor, (0.0, 0.0), math.pi / 2, 5.0)
    assert rep.found
    gaps = np.diff(rep.zeros)
    np.testing.assert_allclose(gaps, math.pi / math.sqrt(K_RIDGE), atol=1e-8)
    assert gs.gauss_at(cos_factor, np.array([[0.0, 0.3]]))[0] == pytest.approx(K_RIDGE, rel=1e-13)


def test_flat_has_no_conjugate_points(flat_factor):
    rep = gs.has_conjugate_points(flat_factor, (0.1, 0.1), 0.3, 20.0)
    assert not rep.found and rep.zeros == [-20.0] and rep.first_pair is None


@given(x1=st.floats(0, 1), x2=st.floats(0, 1), phi=st.floats(0, 2 * math.pi))
@settings(max_examples=8, deadline=None)
def test_riccati_matches_jacobi(cos_factor, x1, x2, phi):
    T = 6.0
    jac = gs.has_conjugate_points(cos_factor, (x1, x2), phi, T)
    ric = gs.riccati_blowups(cos_factor, (x1, x2), phi, T)
    assert len(ric) == len(jac.zeros)
    np.testing.assert_allclose(ric, jac.zeros, atol=1e-6)


def test_horizon_monotone(cos_factor):
    x, phi = sample_liouville_torus(cos_factor, SeededStream(5, 0), 64)
    flags = gs.conjugate_flags(cos_factor, x, phi, [2.0, 5.0, 10.0])
    assert np.all(flags[0] <= flags[1]) and np.all(flags[1] <= flags[2])


def test_batch_flags_match_reference(cos_factor):
    x, phi = sample_liouville_torus(cos_factor, SeededStream(11, 0), 30)
    T = 4.0
    batch = gs.conjugate_flags(cos_factor, x, phi, [T])[0]
    ref = [gs.has_conjugate_points(cos_factor, xi, ph, T).found for xi, ph in zip(x, phi)]
    assert batch.tolist() == ref


def test_flat_delta_is_zero(flat_factor):
    est = gs.estimate_delta_geodesic(flat_factor, T=10.0, samples=200, seed=1)
    assert est.hits == 0 and est.delta_hat == 0.0


def test_estimates_share_samples(cos_factor):
    ests = gs.estimate_delta_horizons(cos_factor, [3.0, 6.0], samples=128, seed=2)
    assert ests[0].hits <= ests[1].hits
    assert [e.window for e in ests] == [3.0, 6.0]
    assert ests[1].hits == gs.estimate_delta_geodesic(cos_factor, 6.0, 128, seed=2).hits


def test_input_validation(cos_factor):
    with pytest.raises(DomainError):
        gs.integrate_geodesic(cos_factor, (0, 0), 0.0, 0.0)
    with pytest.raises(DomainError):
        gs.has_conjugate_points(cos_factor, (0, 0), 0.0, -1.0)
    with pytest.raises(DomainError):
        gs.conjugate_flags(cos_factor, [[0, 0]], [0.0], [0.0])
    with pytest.raises(DomainError):
        gs.estimate_delta_geodesic(cos_factor, 1.0, samples=0)
    with pytest.raises(ValidationError):
        gs.integrate_geodesic(TrigPoly(3, 1.0), (0, 0, 0), 0.0, 1.0)
