from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfbounds import conformal as cm
from hopfbounds import geodesic_bounds as gb
from hopfbounds.errors import DomainError, ValidationError

THREE = cm.TrigPoly(3, 1.0, (((1, 0, 0), 0.2, 0.0), ((0, 1, 1), 0.05, 0.05)))


@pytest.fixture(scope="module")
def cos256(cos_factor):
    field = cm.eval_field(cos_factor, 256)
    return field, cm.curvature(field)


@pytest.fixture(scope="module")
def three64():
    field = cm.eval_field(THREE, 64)
    return field, cm.curvature(field)


def test_capital_psi_examples():
    assert gb.capital_psi(2, gb.Power(2.0), 1.0) == 4.0
    for f in (0.3, 1.0, 7.0):
        assert gb.capital_psi(2, gb.Power(4.0), f) == pytest.approx(0.0, abs=1e-14)
    assert gb.capital_psi(3, gb.Power(0.0), 2.0) == pytest.approx(2**-1.5, rel=1e-15)
    with pytest.raises(DomainError):
        gb.capital_psi(2, gb.Power(2.0), 0.0)
    bad = gb.Custom(lambda f: f - 2.0, lambda f: np.ones_like(f))
    with pytest.raises(DomainError):
        gb.capital_psi(2, bad, 1.0)


@given(n=st.integers(2, 7), alpha=st.floats(0.0, 3.9), f=st.floats(0.05, 20.0))
@settings(max_examples=200, deadline=None)
def test_power_closed_form_matches_general(n, alpha, f):
    general = float(gb.capital_psi(n, gb.Power(alpha), f))
    closed = float(gb.capital_psi_power(n, alpha, f))
    assert general == pytest.approx(closed, rel=1e-12, abs=1e-14)
    if (n == 2 and 0 < alpha < 4) or (n > 2 and (n - 2) + alpha * (4 - alpha) > 0):
        assert closed > 0


def test_power_admissibility():
    for a in (0.0, 4.0, -1.0, float("nan")):
        with pytest.raises(ValidationError):
            gb.Power(a).check(2)
    gb.Power(0.0).check(3)
    gb.Power(4.2).check(3)  # 1 + 4.2 * (-0.2) > 0
    with pytest.raises(ValidationError):
        gb.Power(5.0).check(3)


def test_example_path(cos256):
    field, curv = cos256
    rep = gb.bound_theorem2(field, curv, gb.Power(2.0))
    fmin, fmax = cm.f_range(field.poly, field.m)
    example = gb.example_bound_n2(field, rep.curv_sup, fmax)
    assert rep.delta_lb == pytest.approx(example, rel=1e-12)
    assert rep.delta_lb == pytest.approx(0.2732627929453843, rel=1e-9)
    assert rep.psi_sup == pytest.approx(1.69, rel=1e-14)
    assert rep.warning is None


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_closed_form_matches_general_n2(cos256, alpha):
    field, curv = cos256
    rep = gb.bound_theorem2(field, curv, gb.Power(alpha))
    fmin, fmax = cm.f_range(field.poly, field.m)
    cor = gb.power_bound_closed_form(field, alpha, rep.curv_sup, fmax, fmin)
    assert rep.delta_lb == pytest.approx(cor, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_closed_form_matches_general_n3(three64, alpha):
    field, curv = three64
    rep = gb.bound_theorem2(field, curv, gb.Power(alpha))
    fmin, fmax = cm.f_range(field.poly, field.m)
    cor = gb.power_bound_closed_form(field, alpha, rep.curv_sup, fmax, fmin)
    assert rep.delta_lb == pytest.approx(cor, rel=1e-12)
    assert 0 < rep.delta_lb < 1


def test_refinement_oracle(cos_factor, cos256):
    field, curv = cos256
    lo = gb.bound_theorem2(field, curv, gb.Power(2.0)).delta_lb
    fine = cm.eval_field(cos_factor, 2048)
    hi = gb.bound_theorem2(fine, cm.curvature(fine), gb.Power(2.0)).delta_lb
    assert lo == pytest.approx(hi, abs=1e-8)


def test_numerator_against_quad(cos256):
    """For f = 1 + a cos(2 pi x) and alpha = 2 the numerator is 4 (2 pi a)^2 / 2."""
    field, _ = cos256
    val = gb.numerator_integral(field, gb.Power(2.0))
    assert val == pytest.approx(4 * (2 * math.pi * 0.3) ** 2 / 2, rel=1e-12)


def test_alpha_beyond_two_is_weaker(cos256):
    field, curv = cos256
    vals = [gb.bound_theorem2(field, curv, gb.Power(a)).delta_lb for a in (2.0, 2.5, 3.0)]
    assert vals[0] > vals[1] > vals[2]


def test_scan_argmax(cos256):
    field, curv = cos256
    grid = [0.5, 1.0, 1.5, 2.0]
    a_star, d_star, reps = gb.optimize_alpha(field, curv, grid)
    singles = [gb.bound_theorem2(field, curv, gb.Power(a)).delta_lb for a in grid]
    assert [r.delta_lb for r in reps] == singles
    assert d_star == max(singles) and a_star == grid[int(np.argmax(singles))]


def test_scan_default_grid(cos256):
    field, curv = cos256
    a_star, d_star, reps = gb.optimize_alpha(field, curv)
    assert len(reps) == gb.DEFAULT_SCAN
    assert 1.3 < a_star < 1.6 and d_star > 0.2733


def test_flat_factor(flat_factor):
    field = cm.eval_field(flat_factor, 32)
    curv = cm.curvature(field)
    rep = gb.bound_theorem2(field, curv, gb.Power(2.0))
    assert rep.delta_lb == 0.0 and rep.capital_psi_integral == 0.0
    a_star, d_star, _ = gb.optimize_alpha(field, curv, [1.5, 0.5, 1.0])
    assert (a_star, d_star) == (0.5, 0.0)
    f3 = cm.eval_field(cm.TrigPoly(3, 1.0), 32)
    assert gb.bound_theorem2(f3, cm.curvature(f3), gb.Power(2.0)).delta_lb == 0.0


def test_empty_scan_rejected(cos256):
    field, curv = cos256
    with pytest.raises(DomainError):
        gb.optimize_alpha(field, curv, [0.0, 4.0, 5.0])


def test_custom_weight_matches_power(cos256):
    field, curv = cos256
    custom = gb.Custom(lambda f: f**2, lambda f: 2 * f, "square")
    a = gb.bound_theorem2(field, curv, custom)
    b = gb.bound_theorem2(field, curv, gb.Power(2.0))
    assert a.delta_lb == pytest.approx(b.delta_lb, rel=1e-13)
    assert a.psi == {"kind": "custom", "label": "square"}


def test_custom_weight_rejected_when_not_positive(cos256):
    field, curv = cos256
    with pytest.raises(ValidationError):
        gb.bound_theorem2(field, curv, gb.Custom(lambda f: f - 1.0, lambda f: np.ones_like(f)))


def test_bound_above_one_warns(cos256, monkeypatch):
    # realistic factors stay far below 1, so force the assembly step
    field, curv = cos256
    monkeypatch.setattr(gb, "_assemble", lambda *args: 1.5)
    with pytest.warns(RuntimeWarning, match="exceeds 1"):
        rep = gb.bound_theorem2(field, curv, gb.Power(1.0))
    assert rep.delta_lb == 1.5 and "exceeds 1" in rep.warning


def test_shipped_factors_below_one(data_dir):
    for name in ("torus_cos.json", "torus3.json"):
        p, _ = cm.load_metric_spec(data_dir / name)
        field = cm.eval_field(p, 64)
        _, d_star, _ = gb.optimize_alpha(field, cm.curvature(field))
        assert 0 < d_star <= 1


def test_report_is_serializable(cos256):
    import json
    field, curv = cos256
    rep = gb.bound_theorem2(field, curv, gb.Power(1.0))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["n"] == 2 and d["psi"] == {"kind": "power", "alpha": 1.0}
