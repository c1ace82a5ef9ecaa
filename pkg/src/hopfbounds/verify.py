"""Identity residual tables for billiard tables.

Each check returns a residual and the tolerance it is judged against;
``ok`` is False when the residual exceeds the tolerance.
"""
from __future__ import annotations

import math

import numpy as np

from . import billiard as bl
from .curves import SampledCurve
from .sampling import SeededStream, phase_integral_billiard, sample_billiard_measure

TOLERANCES = {
    "measure_total": 1e-10,
    "sin_moment": 1e-8,
    "curvature_moment": 1e-8,
    "santalo_sigma": 3.0,
    "generating_gradient": 1e-8,
    "generating_hessian": 1e-6,
    "second_variation_sum": 1e-12,
    "jacobian": 1e-6,
}


def _row(residual, tol, **extra):
    out = {"residual": float(residual), "tolerance": tol, "ok": bool(abs(residual) <= tol)}
    out.update(extra)
    return out


def _curvature_at(c: SampledCurve, s):
    return c.param.curvature(c.t_of_s(np.mod(s, c.P)))


def quadrature_identities(c: SampledCurve) -> dict:
    P = c.P
    total = phase_integral_billiard(c, lambda s, phi: np.ones_like(s))
    sin_m = phase_integral_billiard(c, lambda s, phi: np.sin(phi))
    k_m = phase_integral_billiard(c, lambda s, phi: _curvature_at(c, s) * np.sin(phi))
    # total geodesic curvature from Gauss-Bonnet: 2 pi - kappa A
    k_expected = 0.5 * math.pi * (2 * math.pi - c.kind.kappa * c.A)
    return {
        "measure_total": _row(total - 2 * P, TOLERANCES["measure_total"] * max(1.0, 2 * P),
                              value=total, expected=2 * P),
        "sin_moment": _row(sin_m - math.pi * P / 2, TOLERANCES["sin_moment"],
                           value=sin_m, expected=math.pi * P / 2),
        "curvature_moment": _row(k_m - k_expected, TOLERANCES["curvature_moment"],
                                 value=k_m, expected=k_expected),
    }


def santalo_check(c: SampledCurve, samples: int, seed: int = 0, workers: int = 1) -> dict:
    est, se = bl.santalo_estimate(c, samples, seed, workers)
    expected = 2 * math.pi * c.A
    z = (est - expected) / se if se > 0 else 0.0
    return {"santalo": _row(z, TOLERANCES["santalo_sigma"], value=est, stderr=se,
                            expected=expected, samples=samples)}


def _random_chords(c: SampledCurve, n: int, seed: int):
    u, _ = SeededStream(seed, 1 << 20).uniforms(2 * n)
    s_x = u[0::2] * c.P
    # keep chords away from the degenerate short ones
    s_y = s_x + (0.1 + 0.8 * u[1::2]) * c.P
    return s_x, np.mod(s_y, c.P)


def generating_checks(c: SampledCurve, n: int = 100, seed: int = 0,
                      h: float | None = None) -> dict:
    """Chord-length derivatives against central differences of ``L``."""
    h = h or 1e-4 * c.P
    g_err = h_err = sum_err = 0.0
    for sx, sy in zip(*_random_chords(c, n, seed)):
        d = bl.generating_derivatives(c, sx, sy)

        def L(a, b):
            return float(bl.chord_length(c, a, b))

        # fourth-order differences
        def d1(fn, x):
            return (8 * (fn(x + h) - fn(x - h)) - (fn(x + 2 * h) - fn(x - 2 * h))) / (12 * h)

        Lx = d1(lambda a: L(a, sy), sx)
        Ly = d1(lambda b: L(sx, b), sy)
        g_err = max(g_err, abs(Lx - d.L1), abs(Ly - d.L2))
        Lxx = d1(lambda a: bl.generating_derivatives(c, a, sy).L1, sx)
        Lxy = d1(lambda b: bl.generating_derivatives(c, sx, b).L1, sy)
        Lyy = d1(lambda b: bl.generating_derivatives(c, sx, b).L2, sy)
        for fd, an in ((Lxx, d.L11), (Lxy, d.L12), (Lyy, d.L22)):
            h_err = max(h_err, abs(fd - an) / max(1.0, abs(an)))
        _, _, kx = c.param.frame(c.t_of_s(sx))
        _, _, ky = c.param.frame(c.t_of_s(sy))
        sphi = math.sqrt(max(1 - d.L1**2, 0.0))
        spsi = math.sqrt(max(1 - d.L2**2, 0.0))
        if c.kind.kappa == 0:
            closed = (sphi + spsi) ** 2 / d.L - float(kx) * sphi - float(ky) * spsi
            sum_err = max(sum_err, abs(d.L11 + 2 * d.L12 + d.L22 - closed))
    out = {
        "generating_gradient": _row(g_err, TOLERANCES["generating_gradient"], chords=n),
        "generating_hessian": _row(h_err, TOLERANCES["generating_hessian"], chords=n),
    }
    if c.kind.kappa == 0:
        out["second_variation_sum"] = _row(sum_err, TOLERANCES["second_variation_sum"], chords=n)
    return out


def jacobian_check(c: SampledCurve, n: int = 100, seed: int = 0) -> dict:
    s, phi = sample_billiard_measure(c, SeededStream(seed, 1 << 21), n)
    phi = np.clip(phi, 0.02, np.pi - 0.02)
    det = bl.map_jacobian(c, s, phi)
    return {"jacobian": _row(float(np.max(np.abs(det - 1.0))), TOLERANCES["jacobian"],
                             points=n)}


def billiard_identities(c: SampledCurve, samples: int = 100_000, seed: int = 0,
                        workers: int = 1, chords: int = 100) -> dict:
    table = quadrature_identities(c)
    table.update(santalo_check(c, samples, seed, workers))
    table.update(generating_checks(c, chords, seed))
    table.update(jacobian_check(c, chords, seed))
    return table
