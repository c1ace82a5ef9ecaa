"""Geodesic flow of ``g = f g0`` on the 2-torus, Jacobi fields and conjugate points.

Unit-speed geodesics are written in the angle form

    x' = (cos phi, sin phi) / sqrt(f),
    phi' = (-f_1 sin phi + f_2 cos phi) / (2 f^(3/2)),

with the transversal Jacobi equation ``J'' + K J = 0`` carried alongside.
:func:`integrate_geodesic` uses the coordinate-velocity form instead so
that conservation of ``f |x'|^2`` is a genuine check on the integrator.

Monte Carlo runs go through a vectorized DOP853 stepper with per-row
step-size control; single trajectories use :func:`scipy.integrate.solve_ivp`.
"""
from __future__ import annotations

import math
from functools import partial
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.integrate._ivp import dop853_coefficients as _dop

from .conformal import TrigPoly
from .errors import DomainError, IntegrationError, ValidationError
from .sampling import (CHUNK_SIZE, SeededStream, make_estimate, run_chunks,
                       sample_liouville_torus)

DEFAULT_TOL = 1e-10
MC_TOL = 1e-9
H_MAX = 0.5
RESCALE = 1e50

_A = _dop.A[:_dop.N_STAGES, :_dop.N_STAGES]
_B = _dop.B
_E3 = _dop.E3
_E5 = _dop.E5


def _check_metric(p: TrigPoly) -> TrigPoly:
    if not isinstance(p, TrigPoly) or p.n != 2:
        raise ValidationError("geodesic simulation needs a 2-dimensional conformal factor")
    return p


def _local(p: TrigPoly, x):
    """``f``, gradient and Laplacian of ``f`` at points ``x`` of shape (B, 2)."""
    f = np.full(x.shape[0], p.c0)
    g = np.zeros_like(x)
    lap = np.zeros(x.shape[0])
    for w, (_, a, b) in zip(p.wavevectors(), p.terms):
        theta = x @ w
        c, s = np.cos(theta), np.sin(theta)
        val = a * c + b * s
        f += val
        g += (b * c - a * s)[:, None] * w
        lap -= (w @ w) * val
    return f, g, lap


def _gauss_from(f, g, lap):
    return -(f * lap - np.sum(g * g, axis=-1)) / (2.0 * f**3)


def gauss_at(p: TrigPoly, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return _gauss_from(*_local(p, x))


def _angle_rhs(p: TrigPoly, y):
    """Right-hand side for rows ``(x1, x2, phi[, J, Jp])``."""
    f, g, lap = _local(p, y[:, :2])
    sq = np.sqrt(f)
    c, s = np.cos(y[:, 2]), np.sin(y[:, 2])
    out = np.empty_like(y)
    out[:, 0] = c / sq
    out[:, 1] = s / sq
    out[:, 2] = (g[:, 1] * c - g[:, 0] * s) / (2.0 * f * sq)
    if y.shape[1] > 3:
        out[:, 3] = y[:, 4]
        out[:, 4] = -_gauss_from(f, g, lap) * y[:, 3]
    return out


# ---------------------------------------------------------------------------
# vectorized DOP853

def _dop853_batch(rhs, y0, duration, tol=MC_TOL, h_max=H_MAX, jacobi=False,
                  on_step=None):
    """Integrate every row of ``y0`` over its own ``duration``.

    The error norm is the DOP853 one with ``atol = rtol = tol``; if
    ``jacobi`` is set, columns 3-4 hold a linear Jacobi pair and use a
    scale relative to ``hypot(J, J')``, so rescaling the pair never
    changes the step sequence. ``on_step(idx, y_old, y_new)`` may return a
    boolean mask of rows to retire early. Returns final states and a mask
    of rows retired by ``on_step``.
    """
    y = np.array(y0, dtype=float)
    B, d = y.shape
    remaining = np.broadcast_to(np.asarray(duration, dtype=float), (B,)).copy()
    h = np.full(B, min(0.05, h_max))
    stopped = np.zeros(B, dtype=bool)
    active = np.flatnonzero(remaining > 0)
    fcur = rhs(y[active]) if active.size else None
    while active.size:
        ya = y[active]
        ha = np.minimum(h[active], remaining[active])
        K = np.empty((_dop.N_STAGES + 1, active.size, d))
        K[0] = fcur
        for s in range(1, _dop.N_STAGES):
            dy = np.tensordot(_A[s, :s], K[:s], axes=(0, 0)) * ha[:, None]
            K[s] = rhs(ya + dy)
        y_new = ya + np.tensordot(_B, K[:-1], axes=(0, 0)) * ha[:, None]
        f_new = rhs(y_new)
        K[-1] = f_new
        scale = tol + np.maximum(np.abs(ya), np.abs(y_new)) * tol
        if jacobi:
            mag = np.maximum(np.hypot(ya[:, 3], ya[:, 4]), np.hypot(y_new[:, 3], y_new[:, 4]))
            scale[:, 3:5] = (tol * mag)[:, None]
        e5 = np.tensordot(_E5, K, axes=(0, 0)) / scale
        e3 = np.tensordot(_E3, K, axes=(0, 0)) / scale
        n5 = np.sum(e5 * e5, axis=1)
        n3 = np.sum(e3 * e3, axis=1)
        denom = n5 + 0.01 * n3
        with np.errstate(invalid="ignore", divide="ignore"):
            err = np.where(denom > 0, ha * n5 / np.sqrt(denom * d), 0.0)
            factor = np.where(err > 0, 0.9 * err ** (-1.0 / 8.0), 10.0)
        ok = err < 1.0
        if not np.all(np.isfinite(y_new[ok])):
            raise IntegrationError("non-finite state in batch integration")
        h[active] = np.clip(ha * np.where(ok, np.minimum(factor, 10.0),
                                          np.maximum(factor, 0.2)), 0.0, h_max)
        if np.any(h[active] < 1e-12):
            bad = active[h[active] < 1e-12][0]
            raise IntegrationError(f"step size underflow at state {y[bad].tolist()}")
        acc = active[ok]
        if acc.size:
            y_old = y[acc]
            y[acc] = y_new[ok]
            remaining[acc] -= ha[ok]
            if jacobi:
                mag = np.hypot(y[acc, 3], y[acc, 4])
                big = mag > RESCALE
                if np.any(big):
                    y[acc[big], 3:5] /= mag[big, None]
            if on_step is not None:
                done = on_step(acc, y_old, y[acc])
                stopped[acc[done]] = True
        fnext = np.where(ok[:, None], f_new, fcur)
        keep = (remaining[active] > 1e-14) & ~stopped[active]
        active = active[keep]
        fcur = fnext[keep]
    return y, stopped


def conjugate_flags(p: TrigPoly, x, phi, horizons, tol: float = MC_TOL) -> np.ndarray:
    """Vectorized conjugate-point test for each horizon.

    Row ``k`` of the result flags the geodesics whose Jacobi field with
    ``J(-T_k) = 0, J'(-T_k) = 1`` vanishes again in ``(-T_k, T_k]``.
    """
    p = _check_metric(p)
    horizons = [float(T) for T in horizons]
    if any(not T > 0 for T in horizons):
        raise DomainError("horizons must be positive")
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    B = phi.size
    rhs = partial(_angle_rhs, p)
    # backward leg: follow the reversed geodesic and keep the state at each -T
    order = np.argsort(horizons)
    back = np.column_stack([x, phi + np.pi])
    starts = {}
    t_prev = 0.0
    for k in order:
        T = horizons[k]
        if T > t_prev:
            back, _ = _dop853_batch(rhs, back, T - t_prev, tol)
            t_prev = T
        starts[k] = back.copy()
    flags = np.zeros((len(horizons), B), dtype=bool)

    def zero_seen(idx, y_old, y_new):
        return y_new[:, 3] <= 0.0

    for k, T in enumerate(horizons):
        s = starts[k]
        y0 = np.column_stack([s[:, :2], s[:, 2] + np.pi, np.zeros(B), np.ones(B)])
        _, found = _dop853_batch(rhs, y0, 2.0 * T, tol, jacobi=True, on_step=zero_seen)
        flags[k] = found
    return flags


# ---------------------------------------------------------------------------
# single trajectories

@dataclass(frozen=True)
class GeodesicState:
    x: tuple
    phi: float
    t: float
    J: float
    Jp: float
    omega: float | None = None


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Dense solution of the coordinate-velocity system.

    Rows of the state are ``(x1, x2, v1, v2, J_1, J'_1, ..., J_k, J'_k)``.
    """

    metric: TrigPoly
    t: np.ndarray
    y: np.ndarray
    sol: object
    energy_defect: float
    n_jacobi: int

    def state(self, t: float, which: int = 0) -> GeodesicState:
        y = self.sol(t)
        x = np.mod(y[:2], self.metric.periods)
        return GeodesicState(tuple(x), math.atan2(y[3], y[2]), float(t),
                             float(y[4 + 2 * which]), float(y[5 + 2 * which]))

    def jacobi(self, t, which: int = 0):
        y = self.sol(np.asarray(t, dtype=float))
        return y[4 + 2 * which], y[5 + 2 * which]

    def wronskian(self, t) -> np.ndarray:
        J1, P1 = self.jacobi(t, 0)
        J2, P2 = self.jacobi(t, 1)
        return J1 * P2 - J2 * P1


def _velocity_rhs(p: TrigPoly, n_jac: int):
    def rhs(_t, y):
        x = y[None, :2]
        f, g, lap = _local(p, x)
        f, g = f[0], g[0]
        v = y[2:4]
        gv = g @ v
        vv = v @ v
        acc = -v * gv / f + vv * g / (2.0 * f)
        K = _gauss_from(np.array([f]), g[None, :], lap)[0]
        out = np.empty_like(y)
        out[:2] = v
        out[2:4] = acc
        J = y[4::2]
        out[4::2] = y[5::2]
        out[5::2] = -K * J
        return out
    return rhs


def integrate_geodesic(p: TrigPoly, x0, phi0: float, T: float, tol: float = DEFAULT_TOL,
                       jacobi=((0.0, 1.0),), samples_per_unit: int = 20) -> GeodesicPath:
    """Unit-speed geodesic from ``(x0, phi0)`` over arclength ``[0, T]`` (``T < 0`` runs backward).

    Each pair in ``jacobi`` seeds one transversal Jacobi field at ``t = 0``.
    The energy defect ``max |f |x'|^2 - 1|`` is measured on a dense grid.
    """
    p = _check_metric(p)
    if T == 0 or not math.isfinite(T):
        raise DomainError("horizon must be finite and nonzero")
    x0 = np.asarray(x0, dtype=float)
    f0 = _local(p, x0[None, :])[0][0]
    v0 = np.array([math.cos(phi0), math.sin(phi0)]) / math.sqrt(f0)
    y0 = np.concatenate([x0, v0, np.ravel(np.asarray(jacobi, dtype=float))])
    res = solve_ivp(_velocity_rhs(p, len(jacobi)), (0.0, T), y0, method="DOP853",
                    rtol=tol, atol=tol, dense_output=True)
    if not res.success:
        raise IntegrationError(f"geodesic integration failed: {res.message}; state {y0.tolist()}")
    ts = np.linspace(0.0, T, max(int(abs(T) * samples_per_unit), 2) + 1)
    ys = res.sol(ts)
    f = _local(p, ys[:2].T)[0]
    energy = float(np.max(np.abs(f * (ys[2] ** 2 + ys[3] ** 2) - 1.0)))
    return GeodesicPath(p, ts, ys, res.sol, energy, len(jacobi))


def _angle_ode(p: TrigPoly):
    def rhs(_t, y):
        return _angle_rhs(p, y[None, :])[0]
    return rhs


def _reverse_start(p, x0, phi0, T, tol):
    """State at arclength ``-T`` along the geodesic, pointing forward."""
    res = solve_ivp(_angle_ode(p), (0.0, T), [x0[0], x0[1], phi0 + math.pi],
                    method="DOP853", rtol=tol, atol=tol)
    if not res.success:
        raise IntegrationError(f"backward leg failed: {res.message}")
    xb = res.y[:, -1]
    return xb[:2], xb[2] + math.pi


@dataclass(frozen=True)
class ConjugateReport:
    """Zeros of the Jacobi field started at ``-T`` with ``J = 0, J' = 1``.

    ``zeros[0]`` is the basepoint ``-T`` itself; ``found`` holds when a
    second zero exists, i.e. when ``-T`` has a conjugate point in
    ``(-T, T]``.
    """

    found: bool
    first_pair: tuple | None
    zeros: list = field(default_factory=list)
    T: float = 0.0


def has_conjugate_points(p: TrigPoly, x0, phi0: float, T: float,
                         tol: float = DEFAULT_TOL) -> ConjugateReport:
    p = _check_metric(p)
    if not T > 0:
        raise DomainError("horizon must be positive")
    x0 = np.asarray(x0, dtype=float)
    xb, phib = _reverse_start(p, x0, phi0, T, tol)

    def zero(_t, y):
        return y[3]

    res = solve_ivp(_angle_ode(p), (0.0, 2.0 * T), [xb[0], xb[1], phib, 0.0, 1.0],
                    method="DOP853", rtol=tol, atol=tol, events=zero)
    if not res.success:
        raise IntegrationError(f"Jacobi integration failed: {res.message}")
    taus = [t for t in res.t_events[0] if t > 1e-9]
    zeros = [-T] + [float(t - T) for t in taus]
    found = len(zeros) >= 2
    return ConjugateReport(found, (zeros[0], zeros[1]) if found else None, zeros, T)


def riccati_blowups(p: TrigPoly, x0, phi0: float, T: float, tol: float = DEFAULT_TOL,
                    eps: float = 1e-6, tau0: float = 1e-4) -> list:
    """Blowup times of ``omega' + omega^2 + K = 0`` along the same window.

    ``omega = J'/J`` starts from the pole at ``-T`` through its Laurent
    series ``1/tau - K tau/3``; each time ``omega`` reaches ``-1/eps`` the
    pole is located from the same series and stepped over symmetrically.
    The returned list starts with ``-T``.
    """
    p = _check_metric(p)
    x0 = np.asarray(x0, dtype=float)
    xb, phib = _reverse_start(p, x0, phi0, T, tol)
    geo = _angle_ode(p)
    start = solve_ivp(geo, (0.0, tau0), [xb[0], xb[1], phib], method="DOP853",
                      rtol=tol, atol=tol)
    y = start.y[:, -1]
    K0 = gauss_at(p, y[:2])[0]
    state = np.array([y[0], y[1], y[2], 1.0 / tau0 - K0 * tau0 / 3.0])

    def rhs(_t, z):
        f, g, lap = _local(p, z[None, :2])
        out = np.empty(4)
        out[:3] = _angle_rhs(p, z[None, :3])[0]
        out[3] = -z[3] ** 2 - _gauss_from(f, g, lap)[0]
        return out

    def pole(_t, z):
        return z[3] + 1.0 / eps
    pole.terminal = True
    pole.direction = -1

    poles = [-T]
    t = tau0
    while t < 2.0 * T:
        res = solve_ivp(rhs, (t, 2.0 * T), state, method="DOP853", rtol=tol, atol=tol,
                        events=pole)
        if not res.success:
            raise IntegrationError(f"Riccati integration failed: {res.message}")
        if res.status != 1:
            break
        te, ze = res.t_events[0][0], res.y_events[0][0]
        d = -1.0 / ze[3]
        poles.append(float(te + d - T))
        vel = _angle_rhs(p, ze[None, :3])[0]
        state = np.concatenate([ze[:3] + 2.0 * d * vel, [-ze[3]]])
        t = te + 2.0 * d
    return poles


# ---------------------------------------------------------------------------
# Monte Carlo

def _geodesic_chunk(p, horizons, seed, tol, stream_index, n):
    x, phi = sample_liouville_torus(p, SeededStream(seed, stream_index), n)
    flags = conjugate_flags(p, x, phi, horizons, tol)
    return flags.sum(axis=1).astype(np.int64)


def estimate_delta_horizons(p: TrigPoly, horizons, samples: int, seed: int = 0,
                            workers: int = 1, tol: float = MC_TOL,
                            chunk_size: int = CHUNK_SIZE) -> list:
    """One estimate per horizon, all from the same Liouville samples."""
    p = _check_metric(p)
    if samples < 1:
        raise DomainError("need at least one sample")
    horizons = [float(T) for T in horizons]
    hits = run_chunks(_geodesic_chunk, (p, horizons, seed, tol), samples, workers,
                      chunk_size)
    return [make_estimate(h, samples, T, "horizon", seed) for h, T in zip(hits, horizons)]


def estimate_delta_geodesic(p: TrigPoly, T: float = 50.0, samples: int = 10_000,
                            seed: int = 0, workers: int = 1, tol: float = MC_TOL):
    return estimate_delta_horizons(p, [T], samples, seed, workers, tol)[0]
