"""Billiard map, generating-function derivatives and the m-orbit classifier.

Internally the dynamics run in the curve parameter ``t`` (see
:mod:`hopfbounds.curves`); arclength only appears at the public boundary.
Every chord is the intersection of the surface with a plane through the
origin in lifted ambient coordinates (flat points lifted to ``(x, y, 1)``),
so the next boundary hit is the unique root ``t' != t`` of
``det(p, d, gamma(t'))``. The root is bracketed on ``(t, t + 2 pi)`` by
bisection on its sign and polished by Newton steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .curves import TWO_PI, SampledCurve
from .errors import DomainError, RootFindingError
from .geometry import JacobiState, SurfaceKind
from .sampling import (
    CHUNK_SIZE,
    SeededStream,
    make_estimate,
    run_chunks,
    sample_billiard_measure,
)

BISECTION_STEPS = 34
NEWTON_STEPS = 2
DEFAULT_WINDOW = 32
DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class PhasePoint:
    s: float
    phi: float


class ChordData(NamedTuple):
    L: float
    phi: float
    psi: float
    s_x: float
    s_y: float


class GenDerivatives(NamedTuple):
    L: float
    L1: float
    L2: float
    L11: float
    L12: float
    L22: float


@dataclass(frozen=True, eq=False)
class SecondVariation:
    """Symmetric tridiagonal second variation over the interior configuration points."""

    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def size(self) -> int:
        return len(self.diag)

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


class _Chords(NamedTuple):
    """Per-chord data of a batch of orbits, arrays of shape ``(steps, batch)``."""

    L: np.ndarray
    sin_a: np.ndarray
    sin_b: np.ndarray
    k_a: np.ndarray
    k_b: np.ndarray


# ---------------------------------------------------------------------------
# the map

def _shoot(c: SampledCurve, t, phi):
    """One billiard bounce from parameters ``t`` at inward angles ``phi``.

    Returns ``(t_next, psi, L, k_start, k_end)`` as arrays.
    """
    kind, param = c.kind, c.param
    t = np.asarray(t, dtype=float)
    phi = np.asarray(phi, dtype=float)
    p, g1, _ = param.derivatives(t)
    tau = g1 / geo.norm(kind, g1)[..., None]
    inward = geo.rotate(kind, p, tau)
    d = np.cos(phi)[..., None] * tau + np.sin(phi)[..., None] * inward
    normal = np.cross(geo.lift(kind, p), geo.lift(kind, d, direction=True))
    side = np.sign(np.sum(normal * geo.lift(kind, g1, direction=True), axis=-1))

    lo, hi = t.copy(), t + TWO_PI
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        val = np.sum(normal * geo.lift(kind, param.position(mid)), axis=-1)
        same = np.sign(val) == side
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    width = hi - lo
    root = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        g, gd, _ = param.derivatives(root)
        val = np.sum(normal * geo.lift(kind, g), axis=-1)
        der = np.sum(normal * geo.lift(kind, gd, direction=True), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = root - val / der
        ok = np.isfinite(cand) & (cand > lo - width) & (cand < hi + width)
        root = np.where(ok, cand, root)
    if not np.all(np.isfinite(root)) or np.any(root <= t):
        bad = int(np.argmax(~np.isfinite(root) | (root <= t)))
        raise RootFindingError(
            f"next intersection not found from t={t.flat[bad]!r}, phi={phi.flat[bad]!r}; "
            f"bracket [{lo.flat[bad]!r}, {hi.flat[bad]!r}]")

    q, qd, _ = param.derivatives(root)
    L = geo.geodesic_distance(kind, p, q, validate=False)
    if kind is SurfaceKind.FLAT:
        v = d
    else:
        v = geo.geodesic_advance(kind, p, d, L, validate=False)[1]
    tau_q = qd / geo.norm(kind, qd)[..., None]
    inward_q = geo.rotate(kind, q, tau_q)
    psi = np.arctan2(np.abs(geo.inner(kind, v, inward_q)), geo.inner(kind, v, tau_q))
    return np.mod(root, TWO_PI), psi, L, param.curvature(t), param.curvature(root)


def billiard_map(c: SampledCurve, s, phi):
    """Vectorized billiard map on arclength coordinates: returns ``(s', psi, L)``."""
    t_next, psi, L, _, _ = _shoot(c, c.t_of_s(s), phi)
    return c.s_of_t(t_next), psi, L


def billiard_step(c: SampledCurve, u: PhasePoint) -> tuple[PhasePoint, ChordData]:
    if not 0.0 < u.phi < np.pi:
        raise DomainError("inward angle must lie in (0, pi)")
    s_x = float(np.mod(u.s, c.P))
    s_y, psi, L = billiard_map(c, np.array([s_x]), np.array([u.phi]))
    nxt = PhasePoint(float(s_y[0]), float(psi[0]))
    return nxt, ChordData(float(L[0]), float(u.phi), float(psi[0]), s_x, float(s_y[0]))


def flip(u: PhasePoint) -> PhasePoint:
    """Time-reversal involution ``(s, phi) -> (s, pi - phi)``."""
    return PhasePoint(u.s, np.pi - u.phi)


def map_jacobian(c: SampledCurve, s, phi, h: float = 1e-6):
    """Determinant of the map's derivative in ``(s, cos phi)`` by central differences.

    Differences are taken in ``(s, phi)``, where the map stays smooth up to
    grazing angles, and converted with the exact factor ``sin(psi) / sin(phi)``.
    """
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)

    def diff(a, b):
        ds = np.mod(a[0] - b[0] + 0.5 * c.P, c.P) - 0.5 * c.P
        return ds / (2 * h), (a[1] - b[1]) / (2 * h)

    ds_ds, dp_ds = diff(billiard_map(c, s + h, phi), billiard_map(c, s - h, phi))
    ds_dp, dp_dp = diff(billiard_map(c, s, phi + h), billiard_map(c, s, phi - h))
    psi = billiard_map(c, s, phi)[1]
    return (ds_ds * dp_dp - ds_dp * dp_ds) * np.sin(psi) / np.sin(phi)


# ---------------------------------------------------------------------------
# generating function

def _chord_terms(kind, L, sin_a, sin_b, k_a, k_b):
    """``(L11, L12, L22)`` of the chord-length generating function."""
    ratio = geo.focal_ratio(kind, L)
    L11 = sin_a**2 * ratio - k_a * sin_a
    L22 = sin_b**2 * ratio - k_b * sin_b
    L12 = sin_a * sin_b / geo.focal_length(kind, L)
    return L11, L12, L22


def chord_length(c: SampledCurve, s_x, s_y):
    """Generating function: geodesic distance between two boundary points."""
    p = c.param.position(c.t_of_s(s_x))
    q = c.param.position(c.t_of_s(s_y))
    return geo.geodesic_distance(c.kind, p, q, validate=False)


def generating_derivatives(c: SampledCurve, s_x: float, s_y: float) -> GenDerivatives:
    """First and second partial derivatives of the chord length.

    The second derivatives use the closed forms
    ``L11 = sin^2(phi) m'/m - k(x) sin(phi)``, ``L12 = sin(phi) sin(psi) / m``,
    ``L22 = sin^2(psi) m'/m - k(y) sin(psi)``, where ``m(L)`` is ``L``,
    ``sin L`` or ``sinh L`` on the plane, sphere and hyperbolic plane.
    """
    kind = c.kind
    p, tau_p, k_x = c.param.frame(c.t_of_s(s_x))
    q, tau_q, k_y = c.param.frame(c.t_of_s(s_y))
    L = float(geo.geodesic_distance(kind, p, q, validate=False))
    if not L > 1e-12:
        raise DomainError("generating function needs two distinct boundary points")
    if kind is SurfaceKind.FLAT:
        d = (q - p) / L
        v = d
    else:
        # q - p cos L on the sphere, q - p cosh L on the hyperboloid
        d = q - p * (kind.kappa * geo.inner(kind, p, q))
        d = d / geo.norm(kind, d)
        v = geo.geodesic_advance(kind, p, d, L, validate=False)[1]
    cos_phi = float(geo.inner(kind, d, tau_p))
    sin_phi = float(geo.inner(kind, d, geo.rotate(kind, p, tau_p)))
    cos_psi = float(geo.inner(kind, v, tau_q))
    sin_psi = float(-geo.inner(kind, v, geo.rotate(kind, q, tau_q)))
    L11, L12, L22 = _chord_terms(kind, L, sin_phi, sin_psi, float(k_x), float(k_y))
    return GenDerivatives(L, -cos_phi, cos_psi, float(L11), float(L12), float(L22))


def reflect_jacobi(state, k, phi) -> JacobiState:
    """Focusing jump of a transversal Jacobi field at a boundary reflection."""
    J, Jp = state
    return JacobiState(J, Jp - (2.0 * k / np.sin(phi)) * J)


def beam_trace(c: SampledCurve, u: PhasePoint, state, bounces: int):
    """Follow a beam along an orbit: free flight then mirror reflection, per bounce.

    Returns the phase points and the Jacobi states just after each reflection.
    """
    points, states = [], []
    for _ in range(bounces):
        nxt, chord = billiard_step(c, u)
        state = geo.jacobi_flight(c.kind, state, chord.L)
        _, _, k = c.param.frame(c.t_of_s(nxt.s))
        state = reflect_jacobi(state, float(k), chord.psi)
        points.append(nxt)
        states.append(JacobiState(float(state.J), float(state.Jp)))
        u = nxt
    return points, states


# ---------------------------------------------------------------------------
# second variation and the discrete Jacobi field

def ldl_pivots(diag, offdiag) -> np.ndarray:
    """Pivots of the LDL^T factorization of a symmetric tridiagonal matrix."""
    diag = np.asarray(diag, dtype=float)
    offdiag = np.asarray(offdiag, dtype=float)
    piv = np.empty_like(diag)
    piv[0] = diag[0]
    for i in range(1, len(diag)):
        if piv[i - 1] == 0.0:
            piv[i:] = np.nan
            break
        piv[i] = diag[i] - offdiag[i - 1] ** 2 / piv[i - 1]
    return piv


def is_negative_definite(sv: SecondVariation) -> bool:
    """All LDL^T pivots strictly negative."""
    piv = ldl_pivots(sv.diag, sv.offdiag)
    return bool(np.all(piv < 0))


def _fd_second_variation(c, s):
    h = 1e-5 * c.P

    def Lf(a, b):
        return float(chord_length(c, a, b))

    def second(f, x):
        def d2(hh):
            return (f(x + hh) - 2.0 * f(x) + f(x - hh)) / hh**2
        return (4.0 * d2(0.5 * h) - d2(h)) / 3.0

    def mixed(a, b):
        def d2(hh):
            return (Lf(a + hh, b + hh) - Lf(a + hh, b - hh)
                    - Lf(a - hh, b + hh) + Lf(a - hh, b - hh)) / (4 * hh * hh)
        return (4.0 * d2(0.5 * h) - d2(h)) / 3.0

    m = len(s)
    diag = np.array([second(lambda x, i=i: Lf(s[i - 1], x) + Lf(x, s[i + 1]), s[i])
                     for i in range(1, m - 1)])
    off = np.array([mixed(s[i], s[i + 1]) for i in range(1, m - 2)])
    return diag, off


def second_variation(c: SampledCurve, s_list, method: str = "analytic"):
    """Second variation of the length functional on a configuration segment.

    Returns ``(SecondVariation, is_negative_definite)``. ``method="fd"``
    uses Richardson-extrapolated central differences of chord-length sums
    (step ``1e-5 P``) instead of the closed forms.
    """
    s = [float(x) for x in s_list]
    if len(s) < 3:
        raise DomainError("a segment needs at least three points")
    if method == "fd":
        diag, off = _fd_second_variation(c, s)
    elif method == "analytic":
        gd = [generating_derivatives(c, s[i], s[i + 1]) for i in range(len(s) - 1)]
        diag = np.array([gd[i - 1].L22 + gd[i].L11 for i in range(1, len(s) - 1)])
        off = np.array([gd[i].L12 for i in range(1, len(s) - 2)])
    else:
        raise DomainError(f"unknown method {method!r}")
    sv = SecondVariation(diag, off)
    return sv, is_negative_definite(sv)


def jacobi_field(offdiag, diag) -> np.ndarray:
    """Discrete Jacobi field with ``xi_0 = 0, xi_1 = 1`` along a segment.

    ``offdiag`` holds ``b_0 .. b_{m-1}`` (one per chord) and ``diag`` holds
    ``c_1 .. c_{m-1}`` (one per interior point); trailing axes are batch axes.
    Solves ``b_{n-1} xi_{n-1} + c_n xi_n + b_n xi_{n+1} = 0``. Consecutive
    pairs are rescaled by positive factors to avoid overflow, which keeps
    every sign.
    """
    b = np.asarray(offdiag, dtype=float)
    cc = np.asarray(diag, dtype=float)
    m = b.shape[0]
    xi = np.zeros((m + 1,) + b.shape[1:])
    xi[1] = 1.0
    for n in range(1, m):
        xi[n + 1] = -(b[n - 1] * xi[n - 1] + cc[n - 1] * xi[n]) / b[n]
        scale = np.maximum(np.abs(xi[n]), np.abs(xi[n + 1]))
        scale = np.where(scale > 1e150, scale, 1.0)
        xi[: n + 2] = xi[: n + 2] / scale
    return xi


def _row_changes(sg) -> int:
    changes, prev, zeros = 0, None, 0
    for v in sg:
        if v == 0:
            zeros += 1
            continue
        if prev is not None:
            if zeros:
                # zero run between neighbors: crossing counts once, touching twice
                changes += 1 if v != prev else 2
            elif v != prev:
                changes += 1
        prev, zeros = v, 0
    return changes + (1 if zeros else 0)


def count_vanishings(xi) -> np.ndarray:
    """Number of times the field vanishes, counting the basepoint zero ``xi_0``.

    A strict sign change counts once; an exact interior zero counts once if
    its neighbours have opposite signs and twice if they agree; a zero at the
    far end counts once.
    """
    xi = np.asarray(xi, dtype=float)
    sg = np.sign(xi[1:])
    out = 1 + np.sum(sg[:-1] * sg[1:] < 0, axis=0)
    has_zero = np.any(sg == 0, axis=0)
    if np.any(has_zero):
        flat_sg = sg.reshape(sg.shape[0], -1)
        flat_out = np.array(out, dtype=int).reshape(-1)
        for j in np.nonzero(has_zero.reshape(-1))[0]:
            flat_out[j] = 1 + _row_changes(flat_sg[:, j])
        out = flat_out.reshape(out.shape) if np.ndim(out) else flat_out[0]
    return out


def _trace_chords(c: SampledCurve, t, phi, steps: int) -> _Chords:
    Ls, sa, sb, ka, kb = [], [], [], [], []
    for _ in range(steps):
        t_next, psi, L, k0, k1 = _shoot(c, t, phi)
        Ls.append(L)
        sa.append(np.sin(phi))
        sb.append(np.sin(psi))
        ka.append(k0)
        kb.append(k1)
        t, phi = t_next, psi
    return _Chords(*(np.array(x) for x in (Ls, sa, sb, ka, kb)))


def orbit_chords(c: SampledCurve, t, phi, N: int) -> _Chords:
    """Chords ``-N .. N-1`` of the orbits through ``(t, phi)``, in forward time.

    The backward half is traced forward from the flipped phase points.
    """
    fwd = _trace_chords(c, t, phi, N)
    bwd = _trace_chords(c, t, np.pi - np.asarray(phi), N)
    return _Chords(
        L=np.concatenate([bwd.L[::-1], fwd.L]),
        sin_a=np.concatenate([bwd.sin_b[::-1], fwd.sin_a]),
        sin_b=np.concatenate([bwd.sin_a[::-1], fwd.sin_b]),
        k_a=np.concatenate([bwd.k_b[::-1], fwd.k_a]),
        k_b=np.concatenate([bwd.k_a[::-1], fwd.k_b]),
    )


def _window_vanishings(kind, ch: _Chords, n_max: int, N: int):
    sl = slice(n_max - N, n_max + N)
    L11, L12, L22 = _chord_terms(kind, ch.L[sl], ch.sin_a[sl], ch.sin_b[sl],
                                 ch.k_a[sl], ch.k_b[sl])
    diag = L22[:-1] + L11[1:]
    return count_vanishings(jacobi_field(L12, diag))


def classify_windows(c: SampledCurve, t, phi, windows) -> np.ndarray:
    """Boolean flags of shape ``(len(windows), batch)``; True means not an m-orbit.

    One orbit segment of the largest window is traced and reused for all.
    """
    windows = [int(N) for N in windows]
    if min(windows) < 2:
        raise DomainError("window must be at least 2 bounces")
    n_max = max(windows)
    ch = orbit_chords(c, np.atleast_1d(t), np.atleast_1d(phi), n_max)
    return np.array([_window_vanishings(c.kind, ch, n_max, N) > 1 for N in windows])


def classify_m_window(c: SampledCurve, u: PhasePoint, N: int) -> bool:
    """True if the discrete Jacobi field started at bounce ``-N`` vanishes again by ``N``."""
    return bool(classify_windows(c, c.t_of_s(np.array([u.s])), np.array([u.phi]), [N])[0, 0])


def segment_chords(c: SampledCurve, u: PhasePoint, points: int):
    """Arclengths of a ``points``-long orbit segment starting at ``u`` and its chords."""
    t = c.t_of_s(np.array([u.s]))
    ch = _trace_chords(c, t, np.array([u.phi]), points - 1)
    s = [u.s]
    tt, ph = t, np.array([u.phi])
    for _ in range(points - 1):
        tt, ph, _, _, _ = _shoot(c, tt, ph)
        s.append(float(c.s_of_t(tt)[0]))
    return np.array(s), _Chords(*(x[:, 0] for x in ch))


def classify_segment(c: SampledCurve, ch: _Chords) -> bool:
    """Sign-change classifier on one segment given its chord data."""
    L11, L12, L22 = _chord_terms(c.kind, ch.L, ch.sin_a, ch.sin_b, ch.k_a, ch.k_b)
    xi = jacobi_field(L12, L22[:-1] + L11[1:])
    return bool(count_vanishings(xi) > 1)


# ---------------------------------------------------------------------------
# Monte Carlo

def _billiard_chunk(c, windows, seed, stream, n):
    s, phi = sample_billiard_measure(c, SeededStream(seed, stream), n)
    flags = classify_windows(c, c.t_of_s(s), phi, windows)
    return flags.sum(axis=1).astype(np.int64)


def estimate_delta_windows(c: SampledCurve, windows, samples: int, seed: int,
                           workers: int = 1, chunk_size: int = CHUNK_SIZE):
    """Delta estimates for several windows from shared orbits and seed."""
    if samples < 1:
        raise DomainError("need at least one sample")
    windows = [int(N) for N in windows]
    hits = run_chunks(_billiard_chunk, (c, windows, seed), samples, workers, chunk_size)
    return [make_estimate(h, samples, N, "bounces", seed) for h, N in zip(hits, windows)]


def estimate_delta_billiard(c: SampledCurve, N: int = DEFAULT_WINDOW,
                            samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
                            workers: int = 1):
    return estimate_delta_windows(c, [N], samples, seed, workers)[0]


def _santalo_chunk(c, seed, stream, n):
    s, phi = sample_billiard_measure(c, SeededStream(seed, stream), n)
    _, _, L = billiard_map(c, s, phi)
    return np.array([L.sum(), (L * L).sum()])


def santalo_estimate(c: SampledCurve, samples: int, seed: int = 0, workers: int = 1):
    """Monte Carlo value of the integral of chord length over phase space, with stderr."""
    tot, sq = run_chunks(_santalo_chunk, (c, seed), samples, workers)
    mean = tot / samples
    var = max(sq / samples - mean * mean, 0.0)
    mu = 2.0 * c.P
    return mu * mean, mu * np.sqrt(var / samples)
