"""Closed strictly convex boundary curves on the constant-curvature surfaces.

Every curve family carries an analytic parametrization ``t -> gamma(t)``,
``t in [0, 2*pi)``, traversed counterclockwise (interior on the side of
:func:`geometry.rotate` applied to the tangent). The arclength map
``s(t)`` is the exact antiderivative of a truncated Fourier series of the
parametric speed, which is spectrally accurate for the analytic families
supported here; it is inverted by Newton's method.

Spec files are JSON objects, one per curve::

    {"surface": "flat", "type": "ellipse", "a": 2.0, "b": 1.0}
    {"surface": "flat", "type": "support_fourier", "c0": 1.0,
     "harmonics": [{"m": 3, "a": 0.05, "b": 0.0}]}
    {"surface": "sphere", "type": "geodesic_circle", "r": 0.5}
    {"surface": "hyperbolic", "type": "radial_graph", "center": [0, 0, 1],
     "rho": {"c0": 0.8, "terms": [{"m": 3, "a": 0.02, "b": 0.0}]}}

``geodesic_circle`` accepts any surface; ``radial_graph`` only ``sphere``
and ``hyperbolic``. An optional ``"samples"`` key overrides the default
sample count.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import geometry as geo
from .errors import ConsistencyError, ConvexityError, ValidationError
from .geometry import SurfaceKind

TWO_PI = 2.0 * np.pi
DEFAULT_SAMPLES = 4096
MIN_SAMPLES = 256
TOL_GB = 1e-6
HEMISPHERE_MARGIN = 1e-3
CONVEXITY_OVERSAMPLE = 8


# ---------------------------------------------------------------------------
# specifications

@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float

    @property
    def kind(self) -> SurfaceKind:
        return SurfaceKind.FLAT


@dataclass(frozen=True)
class SupportFourier:
    """Support function ``h(theta) = c0 + sum a_m cos(m theta) + b_m sin(m theta)``."""

    c0: float
    harmonics: tuple = ()

    @property
    def kind(self) -> SurfaceKind:
        return SurfaceKind.FLAT


@dataclass(frozen=True)
class GeodesicCircle:
    r: float
    surface: SurfaceKind = SurfaceKind.FLAT

    def __post_init__(self):
        object.__setattr__(self, "surface", SurfaceKind.parse(self.surface))

    @property
    def kind(self) -> SurfaceKind:
        return self.surface


@dataclass(frozen=True)
class RadialGraph:
    """Curve at geodesic distance ``rho(theta)`` from ``center`` in direction ``theta``."""

    surface: SurfaceKind
    center: tuple
    c0: float
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "surface", SurfaceKind.parse(self.surface))

    @property
    def kind(self) -> SurfaceKind:
        return self.surface


CurveSpec = Union[Ellipse, SupportFourier, GeodesicCircle, RadialGraph]


def _harmonics(raw) -> tuple:
    out = []
    for item in raw:
        if isinstance(item, dict):
            item = (item["m"], item.get("a", 0.0), item.get("b", 0.0))
        m, a, b = item
        if int(m) != m:
            raise ValidationError(f"harmonic order must be an integer, got {m}")
        out.append((int(m), float(a), float(b)))
    return tuple(out)


def spec_from_dict(d: dict) -> CurveSpec:
    """Parse a curve spec from its JSON form."""
    try:
        kind = SurfaceKind.parse(d.get("surface", "flat"))
        typ = d["type"]
        if typ == "ellipse":
            spec = Ellipse(float(d["a"]), float(d["b"]))
        elif typ == "support_fourier":
            spec = SupportFourier(float(d["c0"]), _harmonics(d.get("harmonics", ())))
        elif typ == "geodesic_circle":
            spec = GeodesicCircle(float(d["r"]), kind)
        elif typ == "radial_graph":
            rho = d["rho"]
            center = d.get("center")
            if center is None:
                center = (0.0, 0.0, 1.0)
            spec = RadialGraph(kind, tuple(float(v) for v in center), float(rho["c0"]),
                               _harmonics(rho.get("terms", ())))
        else:
            raise ValidationError(f"unknown curve type {typ!r}")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed curve spec: {exc}") from None
    if spec.kind is not kind:
        raise ValidationError(f"curve type {typ!r} is not available on {kind.name.lower()}")
    return spec


def spec_to_dict(spec: CurveSpec) -> dict:
    surface = spec.kind.name.lower()
    if isinstance(spec, Ellipse):
        return {"surface": surface, "type": "ellipse", "a": spec.a, "b": spec.b}
    if isinstance(spec, SupportFourier):
        return {"surface": surface, "type": "support_fourier", "c0": spec.c0,
                "harmonics": [{"m": m, "a": a, "b": b} for m, a, b in spec.harmonics]}
    if isinstance(spec, GeodesicCircle):
        return {"surface": surface, "type": "geodesic_circle", "r": spec.r}
    return {"surface": surface, "type": "radial_graph", "center": list(spec.center),
            "rho": {"c0": spec.c0,
                    "terms": [{"m": m, "a": a, "b": b} for m, a, b in spec.terms]}}


def load_curve_spec(path) -> tuple[CurveSpec, dict]:
    """Read a JSON spec file; returns the parsed spec and the raw dict."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read curve spec {path}: {exc}") from None
    return spec_from_dict(raw), raw


# ---------------------------------------------------------------------------
# analytic parametrizations

def _trig(c0, terms, t, order):
    """Value and first ``order`` derivatives of a trig polynomial at ``t``."""
    t = np.asarray(t, dtype=float)
    out = [np.full_like(t, c0)] + [np.zeros_like(t) for _ in range(order)]
    for m, a, b in terms:
        c, s = np.cos(m * t), np.sin(m * t)
        # d^j/dt^j cycles through (c, s) -> (-s, c) -> (-c, -s) -> (s, -c)
        vals = (a * c + b * s, m * (-a * s + b * c), -m**2 * (a * c + b * s),
                m**3 * (a * s - b * c))
        for j in range(order + 1):
            out[j] = out[j] + vals[j]
    return out


class _Parametrization:
    kind: SurfaceKind

    def derivatives(self, t):
        """Return ``gamma, gamma', gamma''`` at parameters ``t``."""
        raise NotImplementedError

    def position(self, t):
        return self.derivatives(t)[0]

    def speed(self, t):
        return geo.norm(self.kind, self.derivatives(t)[1])

    def curvature(self, t):
        g, g1, g2 = self.derivatives(t)
        num = geo.inner(self.kind, g2, geo.rotate(self.kind, g, g1))
        return num / geo.norm(self.kind, g1) ** 3

    def frame(self, t):
        g, g1, _ = self.derivatives(t)
        tangent = g1 / geo.norm(self.kind, g1)[..., None]
        return g, tangent, self.curvature(t)

    def area(self) -> float:
        raise NotImplementedError


class _EllipseParam(_Parametrization):
    kind = SurfaceKind.FLAT

    def __init__(self, a, b):
        self.a, self.b = a, b

    def derivatives(self, t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        g = np.stack([self.a * c, self.b * s], axis=-1)
        g1 = np.stack([-self.a * s, self.b * c], axis=-1)
        return g, g1, -g

    def curvature(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.a, self.b
        return a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5

    def area(self):
        return np.pi * self.a * self.b


class _SupportParam(_Parametrization):
    kind = SurfaceKind.FLAT

    def __init__(self, c0, harmonics):
        self.c0, self.harmonics = c0, harmonics

    def derivatives(self, t):
        t = np.asarray(t, dtype=float)
        h, h1, h2, h3 = _trig(self.c0, self.harmonics, t, 3)
        n = np.stack([np.cos(t), np.sin(t)], axis=-1)
        nperp = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        g = h[..., None] * n + h1[..., None] * nperp
        g1 = (h + h2)[..., None] * nperp
        g2 = (h1 + h3)[..., None] * nperp - (h + h2)[..., None] * n
        return g, g1, g2

    def curvature(self, t):
        h, _, h2 = _trig(self.c0, self.harmonics, t, 2)
        return 1.0 / (h + h2)

    def radius_of_curvature(self, t):
        h, _, h2 = _trig(self.c0, self.harmonics, t, 2)
        return h + h2

    def area(self):
        # (1/2) * integral of h (h + h'') over a period.
        return np.pi * self.c0**2 + 0.5 * np.pi * sum(
            (1 - m * m) * (a * a + b * b) for m, a, b in self.harmonics)

    def perimeter(self):
        return TWO_PI * self.c0


def _tangent_frame(kind, center):
    """Orthonormal tangent frame (e1, e2) at ``center`` with ``e2 = rotate(e1)``."""
    c = np.asarray(center, dtype=float)
    trial = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial + geo.inner(kind, trial, c) * c * (1.0 if kind is SurfaceKind.HYPERBOLIC else -1.0)
    e1 = e1 / geo.norm(kind, e1)
    e2 = geo.rotate(kind, c, e1)
    return e1, e2


class _RadialParam(_Parametrization):
    def __init__(self, kind, center, c0, terms):
        self.kind = kind
        self.c0, self.terms = c0, terms
        if kind is SurfaceKind.FLAT:
            self.center = np.asarray(center, dtype=float)
            self.e1, self.e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        else:
            self.center = geo.validate_point(kind, center, tol=1e-9)
            self.e1, self.e2 = _tangent_frame(kind, self.center)

    def rho(self, t, order=0):
        return _trig(self.c0, self.terms, t, order)

    def derivatives(self, t):
        t = np.asarray(t, dtype=float)
        r, r1, r2 = (x[..., None] for x in self.rho(t, 2))
        c = self.center
        u = np.cos(t)[..., None] * self.e1 + np.sin(t)[..., None] * self.e2
        w = -np.sin(t)[..., None] * self.e1 + np.cos(t)[..., None] * self.e2
        if self.kind is SurfaceKind.FLAT:
            g = c + r * u
            g1 = r1 * u + r * w
            g2 = (r2 - r) * u + 2 * r1 * w
        elif self.kind is SurfaceKind.SPHERE:
            cr, sr = np.cos(r), np.sin(r)
            g = c * cr + u * sr
            a = -c * sr + u * cr
            g1 = a * r1 + w * sr
            g2 = -g * r1**2 + 2 * w * cr * r1 + a * r2 - u * sr
        else:
            cr, sr = np.cosh(r), np.sinh(r)
            g = c * cr + u * sr
            a = c * sr + u * cr
            g1 = a * r1 + w * sr
            g2 = g * r1**2 + 2 * w * cr * r1 + a * r2 - u * sr
        return g, g1, g2

    def polar_area(self, m=4096):
        t = np.arange(m) * (TWO_PI / m)
        r = self.rho(t)[0]
        if self.kind is SurfaceKind.FLAT:
            dens = 0.5 * r**2
        elif self.kind is SurfaceKind.SPHERE:
            dens = 1.0 - np.cos(r)
        else:
            dens = np.cosh(r) - 1.0
        return TWO_PI * float(np.mean(dens))

    def area(self):
        return self.polar_area()


class _CircleParam(_RadialParam):
    def __init__(self, kind, r):
        center = (0.0, 0.0) if kind is SurfaceKind.FLAT else (0.0, 0.0, 1.0)
        super().__init__(kind, center, r, ())
        self.r = r

    def curvature(self, t):
        t = np.asarray(t, dtype=float)
        r = self.r
        k = {SurfaceKind.FLAT: 1.0 / r, SurfaceKind.SPHERE: 1.0 / np.tan(r),
             SurfaceKind.HYPERBOLIC: 1.0 / np.tanh(r)}[self.kind]
        return np.full_like(t, k)

    def area(self):
        r = self.r
        if self.kind is SurfaceKind.FLAT:
            return np.pi * r * r
        if self.kind is SurfaceKind.SPHERE:
            return TWO_PI * (1.0 - np.cos(r))
        return TWO_PI * (np.cosh(r) - 1.0)


def _parametrize(spec: CurveSpec) -> _Parametrization:
    if isinstance(spec, Ellipse):
        if not (spec.a >= spec.b > 0):
            raise ValidationError("ellipse requires a >= b > 0")
        return _EllipseParam(spec.a, spec.b)
    if isinstance(spec, SupportFourier):
        if any(m < 2 for m, _, _ in spec.harmonics):
            raise ValidationError("support-function harmonics need order m >= 2")
        return _SupportParam(spec.c0, spec.harmonics)
    if isinstance(spec, GeodesicCircle):
        if not spec.r > 0:
            raise ValidationError("geodesic circle radius must be positive")
        if spec.kind is SurfaceKind.SPHERE and not spec.r < np.pi / 2:
            raise ValidationError("spherical circles need r < pi/2 (open hemisphere)")
        return _CircleParam(spec.kind, spec.r)
    if isinstance(spec, RadialGraph):
        if spec.kind is SurfaceKind.FLAT:
            raise ValidationError("radial graphs are defined on sphere and hyperbolic plane")
        if any(m < 1 for m, _, _ in spec.terms):
            raise ValidationError("radial harmonics need order m >= 1")
        try:
            return _RadialParam(spec.kind, spec.center, spec.c0, spec.terms)
        except ValidationError as exc:
            raise ValidationError(f"invalid radial-graph center: {exc}") from None
    raise ValidationError(f"unsupported curve spec {spec!r}")


# ---------------------------------------------------------------------------
# arclength

class ArclengthMap:
    """Exact antiderivative of a truncated Fourier series of the speed."""

    def __init__(self, speed, max_nodes=1 << 16):
        m = 256
        while True:
            t = np.arange(m) * (TWO_PI / m)
            coef = np.fft.rfft(speed(t)) / m
            mag = np.abs(coef)
            tail = mag[3 * len(mag) // 4:].max()
            if tail < 1e-16 * mag[0] or m >= max_nodes:
                break
            m *= 2
        if tail > 1e-12 * mag[0]:
            raise ConsistencyError("arclength series did not converge", residual=tail)
        keep = np.nonzero(mag > 1e-17 * mag[0])[0]
        nmax = int(keep.max()) if keep.size else 0
        self.mean_speed = coef[0].real
        self.perimeter = TWO_PI * self.mean_speed
        self.modes = np.arange(1, nmax + 1)
        # speed(t) = mean + sum alpha cos(mt) + beta sin(mt)
        self.alpha = 2.0 * coef[1:nmax + 1].real
        self.beta = -2.0 * coef[1:nmax + 1].imag

    def _series(self, t):
        t = np.asarray(t, dtype=float)
        mt = np.multiply.outer(t, self.modes)
        return np.cos(mt), np.sin(mt)

    def speed(self, t):
        c, s = self._series(t)
        return self.mean_speed + c @ self.alpha + s @ self.beta

    def s_of_t(self, t):
        """Arclength from ``t = 0``; grows by the perimeter every turn."""
        t = np.asarray(t, dtype=float)
        c, s = self._series(t)
        m = self.modes
        return self.mean_speed * t + s @ (self.alpha / m) + (1.0 - c) @ (self.beta / m)

    def t_of_s(self, s):
        """Inverse of :meth:`s_of_t`, returning ``t`` in ``[0, 2*pi)`` for ``s mod P``."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        t = s / self.mean_speed
        for _ in range(60):
            c, sn = self._series(t)
            m = self.modes
            val = self.mean_speed * t + sn @ (self.alpha / m) + (1.0 - c) @ (self.beta / m)
            step = (val - s) / (self.mean_speed + c @ self.alpha + sn @ self.beta)
            t = t - step
            if np.all(np.abs(step) < 1e-15 * TWO_PI):
                break
        return np.mod(t, TWO_PI)


# ---------------------------------------------------------------------------
# sampled curves

@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Curve sampled on a uniform arclength grid, with its invariants.

    ``param`` and ``arclength`` give exact off-grid evaluation; see
    :func:`point_frame_at`.
    """

    spec: CurveSpec
    kind: SurfaceKind
    n_samples: int
    s_grid: np.ndarray
    t_grid: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    k: np.ndarray
    P: float
    A: float
    k_min: float
    int_k: float
    gb_residual: float
    in_hemisphere: bool | None
    param: _Parametrization = field(repr=False)
    arclength: ArclengthMap = field(repr=False)

    @property
    def kappa(self) -> int:
        return self.kind.kappa

    @property
    def horocyclic(self) -> bool | None:
        """``k_min > 1`` on the hyperbolic plane; ``None`` elsewhere."""
        return self.k_min > 1.0 if self.kind is SurfaceKind.HYPERBOLIC else None

    def frame_at_t(self, t):
        return self.param.frame(t)

    def s_of_t(self, t):
        return np.mod(self.arclength.s_of_t(t), self.P)

    def t_of_s(self, s):
        return self.arclength.t_of_s(s)


def _check_convex(param, n):
    t = np.arange(n) * (TWO_PI / n)
    k = param.curvature(t)
    bad = ~(k > 0)
    if np.any(bad):
        i = int(np.argmax(bad)) if np.any(~np.isfinite(k)) else int(np.argmin(k))
        raise ConvexityError(
            f"curvature {k[i]:.6g} <= 0 at parameter t = {t[i]:.6f}", location=float(t[i]))
    return t


def build_curve(spec: CurveSpec, n_samples: int = DEFAULT_SAMPLES,
                tol_gb: float = TOL_GB) -> SampledCurve:
    """Sample ``spec`` on a uniform arclength grid of ``n_samples`` points.

    Raises :class:`ConvexityError` if the curvature is not positive on an
    8x oversampled parameter grid or a spherical curve leaves the open
    hemisphere, and :class:`ConsistencyError` if the Gauss-Bonnet residual
    exceeds ``tol_gb``.
    """
    if n_samples < MIN_SAMPLES:
        raise ValidationError(f"n_samples must be >= {MIN_SAMPLES}")
    param = _parametrize(spec)
    kind = spec.kind
    fine = _check_convex(param, CONVEXITY_OVERSAMPLE * n_samples)

    in_hemisphere = None
    if isinstance(param, _RadialParam) and not isinstance(param, _CircleParam):
        rho = param.rho(fine)[0]
        if np.any(rho <= 0):
            i = int(np.argmin(rho))
            raise ConvexityError(f"radial function non-positive at t = {fine[i]:.6f}",
                                 location=float(fine[i]))
        if kind is SurfaceKind.SPHERE:
            if rho.max() >= np.pi / 2 - HEMISPHERE_MARGIN:
                i = int(np.argmax(rho))
                raise ConvexityError(
                    f"curve leaves the open hemisphere at t = {fine[i]:.6f}",
                    location=float(fine[i]))
            in_hemisphere = True
    elif kind is SurfaceKind.SPHERE:
        in_hemisphere = True

    arc = ArclengthMap(param.speed)
    P = arc.perimeter
    s_grid = np.arange(n_samples) * (P / n_samples)
    t_grid = arc.t_of_s(s_grid)
    points, tangents, k = param.frame(t_grid)
    A = float(param.area())
    if kind is SurfaceKind.SPHERE and not A < TWO_PI:
        raise ConvexityError("spherical curve encloses at least a hemisphere")
    int_k = P * float(np.mean(k))
    gb = int_k - (TWO_PI - kind.kappa * A)
    if abs(gb) > tol_gb:
        raise ConsistencyError(
            f"Gauss-Bonnet residual {gb:.3e} exceeds tolerance {tol_gb:.1e}", residual=gb)
    for arr in (s_grid, t_grid, points, tangents, k):
        arr.setflags(write=False)
    return SampledCurve(spec=spec, kind=kind, n_samples=n_samples, s_grid=s_grid,
                        t_grid=t_grid, points=points, tangents=tangents, k=k, P=float(P),
                        A=A, k_min=float(k.min()), int_k=int_k, gb_residual=float(gb),
                        in_hemisphere=in_hemisphere, param=param, arclength=arc)


def curve_invariants(c: SampledCurve) -> dict:
    """Stored invariants plus an independently recomputed area.

    On the plane the area is recomputed by Green's theorem; on the sphere and
    hyperbolic plane from Gauss-Bonnet, and for radial graphs also by polar
    quadrature about the center.
    """
    out = {"P": c.P, "A": c.A, "k_min": c.k_min, "int_k": c.int_k,
           "gb_residual": c.gb_residual}
    if c.kind is SurfaceKind.FLAT:
        t = np.arange(c.n_samples) * (TWO_PI / c.n_samples)
        g, g1, _ = c.param.derivatives(t)
        area = 0.5 * TWO_PI * float(np.mean(g[:, 0] * g1[:, 1] - g[:, 1] * g1[:, 0]))
        out["A_green"] = area
        out["area_discrepancy"] = area - c.A
    else:
        area = c.kind.kappa * (TWO_PI - c.int_k)
        out["A_gauss_bonnet"] = area
        out["area_discrepancy"] = area - c.A
        if isinstance(c.param, _RadialParam):
            out["A_polar"] = c.param.polar_area(max(c.n_samples, 4096))
    return out


def point_frame_at(c: SampledCurve, s):
    """Point, unit tangent and curvature at arclength ``s`` (any real, reduced mod P).

    Evaluated exactly from the analytic parametrization rather than by
    interpolating the sample grid.
    """
    t = c.t_of_s(np.mod(s, c.P))
    return c.param.frame(t)


def hemisphere_flag(c: SampledCurve) -> bool | None:
    return c.in_hemisphere

