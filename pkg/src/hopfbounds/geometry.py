"""Kernels for the three constant-curvature surfaces.

Points are numpy arrays in model coordinates and every function accepts
stacks of them (leading axes broadcast):

* ``FLAT``: planar pairs ``(x, y)``.
* ``SPHERE``: unit vectors in R^3.
* ``HYPERBOLIC``: hyperboloid model ``x^2 + y^2 - t^2 = -1``, ``t > 0``,
  with the time coordinate *last*.

Geodesics are closed form; no ODE integration happens here.
"""
from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ValidationError

MODEL_TOL = 1e-12
# Minkowski signature used by the hyperboloid model.
_ETA = np.array([1.0, 1.0, -1.0])


class SurfaceKind(enum.Enum):
    FLAT = 0
    SPHERE = 1
    HYPERBOLIC = -1

    @property
    def kappa(self) -> int:
        return self.value

    @property
    def dim(self) -> int:
        """Length of a model coordinate vector."""
        return 2 if self is SurfaceKind.FLAT else 3

    @classmethod
    def parse(cls, name) -> "SurfaceKind":
        if isinstance(name, SurfaceKind):
            return name
        try:
            return {"flat": cls.FLAT, "plane": cls.FLAT, "sphere": cls.SPHERE,
                    "hyperbolic": cls.HYPERBOLIC}[str(name).lower()]
        except KeyError:
            raise ValidationError(f"unknown surface kind {name!r}") from None


class JacobiState(NamedTuple):
    """Transversal Jacobi field value ``J`` and its arclength derivative ``Jp``."""

    J: float
    Jp: float


def inner(kind: SurfaceKind, u, v):
    """Model bilinear form (Euclidean, or Minkowski for the hyperboloid)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if kind is SurfaceKind.HYPERBOLIC:
        return np.sum(u * v * _ETA, axis=-1)
    return np.sum(u * v, axis=-1)


def norm(kind: SurfaceKind, v):
    """Length of tangent vectors in the surface metric."""
    return np.sqrt(np.maximum(inner(kind, v, v), 0.0))


def validate_point(kind: SurfaceKind, p, tol: float = MODEL_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != kind.dim or not np.all(np.isfinite(p)):
        raise ValidationError(f"invalid {kind.name.lower()} point {p!r}")
    if kind is SurfaceKind.SPHERE:
        if np.any(np.abs(np.sum(p * p, axis=-1) - 1.0) > tol):
            raise ValidationError("sphere point is not a unit vector")
    elif kind is SurfaceKind.HYPERBOLIC:
        if np.any(np.abs(inner(kind, p, p) + 1.0) > tol) or np.any(p[..., 2] <= 0):
            raise ValidationError("point is not on the upper hyperboloid sheet")
    return p


def validate_direction(kind: SurfaceKind, p, d, tol: float = MODEL_TOL) -> np.ndarray:
    p = validate_point(kind, p)
    d = np.asarray(d, dtype=float)
    if d.shape != p.shape or not np.all(np.isfinite(d)):
        raise ValidationError("direction shape does not match point")
    if np.any(np.abs(inner(kind, d, d) - 1.0) > tol):
        raise ValidationError("direction is not unit length")
    if kind is not SurfaceKind.FLAT and np.any(np.abs(inner(kind, p, d)) > tol):
        raise ValidationError("direction is not tangent at the point")
    return d


def rotate(kind: SurfaceKind, p, v):
    """Rotate tangent vectors ``v`` at ``p`` by +90 degrees.

    Counterclockwise curves have their interior on the side of ``rotate(tangent)``.
    """
    v = np.asarray(v, dtype=float)
    if kind is SurfaceKind.FLAT:
        return np.stack([-v[..., 1], v[..., 0]], axis=-1)
    w = np.cross(np.asarray(p, dtype=float), v)
    if kind is SurfaceKind.HYPERBOLIC:
        w = w * _ETA
    return w


def lift(kind: SurfaceKind, p, direction: bool = False):
    """Ambient 3-vectors in which every geodesic is a plane through the origin.

    Flat points become ``(x, y, 1)`` and flat directions ``(dx, dy, 0)``;
    sphere and hyperboloid coordinates are returned unchanged.
    """
    p = np.asarray(p, dtype=float)
    if kind is not SurfaceKind.FLAT:
        return p
    last = np.zeros(p.shape[:-1]) if direction else np.ones(p.shape[:-1])
    return np.concatenate([p, last[..., None]], axis=-1)


def geodesic_advance(kind: SurfaceKind, p, d, s, validate: bool = True):
    """Point and transported unit direction at arclength ``s`` along a geodesic."""
    if validate:
        d = validate_direction(kind, p, d)
        if not np.all(np.isfinite(s)):
            raise ValidationError("arclength must be finite")
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    s = np.asarray(s, dtype=float)[..., None]
    if kind is SurfaceKind.FLAT:
        return p + s * d, np.broadcast_to(d, np.broadcast_shapes(d.shape, s.shape)).copy()
    if kind is SurfaceKind.SPHERE:
        c, sn = np.cos(s), np.sin(s)
        return p * c + d * sn, d * c - p * sn
    c, sn = np.cosh(s), np.sinh(s)
    return p * c + d * sn, d * c + p * sn


def geodesic_distance(kind: SurfaceKind, p, q, validate: bool = True):
    """Geodesic distance; on the sphere antipodal pairs raise :class:`DomainError`."""
    if validate:
        p = validate_point(kind, p)
        q = validate_point(kind, q)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = q - p
    # Chordal forms keep full relative precision for short chords.
    if kind is SurfaceKind.FLAT:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if kind is SurfaceKind.SPHERE:
        if np.any(np.sum(p * q, axis=-1) <= -1.0 + 1e-14):
            raise DomainError("antipodal points have no unique distance")
        half = 0.5 * np.sqrt(np.sum(diff * diff, axis=-1))
        return 2.0 * np.arcsin(np.minimum(half, 1.0))
    half = 0.5 * np.sqrt(np.maximum(inner(kind, diff, diff), 0.0))
    return 2.0 * np.arcsinh(half)


def jacobi_flight(kind: SurfaceKind, state, L):
    """Propagate ``(J, J')`` along a free geodesic segment of length ``L``.

    Solves ``J'' + kappa * J = 0`` in closed form.
    """
    J, Jp = state
    L = np.asarray(L, dtype=float)
    if np.any(L < 0):
        raise DomainError("flight length must be non-negative")
    if kind is SurfaceKind.FLAT:
        return JacobiState(J + L * Jp, Jp * np.ones_like(L))
    if kind is SurfaceKind.SPHERE:
        c, s = np.cos(L), np.sin(L)
        return JacobiState(J * c + Jp * s, -J * s + Jp * c)
    c, s = np.cosh(L), np.sinh(L)
    return JacobiState(J * c + Jp * s, J * s + Jp * c)


def focal_length(kind: SurfaceKind, L):
    """Jacobi solution with ``J(0) = 0, J'(0) = 1``: ``L``, ``sin L`` or ``sinh L``."""
    L = np.asarray(L, dtype=float)
    if kind is SurfaceKind.FLAT:
        return L
    return np.sin(L) if kind is SurfaceKind.SPHERE else np.sinh(L)


def focal_ratio(kind: SurfaceKind, L):
    """Logarithmic derivative of :func:`focal_length`: ``1/L``, ``cot L``, ``coth L``."""
    L = np.asarray(L, dtype=float)
    if kind is SurfaceKind.FLAT:
        return 1.0 / L
    return 1.0 / np.tan(L) if kind is SurfaceKind.SPHERE else 1.0 / np.tanh(L)
