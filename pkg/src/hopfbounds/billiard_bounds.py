"""Closed-form lower bounds on the non-minimal fraction for convex billiards.

Inputs are the perimeter ``P``, enclosed area ``A`` and minimal geodesic
curvature ``k_min`` of the table. Every bound is proportional to the
isoperimetric defect of the surface, so all of them vanish on circles.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import ConsistencyError, DomainError
from .geometry import SurfaceKind

TOL_ISO = 1e-9


@dataclass(frozen=True)
class BoundReport:
    surface: SurfaceKind
    P: float
    A: float
    k_min: float
    defect: float
    b2_strong: float | None = None
    b2_weak: float | None = None
    b1: float | None = None
    b3: float | None = None
    b4: float | None = None
    best: float = 0.0
    applicability: dict = field(default_factory=dict)

    def present(self) -> dict:
        names = ("b2_strong", "b2_weak", "b1", "b3", "b4")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["surface"] = self.surface.name.lower()
        return out


def isoperimetric_defect(surface: SurfaceKind, P: float, A: float) -> float:
    """``P^2 - 4 pi A`` on the plane, ``+ A^2`` on the sphere, ``- A^2`` on H^2."""
    return P * P - 4.0 * math.pi * A + surface.kappa * A * A


def _clamp(value: float, scale: float, name: str) -> float:
    if value < -TOL_ISO * scale:
        raise ConsistencyError(f"{name} = {value:.3e} is negative: inconsistent invariants",
                               residual=value)
    return max(value, 0.0)


def evaluate_billiard_bounds(surface, P: float, A: float, k_min: float,
                             in_hemisphere: bool | None = None) -> BoundReport:
    """Evaluate every applicable bound for a table with invariants ``(P, A, k_min)``.

    ``in_hemisphere`` must be True for the spherical bound to apply; it is
    taken from the curve builder and never re-verified here. On the
    hyperbolic plane the bound needs ``k_min > 1``; otherwise it is reported
    as inapplicable rather than raising.
    """
    surface = SurfaceKind.parse(surface)
    if not (P > 0 and A > 0 and k_min > 0):
        raise DomainError("P, A and k_min must be positive")
    scale = P * P
    defect = _clamp(isoperimetric_defect(surface, P, A), scale, "isoperimetric defect")
    flags = {}
    pi = math.pi
    vals = {}
    if surface is SurfaceKind.FLAT:
        root = math.sqrt(4.0 * pi * A)
        vals["b2_strong"] = pi * defect / (4.0 * P * (P + root))
        vals["b2_weak"] = pi * defect / (8.0 * P * P)
        vals["b1"] = defect * k_min / (8.0 * P)
        flags.update(b2="plane", b1="plane")
    elif surface is SurfaceKind.SPHERE:
        if in_hemisphere:
            vals["b3"] = (pi / (2.0 * math.atan(1.0 / k_min)) * defect
                          / (P * (2.0 * pi + math.sqrt(P * P + (2.0 * pi - A) ** 2))))
            flags["b3"] = "curve lies in an open hemisphere"
        else:
            flags["b3"] = "inapplicable: hemisphere containment not established"
    else:
        if not P < 2.0 * pi + A:
            raise ConsistencyError("hyperbolic table violates P < 2 pi + A",
                                   residual=P - 2.0 * pi - A)
        if k_min > 1.0:
            vals["b4"] = (pi / (2.0 * math.atanh(1.0 / k_min)) * defect
                          / (P * (2.0 * pi + math.sqrt((2.0 * pi + A) ** 2 - P * P))))
            flags["b4"] = "horocyclically convex (k_min > 1)"
        else:
            flags["b4"] = f"inapplicable: k_min = {k_min:.6g} <= 1"
    best = max(vals.values()) if vals else 0.0
    return BoundReport(surface, P, A, k_min, defect, best=best, applicability=flags, **vals)


def bounds_for_curve(c) -> BoundReport:
    """Bounds for a :class:`~hopfbounds.curves.SampledCurve`."""
    return evaluate_billiard_bounds(c.kind, c.P, c.A, c.k_min, c.in_hemisphere)
