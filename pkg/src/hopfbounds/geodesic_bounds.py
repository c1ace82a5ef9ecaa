"""Lower bounds on the non-minimal fraction for conformally flat tori.

For ``g = f g0`` on ``T^n`` and a positive weight ``psi`` the bound reads

    n = 2:  delta >= pi * I / (4 |K|_sup |psi(f)|_sup Vol_g)
    n > 2:  delta >= (n-1) w_{n-1} * I / (4 n |Ric|_sup |psi(f)|_sup Vol_g)

with ``I = integral Psi(f) |grad f|^2 dx`` and ``w_{n-1}`` the volume of
the unit sphere ``S^(n-1)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import conformal as cm
from .errors import ConsistencyError, DomainError, ValidationError

DEFAULT_SCAN = 64


@dataclass(frozen=True)
class Power:
    """``psi(f) = f**alpha``."""

    alpha: float

    def value(self, f):
        return np.power(f, self.alpha)

    def derivative(self, f):
        return self.alpha * np.power(f, self.alpha - 1.0)

    def check(self, n: int, f_range=None) -> None:
        a = self.alpha
        if not math.isfinite(a):
            raise ValidationError("alpha must be finite")
        if n == 2:
            if not 0.0 < a < 4.0:
                raise ValidationError(f"alpha = {a} outside (0, 4) for n = 2")
        elif not (n - 2) + a * (4.0 - a) > 0.0:
            raise ValidationError(f"alpha = {a} violates (n-2) + alpha(4-alpha) > 0 for n = {n}")

    def describe(self) -> dict:
        return {"kind": "power", "alpha": self.alpha}


@dataclass(frozen=True)
class Custom:
    """User-supplied weight given by vectorized callables for ``psi`` and ``psi'``."""

    psi: Callable
    dpsi: Callable
    label: str = "custom"

    def value(self, f):
        return np.asarray(self.psi(f), dtype=float)

    def derivative(self, f):
        return np.asarray(self.dpsi(f), dtype=float)

    def check(self, n: int, f_range=None) -> None:
        if f_range is None:
            return
        fs = np.linspace(f_range[0], f_range[1], 257)
        vals = self.value(fs)
        if not (np.all(np.isfinite(vals)) and np.all(vals > 0)):
            raise ValidationError(f"psi not positive on [{f_range[0]:.6g}, {f_range[1]:.6g}]")
        if not np.all(np.isfinite(self.derivative(fs))):
            raise ValidationError("psi' not finite on the range of f")

    def describe(self) -> dict:
        return {"kind": "custom", "label": self.label}


PsiSpec = Union[Power, Custom]


def capital_psi(n: int, psi, f):
    """The weight ``Psi(f)`` multiplying ``|grad f|^2`` in the numerator."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("Psi needs f > 0")
    p = psi.value(f)
    if np.any(~(p > 0)):
        raise DomainError("psi must be positive at f")
    dp = psi.derivative(f)
    base = dp * (4.0 / f - dp / p)
    if n == 2:
        return base
    return f ** (n / 2.0 - 1.0) * base + (n - 2) * f ** (n / 2.0 - 3.0) * p


def capital_psi_power(n: int, alpha: float, f):
    """Closed form of ``Psi`` for ``psi = f**alpha``."""
    f = np.asarray(f, dtype=float)
    if n == 2:
        return alpha * (4.0 - alpha) * f ** (alpha - 2.0)
    return ((n - 2) + alpha * (4.0 - alpha)) * f ** (n / 2.0 - 3.0 + alpha)


@dataclass(frozen=True)
class GeodesicBoundReport:
    n: int
    psi: dict
    capital_psi_integral: float
    curv_sup: float
    psi_sup: float
    vol_g: float
    delta_lb: float
    m: int
    warning: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _prefactor(n: int) -> float:
    if n == 2:
        return math.pi / 4.0
    return (n - 1) * cm.unit_sphere_volume(n) / (4.0 * n)


def _assemble(n, integral, curv_sup, psi_sup, vol_g) -> float:
    if curv_sup == 0.0:
        if integral > 0.0:
            raise ConsistencyError("nonzero numerator with vanishing curvature", residual=integral)
        return 0.0
    return max(_prefactor(n) * integral / (curv_sup * psi_sup * vol_g), 0.0)


def numerator_integral(field: cm.MetricField, psi) -> float:
    """``integral Psi(f) |grad f|^2 dx`` by the uniform-grid rule."""
    g2 = np.sum(field.grad * field.grad, axis=-1)
    return float(np.mean(capital_psi(field.n, psi, field.f) * g2)) * field.poly.volume


def bound_theorem2(field: cm.MetricField, curv: cm.CurvatureField, psi,
                   norms: dict | None = None, refine: bool = True) -> GeodesicBoundReport:
    """Evaluate the lower bound on delta for weight ``psi``.

    ``norms`` may carry precomputed ``curv_sup``, ``vol_g``, ``f_min`` and
    ``f_max`` so that scans do not repeat the sup searches.
    """
    n = field.n
    base = norms if norms is not None else _base_norms(curv, refine)
    fr = (base["f_min"], base["f_max"])
    psi.check(n, fr)
    psi_sup = _psi_sup(psi, field, fr, refine)
    integral = numerator_integral(field, psi)
    delta = _assemble(n, integral, base["curv_sup"], psi_sup, base["vol_g"])
    warn = None
    if delta > 1.0:
        warn = f"bound {delta:.4g} exceeds 1"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    return GeodesicBoundReport(n, psi.describe(), integral, base["curv_sup"], psi_sup,
                               base["vol_g"], delta, field.m, warn)


def _base_norms(curv: cm.CurvatureField, refine: bool) -> dict:
    out = cm.field_norms(curv, None, refine)
    out["f_min"], out["f_max"] = cm.f_range(curv.field.poly, curv.field.m)
    return out


def _psi_sup(psi, field, fr, refine) -> float:
    sup = float(np.max(psi.value(field.f)))
    if refine:
        sup = max(sup, float(psi.value(np.array(fr[0]))), float(psi.value(np.array(fr[1]))))
    return sup


def power_bound_closed_form(field: cm.MetricField, alpha: float, curv_sup: float,
                            f_max: float, f_min: float) -> float:
    """The power-weight bound written out in closed form.

    Kept independent of :func:`bound_theorem2`: the numerator uses the
    closed-form ``Psi`` and the sup of ``f**alpha`` is taken from the
    extreme values of ``f`` directly.
    """
    n = field.n
    Power(alpha).check(n)
    g2 = np.sum(field.grad**2, axis=-1)
    integral = float(np.mean(capital_psi_power(n, alpha, field.f) * g2)) * field.poly.volume
    psi_sup = max(f_max**alpha, f_min**alpha)
    vol = float(np.mean(field.f ** (n / 2.0))) * field.poly.volume
    return _assemble(n, integral, curv_sup, psi_sup, vol)


def example_bound_n2(field: cm.MetricField, K_sup: float, f_max: float) -> float:
    """``pi int |grad f|^2 / (|K|_sup |f|_sup^2 int f)``, the n = 2, alpha = 2 case."""
    if field.n != 2:
        raise DomainError("the alpha = 2 surface formula is for n = 2")
    if K_sup == 0.0:
        return 0.0
    vol = field.poly.volume
    grad2 = float(np.mean(field.grad[..., 0] ** 2 + field.grad[..., 1] ** 2)) * vol
    return math.pi * grad2 / (K_sup * f_max**2 * float(np.mean(field.f)) * vol)


def default_alpha_grid(n: int, steps: int = DEFAULT_SCAN) -> np.ndarray:
    """Evenly spaced alphas over (0, 2] for n = 2 and [0, 2] for n >= 3."""
    if n == 2:
        return np.linspace(2.0 / steps, 2.0, steps)
    return np.linspace(0.0, 2.0, steps)


def optimize_alpha(field: cm.MetricField, curv: cm.CurvatureField, alphas=None,
                   refine: bool = True):
    """Grid scan of the power-weight bound; ties resolve to the smallest alpha.

    Returns ``(alpha_star, delta_star, reports)`` with one report per
    admissible alpha, in increasing alpha order.
    """
    n = field.n
    alphas = default_alpha_grid(n) if alphas is None else np.asarray(alphas, dtype=float)
    admissible = []
    for a in np.unique(alphas):
        try:
            Power(float(a)).check(n)
        except ValidationError:
            continue
        admissible.append(float(a))
    if not admissible:
        raise DomainError("no admissible alpha in the scan grid")
    norms = _base_norms(curv, refine)
    reports = []
    for a in admissible:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            reports.append(bound_theorem2(field, curv, Power(a), norms, refine))
    best = max(range(len(reports)), key=lambda i: (reports[i].delta_lb, -i))
    return admissible[best], reports[best].delta_lb, reports
