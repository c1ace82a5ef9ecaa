"""Conformally flat metrics ``g = f g0`` on rectangular tori.

The conformal factor is a real trigonometric polynomial, so all
derivatives are exact term by term. Metric spec files look like::

    {"n": 2, "periods": [1, 1], "c0": 1.0,
     "terms": [{"freq": [1, 0], "a": 0.3, "b": 0.0}]}

meaning ``f(x) = c0 + sum a cos(theta) + b sin(theta)`` with
``theta = 2 pi sum_i freq_i x_i / period_i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import ConsistencyError, DomainError, ValidationError

POS_MARGIN = 1e-6
POSITIVITY_OVERSAMPLE = 8
# cap on the number of points of the positivity grid
POSITIVITY_MAX_POINTS = 1 << 22
TRACE_TOL = 1e-6


@dataclass(frozen=True)
class TrigPoly:
    n: int
    c0: float
    terms: tuple = ()
    periods: tuple = ()

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("dimension must be at least 2")
        periods = tuple(float(p) for p in self.periods) or (1.0,) * self.n
        if len(periods) != self.n or any(not p > 0 for p in periods):
            raise ValidationError("need one positive period per axis")
        object.__setattr__(self, "periods", periods)
        terms = []
        for freq, a, b in self.terms:
            freq = tuple(int(k) for k in freq)
            if len(freq) != self.n or not any(freq):
                raise ValidationError(f"bad frequency vector {freq}")
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValidationError("coefficients must be finite")
            terms.append((freq, float(a), float(b)))
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @property
    def is_constant(self) -> bool:
        return all(a == 0 and b == 0 for _, a, b in self.terms)

    def wavevectors(self) -> np.ndarray:
        freqs = np.array([f for f, _, _ in self.terms], dtype=float).reshape(-1, self.n)
        return 2.0 * np.pi * freqs / np.array(self.periods)

    def evaluate(self, x, order: int = 2):
        """``f``, gradient and Hessian at points ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        f = np.full(shape, self.c0)
        grad = np.zeros(shape + (self.n,)) if order >= 1 else None
        hess = np.zeros(shape + (self.n, self.n)) if order >= 2 else None
        for w, (_, a, b) in zip(self.wavevectors(), self.terms):
            theta = x @ w
            c, s = np.cos(theta), np.sin(theta)
            val = a * c + b * s
            f += val
            if order >= 1:
                grad += (b * c - a * s)[..., None] * w
            if order >= 2:
                hess -= val[..., None, None] * np.outer(w, w)
        return f, grad, hess

    def to_dict(self) -> dict:
        return {"n": self.n, "periods": list(self.periods), "c0": self.c0,
                "terms": [{"freq": list(f), "a": a, "b": b} for f, a, b in self.terms]}


def metric_from_dict(d: dict) -> TrigPoly:
    try:
        terms = tuple((t["freq"], t.get("a", 0.0), t.get("b", 0.0)) for t in d.get("terms", ()))
        return TrigPoly(int(d["n"]), float(d["c0"]), terms, tuple(d.get("periods", ())))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed metric spec: {exc}") from None


def load_metric_spec(path) -> tuple[TrigPoly, dict]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read metric spec {path}: {exc}") from None
    return metric_from_dict(raw), raw


def uniform_grid(p: TrigPoly, m: int) -> np.ndarray:
    axes = [np.arange(m) * (L / m) for L in p.periods]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _refine_extremum(func, x0, periods):
    """Local maximum of ``func`` near ``x0`` (Nelder-Mead on the periodic cover)."""
    res = optimize.minimize(lambda x: -func(x), x0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    return -res.fun, np.mod(res.x, periods)


def grid_argsup(values, pointwise, grid, periods, candidates: int = 4):
    """Supremum of a smooth periodic function from grid samples plus local
    polish, with the point where it is attained."""
    flat = values.reshape(-1)
    pts = grid.reshape(-1, grid.shape[-1])
    i0 = int(np.argmax(flat))
    best, where = float(flat[i0]), pts[i0]
    if not np.isfinite(best):
        return best, where
    for i in np.argsort(flat)[::-1][:candidates]:
        val, x = _refine_extremum(pointwise, pts[i], np.asarray(periods))
        if val > best:
            best, where = float(val), x
    return best, where


def grid_sup(values, pointwise, grid, periods, candidates: int = 4) -> float:
    return grid_argsup(values, pointwise, grid, periods, candidates)[0]


def _f_extremes(p: TrigPoly, m: int | None):
    if p.is_constant:
        zero = np.zeros(p.n)
        return (p.c0, zero), (p.c0, zero)
    res = min(POSITIVITY_OVERSAMPLE * (m or 64), int(POSITIVITY_MAX_POINTS ** (1.0 / p.n)))
    grid = uniform_grid(p, res)
    f = p.evaluate(grid, order=0)[0]

    def fval(x):
        return float(p.evaluate(np.asarray(x), order=0)[0])

    hi = grid_argsup(f, fval, grid, p.periods)
    neg_lo, x_lo = grid_argsup(-f, lambda x: -fval(x), grid, p.periods)
    return (-neg_lo, x_lo), hi


def f_range(p: TrigPoly, m: int | None = None) -> tuple[float, float]:
    """Refined minimum and maximum of ``f`` over the torus."""
    (lo, _), (hi, _) = _f_extremes(p, m)
    return lo, hi


@dataclass(frozen=True, eq=False)
class MetricField:
    poly: TrigPoly
    m: int
    grid: np.ndarray
    f: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.poly.n

    def at(self, x):
        """Off-grid evaluation of ``(f, grad f, Hess f)``."""
        return self.poly.evaluate(x)


def eval_field(p: TrigPoly, m: int) -> MetricField:
    """Sample ``f`` and its exact derivatives on the uniform ``m^n`` grid."""
    if m < 32 or m & (m - 1):
        raise ValidationError("grid resolution must be a power of two >= 32")
    (fmin, where), _ = _f_extremes(p, m)
    if not fmin >= POS_MARGIN:
        loc = ", ".join(f"{v:.6g}" for v in where)
        raise ValidationError(f"conformal factor not positive: min f = {fmin:.6g} at x = ({loc})")
    grid = uniform_grid(p, m)
    f, grad, hess = p.evaluate(grid)
    lap = np.trace(hess, axis1=-2, axis2=-1)
    return MetricField(p, m, grid, f, grad, hess, lap)


# ---------------------------------------------------------------------------
# curvature

def _gauss(f, grad, lap):
    lap_log = (f * lap - np.sum(grad * grad, axis=-1)) / f**2
    return -lap_log / (2.0 * f)


def _ricci(n, f, grad, hess):
    du = grad / (2.0 * f[..., None])
    hess_u = hess / (2.0 * f[..., None, None]) - 2.0 * du[..., :, None] * du[..., None, :]
    lap_u = np.trace(hess_u, axis1=-2, axis2=-1)
    du2 = np.sum(du * du, axis=-1)
    ric = -(n - 2) * (hess_u - du[..., :, None] * du[..., None, :])
    ric -= (lap_u + (n - 2) * du2)[..., None, None] * np.eye(n)
    return ric


def scalar_curvature(n, f, grad, lap):
    """Scalar curvature of ``f g0`` from the conformal-factor formula."""
    g2 = np.sum(grad * grad, axis=-1)
    return (1 - n) * lap / f**2 + (1 - n) * (n - 6) / 4.0 * g2 / f**3


@dataclass(frozen=True, eq=False)
class CurvatureField:
    field: MetricField
    K: np.ndarray | None = None
    Ric: np.ndarray | None = None
    Scal: np.ndarray | None = None
    trace_residual: float | None = None

    @property
    def n(self) -> int:
        return self.field.n


def gauss_curvature(field: MetricField) -> np.ndarray:
    if field.n != 2:
        raise DomainError("Gaussian curvature is defined for n = 2 only")
    return _gauss(field.f, field.grad, field.laplacian)


def ricci_and_scalar(field: MetricField):
    """Ricci matrices in the flat chart and the scalar curvature.

    Raises :class:`ConsistencyError` if ``trace(Ric) / f`` departs from the
    independently evaluated scalar curvature by more than ``1e-6``.
    """
    n = field.n
    if n < 3:
        raise DomainError("Ricci/scalar path is for n >= 3")
    ric = _ricci(n, field.f, field.grad, field.hess)
    scal = scalar_curvature(n, field.f, field.grad, field.laplacian)
    resid = float(np.max(np.abs(np.trace(ric, axis1=-2, axis2=-1) / field.f - scal)))
    if resid > TRACE_TOL:
        raise ConsistencyError(f"trace(Ric)/f differs from Scal by {resid:.3e}", residual=resid)
    return ric, scal, resid


def curvature(field: MetricField) -> CurvatureField:
    if field.n == 2:
        return CurvatureField(field, K=gauss_curvature(field))
    ric, scal, resid = ricci_and_scalar(field)
    return CurvatureField(field, Ric=ric, Scal=scal, trace_residual=resid)


def _ricci_norm(n, f, ric):
    # eigenvalues of g^{-1} Ric = Ric / f
    ev = np.linalg.eigvalsh(ric)
    return np.max(np.abs(ev), axis=-1) / f


def pointwise_curvature_norm(p: TrigPoly, x) -> float:
    f, grad, hess = p.evaluate(np.asarray(x, dtype=float))
    if p.n == 2:
        return float(abs(_gauss(f, grad, np.trace(hess))))
    return float(_ricci_norm(p.n, f, _ricci(p.n, f, grad, hess)))


def curvature_sup(curv: CurvatureField, refine: bool = True) -> float:
    """``sup |K|`` (n = 2) or ``sup |Ric(v, v)|`` over g-unit vectors (n > 2)."""
    field = curv.field
    if curv.n == 2:
        vals = np.abs(curv.K)
    else:
        vals = _ricci_norm(curv.n, field.f, curv.Ric)
    if not refine or float(vals.max()) == 0.0:
        return float(vals.max())
    return grid_sup(vals, lambda x: pointwise_curvature_norm(field.poly, x),
                    field.grid, field.poly.periods)


def riemannian_volume(field: MetricField) -> float:
    """Integral of ``f^(n/2)`` by the uniform-grid rule."""
    return float(np.mean(field.f ** (field.n / 2.0))) * field.poly.volume


def field_norms(curv: CurvatureField, psi=None, refine: bool = True) -> dict:
    """Curvature sup-norm, ``sup psi(f)`` and the Riemannian volume.

    ``psi`` is any object with a vectorized ``value(f)`` method; suprema
    use the grid maximum polished by local optimization unless ``refine``
    is False.
    """
    field = curv.field
    out = {"curv_sup": curvature_sup(curv, refine), "vol_g": riemannian_volume(field)}
    if psi is not None:
        vals = psi.value(field.f)
        sup = float(np.max(vals))
        if refine:
            fmin, fmax = f_range(field.poly, field.m)
            sup = max(sup, float(psi.value(np.array(fmin))), float(psi.value(np.array(fmax))))
        out["psi_sup"] = sup
    return out


def total_curvature(curv: CurvatureField) -> float:
    """``integral K dVol_g`` on T^2 (zero by Gauss-Bonnet)."""
    if curv.n != 2:
        raise DomainError("total Gaussian curvature needs n = 2")
    return float(np.mean(curv.K * curv.field.f)) * curv.field.poly.volume


def unit_sphere_volume(n: int) -> float:
    """Volume of the unit sphere S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
