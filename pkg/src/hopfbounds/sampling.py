"""Invariant-measure sampling, seeded streams and binomial statistics.

Random numbers come from counter-based streams: draw ``i`` of stream
``(seed, stream)`` is the ``i``-th 53-bit double of numpy's Philox4x64-10
generator keyed by ``(seed, stream)``. Monte Carlo work is cut into
fixed-size chunks, chunk ``j`` using stream ``j``, so results never
depend on how chunks are spread over worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

RNG_ALGORITHM = "numpy-Philox4x64-10:key=(seed,stream):float64-53bit"
CHUNK_SIZE = 2048
Z95 = 1.959963984540054
_U64 = 1 << 64


@dataclass(frozen=True)
class SeededStream:
    seed: int
    stream: int = 0
    counter: int = 0

    def uniforms(self, n: int) -> tuple[np.ndarray, "SeededStream"]:
        """Next ``n`` uniforms on [0, 1) and the advanced stream."""
        key = np.array([self.seed % _U64, self.stream % _U64], dtype=np.uint64)
        bitgen = np.random.Philox(key=key)
        # each counter increment yields four 64-bit outputs
        bitgen.advance(self.counter // 4)
        skip = self.counter % 4
        u = np.random.Generator(bitgen).random(skip + n)[skip:]
        return u, replace(self, counter=self.counter + n)


@dataclass(frozen=True)
class DeltaEstimate:
    """Monte Carlo estimate of the non-minimal fraction of phase space."""

    delta_hat: float
    stderr: float
    ci95: tuple
    hits: int
    samples: int
    window: float
    window_kind: str
    seed: int
    rng: str = RNG_ALGORITHM

    def to_dict(self) -> dict:
        return {"delta_hat": self.delta_hat, "stderr": self.stderr,
                "ci95": list(self.ci95), "hits": self.hits, "samples": self.samples,
                "window": self.window, "window_kind": self.window_kind,
                "seed": self.seed, "rng": self.rng}


def confidence_interval(hits: int, samples: int, z: float = Z95):
    """Point estimate, binomial standard error and Wilson score interval."""
    if samples <= 0:
        raise DomainError("confidence interval needs at least one sample")
    if not 0 <= hits <= samples:
        raise DomainError("hits must lie in [0, samples]")
    p = hits / samples
    stderr = math.sqrt(p * (1.0 - p) / samples)
    z2n = z * z / samples
    center = (p + 0.5 * z2n) / (1.0 + z2n)
    half = z * math.sqrt(p * (1.0 - p) / samples + z2n / (4.0 * samples)) / (1.0 + z2n)
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == samples else min(1.0, center + half)
    return p, stderr, (lo, hi)


def make_estimate(hits, samples, window, window_kind, seed) -> DeltaEstimate:
    p, se, ci = confidence_interval(int(hits), int(samples))
    return DeltaEstimate(p, se, ci, int(hits), int(samples), window, window_kind, int(seed))


def sample_billiard_measure(c, stream: SeededStream, n: int):
    """Phase points ``(s, phi)`` distributed as ``sin(phi) ds dphi``.

    Sample ``i`` consumes uniforms ``2i`` (arclength) and ``2i + 1`` (angle).
    """
    if n < 1:
        raise DomainError("need at least one sample")
    u, _ = stream.uniforms(2 * n)
    s = u[0::2] * c.P
    phi = np.arccos(1.0 - 2.0 * u[1::2])
    return s, phi


def sample_liouville_torus(p, stream: SeededStream, n: int, f_max: float | None = None):
    """Points ``(x, phi)`` on ``T^2 x S^1`` with density proportional to ``f dx dphi``.

    Rejection sampling: candidates use three consecutive uniforms
    ``(x1, x2, accept)`` against the envelope ``f_max (1 + 1e-9)``; the
    angles are the next ``n`` uniforms of the stream scaled to ``[0, 2 pi)``.
    """
    if n < 1:
        raise DomainError("need at least one sample")
    if f_max is None:
        from .conformal import f_range
        f_max = f_range(p)[1]
    env = f_max * (1.0 + 1e-9)
    periods = np.asarray(p.periods)
    accepted = []
    count = 0
    while count < n:
        batch = max(64, int(1.25 * (n - count) * env / p.c0) + 16)
        u, stream = stream.uniforms(3 * batch)
        u = u.reshape(batch, 3)
        x = u[:, :2] * periods
        f = p.evaluate(x, order=0)[0]
        keep = x[u[:, 2] * env < f]
        accepted.append(keep)
        count += keep.shape[0]
    x = np.concatenate(accepted)[:n]
    u, _ = stream.uniforms(n)
    return x, 2.0 * np.pi * u


def phase_integral_billiard(c, integrand, grid=None) -> float:
    """Integral of ``integrand(s, phi)`` against ``sin(phi) ds dphi`` over phase space.

    Periodic trapezoid rule in ``s`` and Gauss-Legendre in ``phi``;
    ``grid = (n_s, n_phi)`` defaults to ``(c.n_samples, 64)``.
    """
    n_s, n_phi = grid if grid is not None else (c.n_samples, 64)
    s = np.arange(n_s) * (c.P / n_s)
    x, w = np.polynomial.legendre.leggauss(n_phi)
    phi = 0.5 * np.pi * (x + 1.0)
    w = 0.5 * np.pi * w
    S, PHI = np.meshgrid(s, phi, indexing="ij")
    vals = np.asarray(integrand(S, PHI), dtype=float) * np.sin(PHI)
    vals = np.broadcast_to(vals, S.shape)
    return float((c.P / n_s) * np.sum(vals @ w))


def chunk_plan(samples: int, chunk_size: int = CHUNK_SIZE):
    """``(stream index, sample count)`` for every chunk of a run."""
    full, rest = divmod(samples, chunk_size)
    plan = [(j, chunk_size) for j in range(full)]
    if rest:
        plan.append((full, rest))
    return plan


def run_chunks(task, args, samples: int, workers: int = 1,
               chunk_size: int = CHUNK_SIZE):
    """Evaluate ``task(*args, stream_index, n)`` for all chunks and sum the results.

    ``task`` must return an integer numpy array (hit counts); integer sums
    make the total independent of ordering and of ``workers``.
    """
    plan = chunk_plan(samples, chunk_size)
    if workers <= 1 or len(plan) <= 1:
        parts = [task(*args, j, n) for j, n in plan]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task, *args, j, n) for j, n in plan]
            parts = [f.result() for f in futures]
    return np.sum(parts, axis=0)
