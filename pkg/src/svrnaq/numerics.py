"""Dense float64 vector/matrix helpers and seeded random streams.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64.
The helpers here add the dimension checks and the curvature-pair update the
optimizers rely on.
"""

from __future__ import annotations

import zlib

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class CurvatureConditionError(ValueError):
    """A curvature pair violates ``y^T s > 0``."""


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    return v


def dot(a, b) -> float:
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return float(a @ b)


def matvec(M, x) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    x = as_vector(x)
    if M.ndim != 2 or M.shape[1] != x.size:
        raise DimensionError(f"cannot multiply {M.shape} matrix by length-{x.size} vector")
    return M @ x


def rank_updates_bfgs(H, s, y) -> np.ndarray:
    """Return the BFGS inverse-Hessian update of ``H`` for the pair ``(s, y)``.

    Computes ``(I - rho s y^T) H (I - rho y s^T) + rho s s^T`` with
    ``rho = 1 / y^T s`` as a symmetric rank-two correction, so the cost is
    O(d^2). The result satisfies the secant identity ``H_new @ y == s``.
    """
    H = np.asarray(H, dtype=np.float64)
    s, y = as_vector(s), as_vector(y)
    d = s.size
    if y.size != d or H.shape != (d, d):
        raise DimensionError(f"H {H.shape}, s {s.size}, y {y.size} are incompatible")
    ys = float(y @ s)
    if not ys > 0.0:
        raise CurvatureConditionError(f"y^T s = {ys!r} is not positive")
    rho = 1.0 / ys
    Hy = H @ y
    c = rho * (1.0 + rho * float(y @ Hy))
    u = 0.5 * c * s - rho * Hy
    M = np.outer(u, s)
    # M + M.T is exactly symmetric, so the result stays symmetric when H is
    return H + (M + M.T)


class Rng:
    """Seeded generator with named, independent sub-streams.

    Each stream is a PCG64 generator keyed by ``(seed, crc32(name))`` so that
    e.g. the weight-init stream and the batch-sampling stream never share
    draws, and adding a new stream leaves existing ones untouched.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()),))
            self._streams[name] = np.random.Generator(np.random.PCG64(ss))
        return self._streams[name]


def uniform_init(rng, d: int, lo: float = -0.5, hi: float = 0.5) -> np.ndarray:
    """Draw ``d`` i.i.d. values from the half-open interval ``[lo, hi)``.

    ``rng`` may be an :class:`Rng` (its ``"init"`` stream is used) or a
    ``numpy.random.Generator``.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    if d < 0:
        raise ValueError("d must be non-negative")
    gen = rng.stream("init") if isinstance(rng, Rng) else rng
    return gen.uniform(lo, hi, size=int(d)).astype(np.float64)
