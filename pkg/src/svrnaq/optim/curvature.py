"""Curvature pairs and the two inverse-Hessian representations.

:class:`DenseInverseHessian` keeps a full ``d x d`` matrix updated with the
BFGS formula; :class:`CurvatureBuffer` keeps the last ``m`` pairs and applies
them implicitly through the two-loop recursion. Both expose ``update(pair)``
and ``direction(f)`` so the optimizers can use either.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..numerics import DimensionError, as_vector, rank_updates_bfgs

CURVATURE_EPS = 1e-8


@dataclass(frozen=True)
class CurvaturePair:
    p: np.ndarray  # displacement
    q: np.ndarray  # gradient difference

    def __post_init__(self):
        p, q = as_vector(self.p), as_vector(self.q)
        if p.shape != q.shape:
            raise DimensionError(f"pair lengths differ: {p.size} vs {q.size}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def qp(self) -> float:
        return float(self.q @ self.p)

    def acceptable(self, eps: float = CURVATURE_EPS) -> bool:
        """``q^T p > eps * ||p|| * ||q||``; false for any zero vector."""
        bound = eps * float(np.linalg.norm(self.p) * np.linalg.norm(self.q))
        return bool(np.isfinite(self.qp)) and self.qp > bound and bound > 0.0


def naq_hessian_update(H, pair: CurvaturePair, eps: float = CURVATURE_EPS):
    """Apply one NAQ/BFGS update with ``(s, y) := (p, q)``.

    Returns ``(H_new, accepted)``. A pair failing the curvature safeguard
    leaves ``H`` unchanged and returns ``accepted=False``.
    """
    if not pair.acceptable(eps):
        return H, False
    return rank_updates_bfgs(H, pair.p, pair.q), True


def initial_scaling(pairs) -> float:
    """Average of ``p^T q / q^T q`` over the stored pairs; 1.0 when empty."""
    pairs = list(pairs)
    if not pairs:
        return 1.0
    return float(np.mean([pr.qp / float(pr.q @ pr.q) for pr in pairs]))


class CurvatureBuffer:
    """FIFO store of the most recent ``m`` accepted pairs."""

    def __init__(self, m: int, eps: float = CURVATURE_EPS):
        if m < 1:
            raise ValueError("memory size must be >= 1")
        self.m = int(m)
        self.eps = eps
        self.pairs: deque[CurvaturePair] = deque(maxlen=self.m)

    def __len__(self):
        return len(self.pairs)

    def update(self, pair: CurvaturePair) -> bool:
        if not pair.acceptable(self.eps):
            return False
        self.pairs.append(pair)
        return True

    def direction(self, f) -> np.ndarray:
        return two_loop_direction(f, self)


class DenseInverseHessian:
    """Explicit symmetric positive-definite inverse-Hessian approximation.

    Starts at the identity. With ``scale_first`` the identity is rescaled to
    ``(p^T q / q^T q) I`` just before the first accepted update.
    """

    def __init__(self, d: int, eps: float = CURVATURE_EPS, scale_first: bool = True):
        self.H = np.eye(d)
        self.eps = eps
        self.scale_first = scale_first
        self.n_updates = 0

    def update(self, pair: CurvaturePair) -> bool:
        if not pair.acceptable(self.eps):
            return False
        if self.scale_first and self.n_updates == 0:
            self.H = initial_scaling([pair]) * np.eye(self.H.shape[0])
        self.H, ok = naq_hessian_update(self.H, pair, self.eps)
        self.n_updates += 1
        return ok

    def direction(self, f) -> np.ndarray:
        return -(self.H @ as_vector(f))


class IdentityHessian:
    """H fixed to the identity; turns the quasi-Newton methods into first-order ones."""

    def update(self, pair: CurvaturePair) -> bool:
        return True

    def direction(self, f) -> np.ndarray:
        return -as_vector(f)


def two_loop_direction(f, buffer) -> np.ndarray:
    """Return ``-H f`` for the inverse Hessian implied by ``buffer``.

    ``buffer`` is a :class:`CurvatureBuffer` or any sequence of pairs ordered
    oldest first. The initial matrix is ``gamma * I`` with ``gamma`` from
    :func:`initial_scaling`. Costs O(m d).
    """
    f = as_vector(f)
    pairs = list(buffer.pairs if isinstance(buffer, CurvatureBuffer) else buffer)
    if pairs and pairs[0].p.size != f.size:
        raise DimensionError(f"pairs have length {pairs[0].p.size}, f has {f.size}")
    g = f.copy()
    rhos = [1.0 / pr.qp for pr in pairs]
    sigmas = [0.0] * len(pairs)
    for i in range(len(pairs) - 1, -1, -1):
        sigmas[i] = rhos[i] * float(pairs[i].p @ g)
        g -= sigmas[i] * pairs[i].q
    g *= initial_scaling(pairs)
    for i, pr in enumerate(pairs):
        beta = rhos[i] * float(pr.q @ g)
        g += (sigmas[i] - beta) * pr.p
    return -g


def dense_from_pairs(pairs, d: int) -> np.ndarray:
    """Fold the pairs (oldest first) through the BFGS update starting at ``gamma * I``."""
    pairs = list(pairs)
    H = initial_scaling(pairs) * np.eye(d)
    for pr in pairs:
        H = rank_updates_bfgs(H, pr.p, pr.q)
    return H
