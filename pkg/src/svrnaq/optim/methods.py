"""Epoch-driven optimizers.

Every optimizer holds its parameters in ``self.w`` and advances by one epoch
per :meth:`Optimizer.run_epoch` call. An epoch is ``ceil(n / b)`` inner
iterations, each drawing one mini-batch from a shared :class:`BatchSampler`.

Methods and their per-epoch gradient budget (``n`` inner iterations):

===========  =====================================  ==========  ===========
name         update                                  full grads  batch grads
===========  =====================================  ==========  ===========
sgd          ``x -= alpha * g``                      0           n
adam         Adam with bias correction               0           n
svrg         ``x -= alpha * f``                      1           2n
svrg2        ``x += alpha_t * (-H f)``               1           2n
svrnaq       ``v = mu v - alpha_t H f; x += v``      2           2n
onaq         stochastic NAQ, same-batch pairs        0           2n
naq          full-batch NAQ, one step per epoch      2           0
===========  =====================================  ==========  ===========

``svrg2`` and ``svrnaq`` spend their first epoch on a plain SVRG pass at
``svrg_alpha`` to obtain a first curvature pair. ``f`` is the
variance-reduced gradient from :func:`svrg_reduced_gradient`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numerics import DimensionError, as_vector
from .curvature import CurvatureBuffer, CurvaturePair, DenseInverseHessian, IdentityHessian
from .schedule import StepSchedule


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, iteration: int, what: str = "parameters"):
        super().__init__(f"non-finite {what} in epoch {epoch}, inner iteration {iteration}")
        self.epoch = epoch
        self.iteration = iteration


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    full_grad_evals: int
    minibatch_grad_evals: int
    curvature_skips: int
    bootstrap: bool = False


class BatchSampler:
    """Draws mini-batch index arrays uniformly with replacement.

    When ``batch_size >= n`` every draw is the whole dataset, which makes the
    stochastic methods collapse to their full-batch counterparts.
    """

    def __init__(self, gen: np.random.Generator, n: int, batch_size: int):
        if batch_size < 1 or n < 1:
            raise ValueError("need n >= 1 and batch_size >= 1")
        self.gen = gen
        self.n = int(n)
        self.batch_size = int(batch_size)

    @property
    def iterations_per_epoch(self) -> int:
        return math.ceil(self.n / self.batch_size)

    def draw(self) -> np.ndarray:
        if self.batch_size >= self.n:
            return np.arange(self.n)
        return self.gen.integers(0, self.n, size=self.batch_size)


def svrg_reduced_gradient(grad_at_point, grad_at_snapshot, full_grad) -> np.ndarray:
    a, b, c = as_vector(grad_at_point), as_vector(grad_at_snapshot), as_vector(full_grad)
    if not a.shape == b.shape == c.shape:
        raise DimensionError(f"lengths differ: {a.size}, {b.size}, {c.size}")
    return a - b + c


def make_hessian(d: int, memory: int | None):
    """Dense approximation when ``memory`` is None, else an ``m``-pair buffer."""
    return DenseInverseHessian(d) if memory is None else CurvatureBuffer(memory)


class Optimizer:
    name = "base"

    def __init__(self, w0):
        self.w = as_vector(w0).copy()
        self.epoch = 0
        self.curvature_skips = 0
        # optional callable(epoch, t, x) invoked after every inner update
        self.trace = None

    def run_epoch(self, objective, sampler: BatchSampler) -> EpochReport:
        full0, mb0, skip0 = objective.full_grad_evals, objective.minibatch_grad_evals, self.curvature_skips
        self.epoch += 1
        bootstrap = bool(self._epoch(objective, sampler))
        return EpochReport(
            epoch=self.epoch,
            full_grad_evals=objective.full_grad_evals - full0,
            minibatch_grad_evals=objective.minibatch_grad_evals - mb0,
            curvature_skips=self.curvature_skips - skip0,
            bootstrap=bootstrap,
        )

    def _epoch(self, objective, sampler):
        raise NotImplementedError

    def _check(self, x, t, what="parameters"):
        if not np.all(np.isfinite(x)):
            raise DivergenceError(self.epoch, t, what)
        if self.trace is not None and what == "parameters":
            self.trace(self.epoch, t, x)

    def _direction(self, f):
        g = self.hessian.direction(f)
        if self.normalize:
            norm = float(np.linalg.norm(g))
            if norm > 0.0:
                g = g / norm
        return g

    def _update_curvature(self, pair):
        if not self.hessian.update(pair):
            self.curvature_skips += 1


class SGD(Optimizer):
    name = "sgd"

    def __init__(self, w0, alpha=0.025):
        super().__init__(w0)
        self.alpha = alpha

    def _epoch(self, obj, sampler):
        x = self.w
        for t in range(sampler.iterations_per_epoch):
            x = x - self.alpha * obj.batch_gradient(x, sampler.draw())
            self._check(x, t)
        self.w = x


class Adam(Optimizer):
    name = "adam"

    def __init__(self, w0, alpha=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(w0)
        self.alpha, self.beta1, self.beta2, self.eps = alpha, beta1, beta2, eps
        self.m = np.zeros_like(self.w)
        self.v = np.zeros_like(self.w)
        self.step = 0

    def _epoch(self, obj, sampler):
        x = self.w
        for t in range(sampler.iterations_per_epoch):
            g = obj.batch_gradient(x, sampler.draw())
            self.step += 1
            self.m = self.beta1 * self.m + (1 - self.beta1) * g
            self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
            m_hat = self.m / (1 - self.beta1 ** self.step)
            v_hat = self.v / (1 - self.beta2 ** self.step)
            x = x - self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)
            self._check(x, t)
        self.w = x


def _svrg_pass(opt, obj, sampler, snapshot, full_grad, alpha):
    x = snapshot
    for t in range(sampler.iterations_per_epoch):
        idx = sampler.draw()
        f = svrg_reduced_gradient(obj.batch_gradient(x, idx), obj.batch_gradient(snapshot, idx), full_grad)
        x = x - alpha * f
        opt._check(x, t)
    return x


class SVRG(Optimizer):
    """Variance-reduced SGD with the snapshot refreshed once per epoch."""

    name = "svrg"

    def __init__(self, w0, alpha=0.025):
        super().__init__(w0)
        self.alpha = alpha
        self.full_grad = None  # full gradient at the snapshot of the last epoch

    def _epoch(self, obj, sampler):
        self.full_grad = obj.full_gradient(self.w)
        self.w = _svrg_pass(self, obj, sampler, self.w, self.full_grad, self.alpha)


class _Bootstrapped(Optimizer):
    """Shared state for methods whose first epoch is an SVRG pass.

    ``w`` is the current snapshot and ``w_prev`` the previous one.
    """

    def __init__(self, w0, schedule=None, memory=None, svrg_alpha=0.025, hessian=None, normalize=False):
        super().__init__(w0)
        self.normalize = normalize
        self.schedule = schedule or StepSchedule(1.0)
        self.memory = memory
        self.svrg_alpha = svrg_alpha
        self.hessian = hessian if hessian is not None else make_hessian(self.w.size, memory)
        self.w_prev = None
        self.prev_full_grad = None
        self.bootstrap_done = False

    def _bootstrap(self, obj, sampler):
        full = obj.full_gradient(self.w)
        x = _svrg_pass(self, obj, sampler, self.w, full, self.svrg_alpha)
        self.w_prev, self.prev_full_grad, self.w = self.w, full, x
        self.bootstrap_done = True
        return True


class SVRG2(_Bootstrapped):
    """SVRG preconditioned by a quasi-Newton matrix refreshed once per epoch.

    The pair is ``s = w_{k+1} - w_k`` and ``y = Omega_{k+1} - Omega_k``,
    with the previous full gradient kept from the last epoch. Pass
    ``hessian=IdentityHessian()`` to recover plain SVRG steps.
    """

    name = "svrg2"

    def _epoch(self, obj, sampler):
        if not self.bootstrap_done:
            return self._bootstrap(obj, sampler)
        snap = self.w
        full = obj.full_gradient(snap)
        self._update_curvature(CurvaturePair(snap - self.w_prev, full - self.prev_full_grad))
        x = snap
        for t in range(sampler.iterations_per_epoch):
            idx = sampler.draw()
            f = svrg_reduced_gradient(obj.batch_gradient(x, idx), obj.batch_gradient(snap, idx), full)
            x = x + self.schedule(t + 1) * self._direction(f)
            self._check(x, t)
        self.w_prev, self.prev_full_grad, self.w = snap, full, x


class SVRNAQ(_Bootstrapped):
    """Variance-reduced Nesterov-accelerated quasi-Newton method.

    Each epoch: full gradient at the snapshot, one curvature pair taken at
    the epoch-level look-ahead point ``w_prev + mu * V`` (full-batch
    gradient), then ``n`` momentum steps preconditioned by the fixed H.
    ``memory=None`` keeps a dense H; an integer selects the limited-memory
    variant.
    """

    name = "svrnaq"

    def __init__(self, w0, mu=0.95, schedule=None, memory=None, svrg_alpha=0.025, hessian=None,
                 normalize=False):
        super().__init__(w0, schedule, memory, svrg_alpha, hessian, normalize)
        if not 0.0 <= mu < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {mu}")
        self.mu = mu
        self.V = np.zeros_like(self.w)

    def _epoch(self, obj, sampler):
        if not self.bootstrap_done:
            return self._bootstrap(obj, sampler)
        mu = self.mu
        snap = self.w
        full = obj.full_gradient(snap)
        look = self.w_prev + mu * self.V
        self._update_curvature(CurvaturePair(snap - look, full - obj.full_gradient(look)))

        x, v = snap, self.V
        for t in range(sampler.iterations_per_epoch):
            idx = sampler.draw()
            f = svrg_reduced_gradient(obj.batch_gradient(x + mu * v, idx), obj.batch_gradient(snap, idx), full)
            v = mu * v + self.schedule(t + 1) * self._direction(f)
            x = x + v
            self._check(x, t)
        self.V = v
        self.w_prev, self.prev_full_grad, self.w = snap, full, x


class ONAQ(Optimizer):
    """Online NAQ: per-iteration curvature pairs from one mini-batch.

    Both gradients of a pair (at the look-ahead point and at the new iterate)
    use the same sampled rows. The step counter runs across epochs.
    """

    name = "onaq"

    def __init__(self, w0, mu=0.95, schedule=None, memory=None, normalize=False):
        super().__init__(w0)
        self.normalize = normalize
        if not 0.0 <= mu < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {mu}")
        self.mu = mu
        self.schedule = schedule or StepSchedule(1.0)
        self.memory = memory
        self.hessian = make_hessian(self.w.size, memory)
        self.v = np.zeros_like(self.w)
        self.iteration = 0

    def _gradient(self, obj, x, idx):
        return obj.batch_gradient(x, idx)

    def _iterations(self, sampler):
        return sampler.iterations_per_epoch

    def _draw(self, sampler):
        return sampler.draw()

    def _epoch(self, obj, sampler):
        mu = self.mu
        x, v = self.w, self.v
        for t in range(self._iterations(sampler)):
            idx = self._draw(sampler)
            self.iteration += 1
            look = x + mu * v
            g_look = self._gradient(obj, look, idx)
            v = mu * v + self.schedule(self.iteration) * self._direction(g_look)
            x_new = x + v
            self._check(x_new, t)
            g_new = self._gradient(obj, x_new, idx)
            self._check(g_new, t, "gradient")
            self._update_curvature(CurvaturePair(x_new - look, g_new - g_look))
            x = x_new
        self.w, self.v = x, v


class NAQ(ONAQ):
    """Deterministic NAQ on the full training set, one iteration per epoch."""

    name = "naq"

    def _gradient(self, obj, x, idx):
        return obj.full_gradient(x)

    def _iterations(self, sampler):
        return 1

    def _draw(self, sampler):
        return None
