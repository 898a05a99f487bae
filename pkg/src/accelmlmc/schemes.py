"""Weak approximation schemes with evaluation-count metering.

Cost convention: one drift evaluation or one diffusion-column evaluation on a
single path costs ``d`` units.  An Euler-Maruyama step therefore costs
``d(1+m)`` and an RI6 step ``d(2+5m)`` (``b^j`` at the current state is
evaluated once and reused by every stage).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .sde import SdeModel


class PathDivergenceError(ArithmeticError):
    """A simulated state became non-finite."""

    def __init__(self, message: str, step: Optional[int] = None,
                 level: Optional[int] = None, sample: Optional[int] = None):
        super().__init__(message)
        self.step = step
        self.level = level
        self.sample = sample


@dataclass(frozen=True)
class CostWeights:
    """Units charged per drift and per diffusion-column evaluation, times ``d``."""

    drift: int = 1
    diffusion: int = 1


class _MeteredModel:
    """Proxy counting evaluations, each weighted by the batch size."""

    def __init__(self, model: SdeModel, weights: CostWeights = CostWeights()):
        self.model = model
        self.weights = weights
        self.dim_state = model.dim_state
        self.dim_noise = model.dim_noise
        self.units = 0

    @staticmethod
    def _batch(x) -> int:
        shape = np.shape(x)
        return int(np.prod(shape[:-1])) if len(shape) > 1 else 1

    def drift(self, x):
        self.units += self.weights.drift * self.dim_state * self._batch(x)
        return self.model.drift(x)

    def diffusion(self, x, j):
        self.units += self.weights.diffusion * self.dim_state * self._batch(x)
        return self.model.diffusion(x, j)


def em_step(model, y, h, dW):
    """``Y + a(Y) h + sum_j b^j(Y) I_j``; ``dW`` has the ``m`` increments last."""
    y = np.asarray(y, dtype=float)
    dW = np.asarray(dW, dtype=float)
    out = y + model.drift(y) * h
    for j in range(1, model.dim_noise + 1):
        out = out + model.diffusion(y, j) * dW[..., j - 1, None]
    return out


def ri6_step(model, y, h, dW, two_point):
    """One step of the explicit weak order two stochastic Runge-Kutta scheme RI6."""
    y = np.asarray(y, dtype=float)
    dW = np.asarray(dW, dtype=float)
    m = model.dim_noise
    sqh = np.sqrt(h)

    a0 = model.drift(y)
    B = np.stack([model.diffusion(y, j) for j in range(1, m + 1)], axis=-1)  # (..., d, m)
    base = y + a0 * h
    ups = base + np.einsum("...dj,...j->...d", B, dW)
    out = y + 0.5 * (a0 + model.drift(ups)) * h

    # shifts[..., :, k] = sum_{j != k} b^j(y) I_(k,j) / sqrt(h), expanded as
    # I_k/2 sum_{j!=k} b^j I_j - sqrt(h)/2 Ĩ_k sum_{j>k} b^j + sqrt(h)/2 sum_{j<k} b^j Ĩ_j
    tp = np.asarray(two_point, dtype=float)
    BI = B * dW[..., None, :]
    cross = 0.5 * dW[..., None, :] * (BI.sum(axis=-1, keepdims=True) - BI)
    after = np.cumsum(B[..., ::-1], axis=-1)[..., ::-1] - B
    BT = B * tp[..., None, :]
    before = np.cumsum(BT, axis=-1) - BT
    shifts = (cross + 0.5 * sqh * (before - tp[..., None, :] * after)) / sqh
    diag = 0.5 * (dW * dW - h)

    for k in range(1, m + 1):
        bk = B[..., k - 1]
        Ik = dW[..., k - 1, None]
        bp = model.diffusion(base + bk * sqh, k)
        bm = model.diffusion(base - bk * sqh, k)
        shift = shifts[..., k - 1]
        bhp = model.diffusion(y + shift, k)
        bhm = model.diffusion(y - shift, k)
        ikk = diag[..., k - 1, None]
        out = (out
               + 0.5 * (bp - bm) * (ikk / sqh)
               + (0.5 * bk + 0.25 * bp + 0.25 * bm) * Ik
               + 0.5 * (bhp - bhm) * sqh
               - (0.5 * bk - 0.25 * bhp - 0.25 * bhm) * Ik)
    return out


@dataclass(frozen=True)
class SchemeDescriptor:
    name: str
    weak_order: float
    step: Callable
    drift_evals: int
    diffusion_evals_per_column: int
    needs_two_point: bool = False

    def cost_per_step(self, d: int, m: int, weights: CostWeights = CostWeights()) -> int:
        return d * (weights.drift * self.drift_evals
                    + weights.diffusion * self.diffusion_evals_per_column * m)


EULER_MARUYAMA = SchemeDescriptor("euler-maruyama", 1, em_step, 1, 1)
RI6 = SchemeDescriptor("ri6", 2, ri6_step, 2, 5, needs_two_point=True)

SCHEMES = {"em": EULER_MARUYAMA, "ri6": RI6}


@dataclass(frozen=True)
class PathResult:
    """Terminal states of a batch of paths and their total metered cost."""

    terminal_state: np.ndarray
    cost: int
    steps_taken: int


def integrate_path(model: SdeModel, scheme: SchemeDescriptor, grid_steps: int, h: float,
                   increments, two_point=None, x0=None,
                   weights: CostWeights = CostWeights()) -> PathResult:
    """Fold ``scheme.step`` over ``grid_steps`` steps of size ``h``.

    ``increments`` is indexed by step first; each row holds the ``m``
    increments of that step (optionally for a batch of paths, shape
    ``(n_paths, m)``).  ``two_point`` follows the same layout and is required
    by RI6 only.  The start state is broadcast to the batch.
    """
    if grid_steps and h <= 0:
        raise ValueError("step size must be positive")
    if scheme.needs_two_point and grid_steps and two_point is None:
        raise ValueError(f"scheme {scheme.name} needs two-point draws")
    start = model.initial_state if x0 is None else np.asarray(x0, dtype=float)
    if grid_steps:
        batch = np.shape(increments[0])[:-1]
        y = np.broadcast_to(start, batch + (model.dim_state,)).copy()
    else:
        y = start.copy()
    metered = _MeteredModel(model, weights)
    for n in range(grid_steps):
        if scheme.needs_two_point:
            y = scheme.step(metered, y, h, increments[n], two_point[n])
        else:
            y = scheme.step(metered, y, h, increments[n])
        if not np.all(np.isfinite(y)):
            bad = np.argwhere(~np.isfinite(np.reshape(y, (-1, model.dim_state))))[0][0]
            raise PathDivergenceError(
                f"{scheme.name}: non-finite state at step {n} (path {bad})", step=n, sample=int(bad))
    return PathResult(y, metered.units, grid_steps)
