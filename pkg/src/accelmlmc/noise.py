"""Driving noise for coupled level simulation.

Every draw comes from a Philox generator keyed by ``(master_seed, stream_path)``
so that results do not depend on which worker produced a batch or in what
order.  Brownian increments and two-point variables live on separate lanes of
the same path: switching the two-point variables on or off never shifts the
Gaussian draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

LANE_BROWNIAN = 0
LANE_TWO_POINT = 1
LANE_COARSE_TWO_POINT = 2


@dataclass(frozen=True)
class RngStreamSpec:
    master_seed: int
    stream_path: tuple[int, ...] = ()

    def child(self, *indices: int) -> "RngStreamSpec":
        return RngStreamSpec(self.master_seed, self.stream_path + tuple(int(i) for i in indices))

    def generator(self, lane: int = LANE_BROWNIAN) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_path + (lane,))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class CoupledIncrements:
    """Fine Brownian increments, their coarse aggregates and two-point draws.

    Arrays are time-major: ``fine[n]`` is the ``(n_paths, m)`` block of
    increments over fine step ``n``.
    """

    h_fine: float
    n_fine: int
    refinement: int
    fine: np.ndarray
    coarse: np.ndarray
    two_point: Optional[np.ndarray] = None
    coarse_two_point: Optional[np.ndarray] = None

    @property
    def h_coarse(self) -> float:
        return self.h_fine * self.refinement


def sample_increments(spec: RngStreamSpec, n_steps: int, m: int, h: float,
                      n_paths: int = 1, two_point: bool = False):
    """Independent ``N(0, h)`` increments of shape ``(n_steps, n_paths, m)``.

    Returns ``(increments, two_point_draws)``; the second entry is ``None``
    unless requested.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    sqh = np.sqrt(h)
    dW = spec.generator(LANE_BROWNIAN).standard_normal((n_steps, n_paths, m)) * sqh
    tp = sample_two_point(spec, n_steps, m, h, n_paths) if two_point else None
    return dW, tp


def sample_two_point(spec: RngStreamSpec, n_steps: int, m: int, h: float,
                     n_paths: int = 1, lane: int = LANE_TWO_POINT) -> np.ndarray:
    """Symmetric draws from ``{+sqrt(h), -sqrt(h)}``."""
    signs = spec.generator(lane).integers(0, 2, size=(n_steps, n_paths, m), dtype=np.int8)
    return np.where(signs == 1, np.sqrt(h), -np.sqrt(h))


def aggregate(fine: np.ndarray, M: int) -> np.ndarray:
    """Sum consecutive blocks of ``M`` fine increments in ascending index order."""
    n_fine = fine.shape[0]
    if n_fine % M:
        raise ValueError(f"{n_fine} fine steps not divisible by refinement {M}")
    blocks = fine.reshape((n_fine // M, M) + fine.shape[1:])
    coarse = blocks[:, 0].copy()
    for r in range(1, M):
        coarse += blocks[:, r]
    return coarse


def sample_coupled(spec: RngStreamSpec, n_fine: int, m: int, h_fine: float, M: int,
                   n_paths: int = 1, two_point: bool = True,
                   coarse_two_point: bool = False) -> CoupledIncrements:
    if M < 2:
        raise ValueError("refinement factor must be at least 2")
    if h_fine <= 0:
        raise ValueError("step size must be positive")
    if n_fine % M:
        raise ValueError(f"{n_fine} fine steps not divisible by refinement {M}")
    fine, tp = sample_increments(spec, n_fine, m, h_fine, n_paths, two_point)
    ctp = None
    if coarse_two_point:
        ctp = sample_two_point(spec, n_fine // M, m, h_fine * M, n_paths, LANE_COARSE_TWO_POINT)
    return CoupledIncrements(h_fine, n_fine, M, fine, aggregate(fine, M), tp, ctp)


def ihat(I_n: np.ndarray, two_point_n: np.ndarray, h: float, k: int, j: int):
    """Surrogate ``I_(k,j)`` for the iterated integrals of one step.

    ``I_n`` and ``two_point_n`` hold the ``m`` increments of one step along
    their last axis; ``k`` and ``j`` are 1-based.
    """
    I_n = np.asarray(I_n, dtype=float)
    m = I_n.shape[-1]
    if not (1 <= k <= m and 1 <= j <= m):
        raise IndexError(f"indices ({k}, {j}) outside 1..{m}")
    Ik = I_n[..., k - 1]
    if k == j:
        return 0.5 * (Ik * Ik - h)
    Ij = I_n[..., j - 1]
    two_point_n = np.asarray(two_point_n, dtype=float)
    if k < j:
        return 0.5 * (Ik * Ij - np.sqrt(h) * two_point_n[..., k - 1])
    return 0.5 * (Ik * Ij + np.sqrt(h) * two_point_n[..., j - 1])

