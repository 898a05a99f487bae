"""Convergence studies: weak bias versus step size and level-variance decay."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .mlmc import CHUNK_SIZE, _fit_power_law, run_level
from .noise import RngStreamSpec, sample_increments
from .schemes import EULER_MARUYAMA, SchemeDescriptor, integrate_path
from .sde import Functional, SdeModel


@dataclass(frozen=True)
class WeakErrorPoint:
    h: float
    bias: float
    stderr: float
    n_paths: int

    @property
    def relative_stderr(self) -> float:
        return self.stderr / abs(self.bias) if self.bias else math.inf


def weak_error_study(model: SdeModel, functional: Functional, scheme: SchemeDescriptor,
                     steps: Sequence[int], n_paths: int, exact_value: float,
                     spec: RngStreamSpec = RngStreamSpec(0),
                     exact_terminal: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                     chunk_size: int = CHUNK_SIZE) -> list:
    """Estimate ``E f(Y_T^h) - E f(X_T)`` for each step count in ``steps``.

    With ``exact_terminal`` (mapping the summed Brownian increments ``W_T`` to
    the exact ``X_T``), each sample is ``f(Y_T^h) - f(X_T)`` on the same path,
    which has mean equal to the bias and far smaller variance.
    """
    T = model.horizon
    out = []
    for i, n in enumerate(steps):
        h = T / n
        parts = []
        for c, start in enumerate(range(0, n_paths, chunk_size)):
            k = min(chunk_size, n_paths - start)
            dW, tp = sample_increments(spec.child(i, c), n, model.dim_noise, h, k,
                                       two_point=scheme.needs_two_point)
            y = integrate_path(model, scheme, n, h, dW, tp).terminal_state
            s = np.asarray(functional(y), dtype=float)
            if exact_terminal is not None:
                s = s - functional(exact_terminal(dW.sum(axis=0)))
            parts.append(s)
        s = np.concatenate(parts)
        mean = math.fsum(s) / len(s)
        bias = mean if exact_terminal is not None else mean - exact_value
        se = float(np.std(s, ddof=1)) / math.sqrt(len(s))
        out.append(WeakErrorPoint(h, bias, se, len(s)))
    return out


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return _fit_power_law(np.asarray(x, dtype=float), np.abs(np.asarray(y, dtype=float)))[1]


def gbm_exact_terminal(r: float, sigma: float, x0: float, T: float):
    """``W_T -> x0 exp((r - sigma^2/2) T + sigma W_T)`` for the scalar linear model."""

    def terminal(w):
        return x0 * np.exp((r - 0.5 * sigma**2) * T + sigma * np.asarray(w))

    return terminal


def level_variance_study(model: SdeModel, functional: Functional, levels: Sequence[int],
                         n_samples: int, scheme: SchemeDescriptor = EULER_MARUYAMA, M: int = 2,
                         spec: RngStreamSpec = RngStreamSpec(0), workers=None):
    """Sample variances of same-scheme coupled summands; returns ``(h, var, slope)``."""
    T = model.horizon
    h = [T / M**l for l in levels]
    var = [run_level(model, functional, l, n_samples, scheme, scheme, M, spec.child(l),
                     workers=workers).variance for l in levels]
    return h, var, loglog_slope(h, var)
