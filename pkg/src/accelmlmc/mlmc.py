"""Multi-level Monte Carlo planning and estimation.

Two estimators are supported:

* ``standard``: one weak order ``alpha`` scheme on every level, number of
  levels from the order ``alpha`` bias constant.
* ``modified``: the order ``alpha`` scheme on levels ``0..L-1`` and an order
  ``p`` scheme for the fine path of the top level only, with ``L`` planned from
  the order ``p`` bias constant.  Fewer levels are needed for the same bias.

Sample sizes use the closed-form optimum of the cost under the variance budget
``(1-q) eps^2``; ceilings are applied after the real-valued optimum.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .noise import RngStreamSpec, sample_coupled, sample_increments
from .schemes import (EULER_MARUYAMA, RI6, PathDivergenceError, SchemeDescriptor,
                      integrate_path)
from .sde import Functional, SdeModel

log = logging.getLogger(__name__)

DEFAULT_Q = 0.5
CHUNK_SIZE = 4096
PILOT_STREAM = 1_000_003
# absorbs log/ratio rounding when the level formula lands on an integer
_CEIL_RTOL = 1e-9


class DegenerateVarianceError(ValueError):
    """Pilot variances vanished, so no decay rate can be regressed.

    ``fallback`` holds the constants that could be estimated, with the
    variance constants replaced by a negligible positive value; planning with
    it yields ``N_l = 1`` on every level.
    """

    def __init__(self, message: str, fallback: "ConstantSet"):
        super().__init__(message)
        self.fallback = fallback


@dataclass(frozen=True)
class ConstantSet:
    """Rates and constants of the bias, variance and cost bounds.

    ``c1`` bounds the bias of the order ``alpha`` scheme, ``c1_p`` that of the
    order ``p`` scheme.  The ``*L`` constants describe the top level of the
    modified estimator.  ``poly_cost`` lists ``((c30_i, c3_i, c3L_i), delta_i)``
    terms of an expanded cost model; a term with ``delta == 0`` replaces the
    leading coefficients.
    """

    alpha: float
    p: float
    beta: float
    beta_L: float
    gamma: float
    gamma_L: float
    c1: float
    c20: float
    c2: float
    c2L: float
    c30: float
    c3: float
    c3L: float
    c1_p: Optional[float] = None
    poly_cost: tuple = ()
    source: str = "explicit"

    def __post_init__(self):
        positive = ("alpha", "p", "beta", "beta_L", "c1", "c20", "c2", "c2L", "c30", "c3", "c3L")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.c1_p is not None and not self.c1_p > 0:
            raise ValueError("c1_p must be positive")
        if self.gamma < 1 or self.gamma_L < 1:
            raise ValueError("cost exponents gamma, gamma_L must be >= 1")
        terms = tuple((tuple(float(c) for c in coeffs), float(delta))
                      for coeffs, delta in self.poly_cost)
        for coeffs, delta in terms:
            if len(coeffs) != 3 or min(coeffs) < 0 or delta < 0:
                raise ValueError(f"bad cost term {coeffs!r}, {delta!r}")
            if self.gamma - delta < 1 or self.gamma_L - delta < 1:
                raise ValueError("cost terms need gamma - delta >= 1 and gamma_L - delta >= 1")
        object.__setattr__(self, "poly_cost", terms)

    @property
    def bias_constant_p(self) -> float:
        return self.c1 if self.c1_p is None else self.c1_p

    def standard(self) -> "ConstantSet":
        """Constants of the all-coarse estimator: top level behaves like the interior."""
        return replace(self, beta_L=self.beta, gamma_L=self.gamma, c2L=self.c2, c3L=self.c3,
                       p=self.alpha, c1_p=self.c1)

    def leading_cost(self) -> tuple[float, float, float]:
        for coeffs, delta in self.poly_cost:
            if delta == 0:
                return coeffs
        return (self.c30, self.c3, self.c3L)

    def level_cost(self, kind: str, h: float, T: float) -> float:
        """Expanded cost model ``sum_i chat_i T h^(-gamma + delta_i)`` for one sample."""
        idx = {"zero": 0, "interior": 1, "top": 2}[kind]
        gamma = self.gamma_L if kind == "top" else self.gamma
        total = self.leading_cost()[idx] * T * h ** (-gamma)
        for coeffs, delta in self.poly_cost:
            if delta > 0:
                total += coeffs[idx] * T * h ** (-gamma + delta)
        return total


@dataclass
class LevelPlan:
    L: int
    M: int
    q: float
    T: float
    h: list
    N: list
    kappa: float
    N_real: list = field(default_factory=list)


@dataclass
class LevelResult:
    mean: float
    variance: Optional[float]
    cost: int
    n_samples: int


@dataclass
class EstimatorReport:
    estimate: float
    level_means: list
    level_variances: list
    level_costs: list
    total_cost: int
    plan: LevelPlan
    mode: str = "standard"
    constants_source: str = "explicit"


def default_workers() -> int:
    """Worker threads from ``MLMC_WORKERS``; defaults to all available CPUs."""
    env = os.environ.get("MLMC_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def compute_levels(q: float, c1: float, eps: float, T: float, order: float, M: int) -> int:
    """``ceil(log(q^-1/2 c1 eps^-1 T^order) / (order log M))``, at least 1."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if c1 <= 0 or eps <= 0 or order <= 0 or T <= 0:
        raise ValueError("c1, eps, T and order must be positive")
    if M < 2:
        raise ValueError("refinement factor must be at least 2")
    x = math.log(c1 * T**order / (math.sqrt(q) * eps)) / (order * math.log(M))
    L = math.ceil(x - _CEIL_RTOL * max(1.0, abs(x)))
    return max(1, L)


def compute_kappa(constants: ConstantSet, h_L: float, M: int, T: float, L: int) -> float:
    c = constants
    if c.beta == c.gamma:
        return (math.sqrt(c.c20 * c.c30)
                + (L - 1) * math.sqrt(c.c2 * c.c3)
                + math.sqrt(c.c2L * c.c3L) * h_L ** ((c.beta_L - c.gamma_L) / 2))
    x = (c.beta - c.gamma) / 2
    denom = 1.0 - M ** (-x)
    if denom == 0:
        raise ValueError("degenerate geometric sum: M^((gamma-beta)/2) == 1")
    return (math.sqrt(c.c20 * c.c30) * T**x
            + math.sqrt(c.c2 * c.c3) * ((T / M) ** x - h_L**x) / denom
            + math.sqrt(c.c2L * c.c3L) * h_L ** ((c.beta_L - c.gamma_L) / 2))


def compute_sample_sizes(eps: float, q: float, constants: ConstantSet, plan: LevelPlan,
                         real: bool = False) -> list:
    """Per-level sample counts ``N_0..N_L`` for the planned levels.

    With ``real=True`` the pre-ceiling optimum is returned.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    c = constants
    scale = plan.kappa / ((1.0 - q) * eps**2)
    out = []
    for l, h in enumerate(plan.h):
        if l == 0:
            n = h ** ((c.beta + c.gamma) / 2) * math.sqrt(c.c20 / c.c30)
        elif l == plan.L:
            n = h ** ((c.beta_L + c.gamma_L) / 2) * math.sqrt(c.c2L / c.c3L)
        else:
            n = h ** ((c.beta + c.gamma) / 2) * math.sqrt(c.c2 / c.c3)
        out.append(n * scale)
    if real:
        return out
    return [max(1, math.ceil(n)) for n in out]


def optimal_q(beta: float, gamma: float, p: float) -> float:
    """Asymptotically cost-minimal bias share ``(gamma-beta)/(gamma-beta+2p)``."""
    if not gamma > beta:
        raise ValueError("optimal q only applies when gamma > beta")
    if p <= 0:
        raise ValueError("p must be positive")
    return (gamma - beta) / (gamma - beta + 2.0 * p)


def choose_q(policy, constants: ConstantSet, order: float) -> float:
    """Resolve a q policy: ``"default"``, ``"optimal"`` or a number in (0, 1)."""
    if policy in (None, "default"):
        return DEFAULT_Q
    if policy == "optimal":
        try:
            return optimal_q(constants.beta, constants.gamma, order)
        except ValueError:
            return DEFAULT_Q
    q = float(policy)
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return q


def plan_levels(eps: float, constants: ConstantSet, T: float, M: int, q: float,
                order: float, c1: float) -> LevelPlan:
    L = compute_levels(q, c1, eps, T, order, M)
    h = [T / M**l for l in range(L + 1)]
    kappa = compute_kappa(constants, h[L], M, T, L)
    plan = LevelPlan(L, M, q, T, h, [], kappa)
    plan.N_real = compute_sample_sizes(eps, q, constants, plan, real=True)
    plan.N = [max(1, math.ceil(n)) for n in plan.N_real]
    return plan


def _level_chunk(model, functional, level, n, coarse_scheme, fine_scheme, M, spec):
    T = model.horizon
    m = model.dim_noise
    if level == 0:
        dW, tp = sample_increments(spec, 1, m, T, n, two_point=fine_scheme.needs_two_point)
        res = integrate_path(model, fine_scheme, 1, T, dW, tp)
        return np.asarray(functional(res.terminal_state), dtype=float), res.cost
    n_fine = M**level
    h_fine = T / n_fine
    inc = sample_coupled(spec, n_fine, m, h_fine, M, n,
                         two_point=fine_scheme.needs_two_point,
                         coarse_two_point=coarse_scheme.needs_two_point)
    fine = integrate_path(model, fine_scheme, n_fine, h_fine, inc.fine, inc.two_point)
    coarse = integrate_path(model, coarse_scheme, n_fine // M, inc.h_coarse, inc.coarse,
                            inc.coarse_two_point)
    summand = functional(fine.terminal_state) - functional(coarse.terminal_state)
    return np.asarray(summand, dtype=float), fine.cost + coarse.cost


def level_summands(model: SdeModel, functional: Functional, level: int, n_samples: int,
                   coarse_scheme: SchemeDescriptor, fine_scheme: SchemeDescriptor, M: int,
                   spec: RngStreamSpec, chunk_size: int = CHUNK_SIZE,
                   workers: Optional[int] = None):
    """All ``n_samples`` summands of one level in sample order, plus metered cost.

    Samples ``[c*chunk_size, (c+1)*chunk_size)`` draw from stream path
    ``spec.stream_path + (c,)``, so output is independent of ``workers``.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    starts = list(range(0, n_samples, chunk_size))

    def work(c):
        start = starts[c]
        n = min(chunk_size, n_samples - start)
        try:
            return _level_chunk(model, functional, level, n, coarse_scheme, fine_scheme, M,
                                spec.child(c))
        except PathDivergenceError as exc:
            sample = start + (exc.sample or 0)
            raise PathDivergenceError(f"level {level}, sample {sample}: {exc}",
                                      step=exc.step, level=level, sample=sample) from exc

    workers = default_workers() if workers is None else workers
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(c) for c in range(len(starts))]
    summands = np.concatenate([p[0] for p in parts])
    return summands, sum(int(p[1]) for p in parts)


def summarize_summands(summands: np.ndarray) -> tuple[float, Optional[float]]:
    """Mean and unbiased variance by exactly rounded summation; variance is None for N=1."""
    n = len(summands)
    mean = math.fsum(summands) / n
    if n < 2:
        return mean, None
    dev = summands - mean
    return mean, math.fsum(dev * dev) / (n - 1)


def run_level(model: SdeModel, functional: Functional, level: int, n_samples: int,
              coarse_scheme: SchemeDescriptor = EULER_MARUYAMA,
              fine_scheme: Optional[SchemeDescriptor] = None, M: int = 2,
              spec: RngStreamSpec = RngStreamSpec(0), chunk_size: int = CHUNK_SIZE,
              workers: Optional[int] = None) -> LevelResult:
    """Mean, sample variance and metered cost of one level's summands.

    Level 0 samples ``f(Y^0)`` with ``fine_scheme``; level ``l >= 1`` samples
    ``f(Y^l) - f(Y^{l-1})`` with ``fine_scheme`` on step ``T/M^l`` and
    ``coarse_scheme`` on step ``T/M^(l-1)`` driven by the same increments.
    """
    fine_scheme = coarse_scheme if fine_scheme is None else fine_scheme
    summands, cost = level_summands(model, functional, level, n_samples, coarse_scheme,
                                    fine_scheme, M, spec, chunk_size, workers)
    mean, var = summarize_summands(summands)
    return LevelResult(mean, var, cost, n_samples)


def mlmc_estimate(model: SdeModel, functional: Functional, eps: float, constants: ConstantSet,
                  mode: str = "standard", spec: RngStreamSpec = RngStreamSpec(0), *,
                  M: int = 2, q=None, base_scheme: SchemeDescriptor = EULER_MARUYAMA,
                  top_scheme: SchemeDescriptor = RI6, chunk_size: int = CHUNK_SIZE,
                  workers: Optional[int] = None) -> EstimatorReport:
    """Plan and run the standard or modified MLMC estimator for accuracy ``eps``.

    ``q`` is a number in (0, 1) or a policy name accepted by :func:`choose_q`.
    Level ``l`` draws its randomness from ``spec.child(l)``.
    """
    if mode == "standard":
        cs, order, c1, top = constants.standard(), constants.alpha, constants.c1, base_scheme
    elif mode == "modified":
        cs, order, c1, top = constants, constants.p, constants.bias_constant_p, top_scheme
    else:
        raise ValueError(f"unknown mode {mode!r}")
    q = choose_q(q, constants, order)
    T = model.horizon
    plan = plan_levels(eps, cs, T, M, q, order, c1)
    log.debug("mode=%s eps=%g L=%d N=%s", mode, eps, plan.L, plan.N)

    means, variances, costs = [], [], []
    for l in range(plan.L + 1):
        fine = top if l == plan.L else base_scheme
        res = run_level(model, functional, l, plan.N[l], base_scheme, fine, M, spec.child(l),
                        chunk_size, workers)
        means.append(res.mean)
        variances.append(res.variance)
        costs.append(res.cost)
    return EstimatorReport(math.fsum(means), means, variances, costs, sum(costs), plan, mode,
                           constants.source)


def _fit_power_law(h: Sequence[float], v: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of ``log v = log c + rate log h``; returns ``(c, rate)``."""
    rate, logc = np.polyfit(np.log(h), np.log(v), 1)
    return float(np.exp(logc)), float(rate)


def _fit_bias_constant(h, means, variances, n, order, M) -> float:
    """Bias constant from coupled same-scheme level means.

    ``|E summand_l| ~ c (M^order - 1) h_l^order``; the largest per-level
    estimate among the given levels whose mean exceeds three standard errors
    is returned.  Coarse levels are pre-asymptotic and under-read ``c``, so
    callers should pass the deepest pilot levels only.  Without any
    significant level the three-standard-error bound is used instead.
    """
    h = np.asarray(h)
    means = np.abs(np.asarray(means))
    se = np.sqrt(np.asarray(variances) / n)
    factor = M**order - 1.0
    ok = means > 3.0 * se
    if ok.any():
        return float(np.max(means[ok] / h[ok] ** order)) / factor
    bound = float(np.max((means + 3.0 * se) / h**order)) / factor
    return bound if bound > 0 else 1e-300


def pilot_estimate_constants(model: SdeModel, functional: Functional,
                             coarse_scheme: SchemeDescriptor = EULER_MARUYAMA,
                             fine_scheme: SchemeDescriptor = RI6, pilot_levels: int = 6,
                             pilot_N: int = 20_000,
                             spec: RngStreamSpec = RngStreamSpec(0, (PILOT_STREAM,)),
                             M: int = 2, workers: Optional[int] = None) -> ConstantSet:
    """Estimate the rate/constant bundle from coupled pilot samples on levels ``0..pilot_levels``.

    Variance rates come from log-log regression over levels ``2..pilot_levels``
    (coarse/coarse for ``beta, c2``; fine-on-top for ``beta_L, c2L``).  Bias
    constants come from coupled same-scheme level means on the upper half of
    the pilot levels.  Cost constants are read off the metered per-sample
    costs, which grow like ``h^-1``.
    """
    if pilot_levels < 3:
        raise ValueError("pilot needs at least 3 levels")
    if pilot_N < 1000:
        raise ValueError("pilot needs at least 1000 samples per level")
    T = model.horizon
    levels = list(range(1, pilot_levels + 1))
    h = [T / M**l for l in levels]

    def stats(l, coarse, fine, tag):
        s, cost = level_summands(model, functional, l, pilot_N, coarse, fine, M,
                                 spec.child(tag, l), workers=workers)
        mean, var = summarize_summands(s)
        return mean, var, cost / pilot_N

    _, v0, cost0 = stats(0, coarse_scheme, coarse_scheme, 0)
    cc = [stats(l, coarse_scheme, coarse_scheme, 0) for l in levels]
    fc = [stats(l, coarse_scheme, fine_scheme, 1) for l in levels]
    ff = [stats(l, fine_scheme, fine_scheme, 2) for l in levels]

    deep = slice(pilot_levels // 2, None)
    c1 = _fit_bias_constant(h[deep], [s[0] for s in cc[deep]], [s[1] for s in cc[deep]],
                            pilot_N, coarse_scheme.weak_order, M)
    c1_p = _fit_bias_constant(h[deep], [s[0] for s in ff[deep]], [s[1] for s in ff[deep]],
                              pilot_N, fine_scheme.weak_order, M)
    # per-sample cost = c3 * T / h with gamma = 1
    c30 = cost0
    c3 = cc[-1][2] * h[-1] / T
    c3L = fc[-1][2] * h[-1] / T

    tiny = 1e-300
    variances = [v0] + [s[1] for s in cc] + [s[1] for s in fc]
    if min(variances) <= tiny:
        fallback = ConstantSet(coarse_scheme.weak_order, fine_scheme.weak_order, 1.0, 1.0, 1.0,
                               1.0, c1, tiny, tiny, tiny, c30, c3, c3L, c1_p=c1_p,
                               source="pilot")
        raise DegenerateVarianceError("pilot variances vanish; use the variance-zero shortcut",
                                      fallback)
    c2, beta = _fit_power_law(h[1:], [s[1] for s in cc[1:]])
    c2L, beta_L = _fit_power_law(h[1:], [s[1] for s in fc[1:]])
    beta = max(beta, 1e-6)
    beta_L = max(beta_L, 1e-6)
    c20 = v0 / T**beta
    return ConstantSet(coarse_scheme.weak_order, fine_scheme.weak_order, beta, beta_L, 1.0, 1.0,
                       c1, c20, c2, c2L, c30, c3, c3L, c1_p=c1_p, source="pilot")
