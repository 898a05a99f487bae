"""Closed-form complexity regimes and asymptotic cost ratios.

These calculators annotate benchmark output: which cost bound applies to a
given rate/constant bundle, and what improvement the modified estimator can
deliver over the standard one as ``eps -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .mlmc import ConstantSet

BETA_GT_GAMMA = "beta_gt_gamma"
BETA_EQ_GAMMA = "beta_eq_gamma"
BETA_LT_GAMMA = "beta_lt_gamma"


@dataclass(frozen=True)
class RegimeClassification:
    """Cost bound ``C = O(eps^-cost_exponent)``, times ``(log eps)^2`` if ``log_squared``."""

    regime: str
    cost_exponent: float
    log_squared: bool
    conditions_met: tuple

    @property
    def all_conditions_met(self) -> bool:
        return all(ok for _, ok in self.conditions_met)


def classify(constants: ConstantSet) -> RegimeClassification:
    c = constants
    a, b, g, bL, gL = c.alpha, c.beta, c.gamma, c.beta_L, c.gamma_L
    if b > g or b == g:
        regime = BETA_GT_GAMMA if b > g else BETA_EQ_GAMMA
        conditions = (
            ("beta_L >= gamma_L", bL >= gL),
            ("alpha >= 1/2 max{gamma, gamma_L}", a >= 0.5 * max(g, gL)),
        )
        return RegimeClassification(regime, 2.0, regime == BETA_EQ_GAMMA, conditions)
    gap = max(g - b, gL - bL)
    conditions = (
        ("alpha >= (max{gamma, gamma_L} - max{gamma-beta, gamma_L-beta_L}) / 2",
         a >= (max(g, gL) - gap) / 2),
    )
    return RegimeClassification(BETA_LT_GAMMA, 2.0 + gap / a, False, conditions)


def ratio_beta_eq_gamma(alpha: float, p: float) -> float:
    """Asymptotic lower bound ``(p/alpha)^2`` on cost(standard)/cost(modified) when beta = gamma."""
    if not p >= alpha > 0:
        raise ValueError("need p >= alpha > 0")
    return (p / alpha) ** 2


def ratio_beta_lt_gamma(M, beta, gamma, c2, c3, c2L, c3L, chat3, chat3L) -> float:
    """Asymptotic lower bound on cost(all order-p)/cost(modified) when beta < gamma.

    The baseline is the estimator using the order ``p`` scheme on every level,
    not the all-order-``alpha`` one.  Valid for ``gamma - beta = gamma_L - beta_L``.
    """
    if not gamma > beta:
        raise ValueError("need gamma > beta")
    if min(c2, c3, c2L, c3L, chat3, chat3L) <= 0:
        raise ValueError("constants must be positive")
    u = M ** ((gamma - beta) / 2) - 1.0
    s = math.sqrt(c2 * c3 / (c2L * c3L))
    bracket = (chat3 * c2 / (chat3L * c2L)
               + chat3 * math.sqrt(c2 * c3L) / (chat3L * math.sqrt(c2L * c3)) * u
               + s * u
               + u * u)
    return M ** (2 * (gamma - beta)) / bracket


def remark_ratio(M, beta, gamma, c2, c3, c2L, c3L) -> float:
    """Compact form of :func:`ratio_beta_lt_gamma` when the leading cost coefficients equal ``c3, c3L``."""
    s = math.sqrt(c2 * c3 / (c2L * c3L))
    return M ** (gamma - beta) * (1.0 - M ** ((beta - gamma) / 2) * (1.0 - s)) ** -2


def improvement_guaranteed(constants: ConstantSet, M: int) -> tuple[bool, tuple]:
    """Whether an eventual strict cost reduction holds for ``beta > gamma``.

    Returns the verdict and the checked conditions as ``(text, bool)`` pairs.
    For ``beta <= gamma`` the verdict is False with an explanatory entry; those
    regimes have explicit ratio bounds instead.
    """
    c = constants
    a, p, b, g, bL, gL = c.alpha, c.p, c.beta, c.gamma, c.beta_L, c.gamma_L
    if not b > g:
        return False, (("beta > gamma", False),)
    chat3, chat3L = c.leading_cost()[1:]
    conds = [
        ("p > alpha", p > a),
        ("beta-gamma <= beta_L-gamma_L", b - g <= bL - gL),
        ("alpha >= gamma/2", a >= g / 2),
        ("p >= 1/2 max{gamma, gamma_L}", p >= 0.5 * max(g, gL)),
        ("p > 1/4 max{beta+gamma, beta-gamma+2 gamma_L}", p > 0.25 * max(b + g, b - g + 2 * gL)),
    ]
    if b - g == bL - gL:
        f = (1.0 - M ** ((g - b) / 2)) ** 2
        conds.append(("c2 c3 > (1-M^((gamma-beta)/2))^2 c2L c3L", c.c2 * c.c3 > f * c.c2L * c.c3L))
        conds.append(("chat3^2 c2/c3 > (1-M^((gamma-beta)/2))^2 chat3L^2 c2L/c3L",
                      chat3**2 * c.c2 / c.c3 > f * chat3L**2 * c.c2L / c.c3L))
    conds = tuple(conds)
    return all(ok for _, ok in conds), conds
