"""SDE problem data: drift/diffusion systems, functionals and exact references.

All coefficient functions are vectorised over leading axes: a state batch of
shape ``(..., d)`` maps to ``(..., d)``.  Diffusion columns are addressed with
1-based indices ``j = 1..m`` to mirror the usual ``b^j`` notation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class Functional:
    """Scalar functional ``f`` applied to terminal states of shape ``(..., d)``."""

    eval: Callable[[Array], Array]
    label: str

    def __call__(self, x: Array) -> Array:
        return self.eval(x)


@dataclass(frozen=True)
class ExactReference:
    """Closed-form ``E f(X_t)`` as a function of elapsed time ``t``."""

    expectation: Callable[[float], float]
    component_index: Optional[int] = None


@dataclass(frozen=True)
class SdeModel:
    """Autonomous Ito SDE ``dX = a(X) dt + sum_j b^j(X) dB^j``.

    ``references`` maps functional ids to ``(Functional, ExactReference)``
    pairs for the functionals whose expectation is known in closed form.
    """

    dim_state: int
    dim_noise: int
    drift_fn: Callable[[Array], Array]
    diffusion_fn: Callable[[Array, int], Array]
    initial_state: Array
    t_start: float = 0.0
    t_end: float = 1.0
    name: str = ""
    references: Mapping[str, tuple[Functional, ExactReference]] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ValueError("dimensions must be positive")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        x0 = np.asarray(self.initial_state, dtype=float).reshape(self.dim_state)
        x0.setflags(write=False)
        object.__setattr__(self, "initial_state", x0)

    @property
    def horizon(self) -> float:
        return self.t_end - self.t_start

    def drift(self, x: Array) -> Array:
        return self.drift_fn(np.asarray(x, dtype=float))

    def diffusion(self, x: Array, j: int) -> Array:
        if not 1 <= j <= self.dim_noise:
            raise IndexError(f"diffusion column {j} outside 1..{self.dim_noise}")
        return self.diffusion_fn(np.asarray(x, dtype=float), j)

    def reference(self, functional_id: str) -> tuple[Functional, ExactReference]:
        try:
            return self.references[functional_id]
        except KeyError:
            raise KeyError(
                f"model {self.name!r} has no functional {functional_id!r}; "
                f"known: {sorted(self.references)}"
            ) from None

    def exact(self, functional_id: str) -> float:
        _, ref = self.reference(functional_id)
        return float(ref.expectation(self.horizon))


def identity_functional(component: int = 1) -> Functional:
    """``f(x) = x_i`` with a 1-based component index."""
    i = component - 1
    return Functional(lambda x: np.asarray(x)[..., i], f"x{component}")


def square_functional() -> Functional:
    return Functional(lambda x: np.asarray(x)[..., 0] ** 2, "x^2")


def make_gbm(r: float, sigma: float, x0: float, t_end: float = 1.0) -> SdeModel:
    """Scalar geometric Brownian motion ``dX = r X dt + sigma X dB``."""

    def drift(x):
        return r * x

    def diffusion(x, j):
        return sigma * x

    refs = {
        "identity": (
            identity_functional(1),
            ExactReference(lambda t: x0 * np.exp(r * t)),
        ),
        "square": (
            square_functional(),
            ExactReference(lambda t: x0**2 * np.exp((2.0 * r + sigma**2) * t)),
        ),
    }
    return SdeModel(1, 1, drift, diffusion, np.array([x0]), 0.0, t_end, "gbm", refs)


def asinh_cubic(x: Array) -> Array:
    """``u^3 - 6u^2 + 8u`` with ``u = asinh(x) = log(x + sqrt(x^2 + 1))``."""
    u = np.arcsinh(x)
    return u * (u * (u - 6.0) + 8.0)


def make_nonlinear_scalar(t_end: float = 2.0) -> SdeModel:
    """Scalar SDE ``dX = (X/2 + sqrt(X^2+1)) dt + sqrt(X^2+1) dB``, ``X_0 = 0``.

    Its solution is ``sinh(t + B_t)``, hence ``E f(X_t) = t^3 - 3t^2 + 2t`` for
    the bundled functional ``paper_f``.
    """

    def drift(x):
        return 0.5 * x + np.sqrt(x * x + 1.0)

    def diffusion(x, j):
        return np.sqrt(x * x + 1.0)

    f = Functional(lambda x: asinh_cubic(np.asarray(x)[..., 0]), "asinh-cubic")
    ref = ExactReference(lambda t: t**3 - 3.0 * t**2 + 2.0 * t)
    return SdeModel(1, 1, drift, diffusion, np.array([0.0]), 0.0, t_end, "nonlinear",
                    {"paper_f": (f, ref)})


F = Fraction

FOURDIM_DRIFT = (
    (F(243, 154), F(-27, 77), F(23, 154), F(-65, 154)),
    (F(27, 77), F(-243, 154), F(65, 154), F(-23, 154)),
    (F(5, 154), F(-61, 154), F(162, 77), F(-36, 77)),
    (F(61, 154), F(-5, 154), F(36, 77), F(-162, 77)),
)

# (scale, (i, k), shift, direction): scale * sqrt(x_i^2 + x_k^2 + shift) * direction
FOURDIM_DIFFUSION = (
    (F(1, 9), (2, 3), F(2, 23), (F(1, 13), F(1, 14), F(1, 13), F(1, 15))),
    (F(1, 8), (4, 1), F(1, 11), (F(1, 14), F(1, 16), F(1, 16), F(1, 12))),
    (F(1, 12), (1, 2), F(1, 9), (F(1, 6), F(1, 5), F(1, 5), F(1, 6))),
    (F(1, 14), (3, 4), F(3, 29), (F(1, 8), F(1, 9), F(1, 8), F(1, 9))),
    (F(1, 10), (1, 3), F(1, 13), (F(1, 11), F(1, 15), F(1, 13), F(1, 11))),
    (F(1, 11), (2, 4), F(2, 25), (F(1, 12), F(1, 13), F(1, 16), F(1, 13))),
)

FOURDIM_X0 = (F(1, 8), F(1, 8), F(1), F(1, 8))


def make_four_dim(t_end: float = 1.0) -> SdeModel:
    """Linear-drift SDE with ``d=4`` and six non-commutative noise columns.

    ``x0`` is an eigenvector of the drift matrix for eigenvalue 2, so
    ``E X_t^i = x0^i exp(2t)``.
    """
    A = np.array([[float(v) for v in row] for row in FOURDIM_DRIFT])
    cols = [
        (float(s), (i - 1, k - 1), float(c), np.array([float(v) for v in vec]))
        for s, (i, k), c, vec in FOURDIM_DIFFUSION
    ]
    x0 = np.array([float(v) for v in FOURDIM_X0])

    def drift(x):
        return x @ A.T

    def diffusion(x, j):
        s, (i, k), c, vec = cols[j - 1]
        amp = s * np.sqrt(x[..., i] ** 2 + x[..., k] ** 2 + c)
        return amp[..., None] * vec

    refs = {}
    for i in range(1, 5):
        x0i = x0[i - 1]
        refs[f"component_{i}"] = (
            identity_functional(i),
            ExactReference(lambda t, x0i=x0i: x0i * np.exp(2.0 * t), component_index=i),
        )
    return SdeModel(4, 6, drift, diffusion, x0, 0.0, t_end, "fourdim", refs)


# parameters of the scalar linear test problem
GBM_R = 1.5
GBM_SIGMA = 0.1
GBM_X0 = 0.1

MODEL_BUILDERS: dict[str, Callable[[], SdeModel]] = {
    "gbm": lambda: make_gbm(GBM_R, GBM_SIGMA, GBM_X0),
    "nonlinear": make_nonlinear_scalar,
    "fourdim": make_four_dim,
}

DEFAULT_FUNCTIONAL = {"gbm": "identity", "nonlinear": "paper_f", "fourdim": "component_1"}


def get_model(model_id: str) -> SdeModel:
    try:
        return MODEL_BUILDERS[model_id]()
    except KeyError:
        raise KeyError(f"unknown model {model_id!r}; choose from {sorted(MODEL_BUILDERS)}") from None
