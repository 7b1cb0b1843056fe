"""Classical orthogonal polynomial families under probability-normalized weights.

Five families are supported, each orthogonal with respect to a weight that is
a probability density: probabilists' Hermite (standard normal), Legendre
(uniform on [-1, 1]), Jacobi (scaled beta on [-1, 1]), Laguerre (unit
exponential) and generalized Laguerre (gamma with unit scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, NumericalError, UnsupportedDegreeError

__all__ = [
    "MAX_DEGREE",
    "PolyFamily",
    "hermite",
    "legendre",
    "jacobi",
    "laguerre",
    "generalized_laguerre",
    "evaluate",
    "evaluate_orthonormal",
    "norm_squared",
    "recurrence_coefficients",
    "gauss_rule",
]

MAX_DEGREE = 60

_KINDS = ("hermite", "legendre", "jacobi", "laguerre", "genlaguerre")


@dataclass(frozen=True)
class PolyFamily:
    """One polynomial family; `alpha`/`beta` are the Jacobi or Laguerre shapes."""

    kind: str
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown polynomial family {self.kind!r}")
        if self.kind == "jacobi" and (self.alpha <= -1.0 or self.beta <= -1.0):
            raise ConfigError(
                f"jacobi shapes must exceed -1, got alpha={self.alpha}, beta={self.beta}"
            )
        if self.kind == "genlaguerre" and self.alpha <= -1.0:
            raise ConfigError(f"genlaguerre shape must exceed -1, got alpha={self.alpha}")


def hermite() -> PolyFamily:
    return PolyFamily("hermite")


def legendre() -> PolyFamily:
    return PolyFamily("legendre")


def jacobi(alpha: float, beta: float) -> PolyFamily:
    return PolyFamily("jacobi", alpha=float(alpha), beta=float(beta))


def laguerre() -> PolyFamily:
    return PolyFamily("laguerre")


def generalized_laguerre(alpha: float) -> PolyFamily:
    return PolyFamily("genlaguerre", alpha=float(alpha))


def _check_degree(degree: int) -> int:
    degree = int(degree)
    if degree < 0 or degree > MAX_DEGREE:
        raise UnsupportedDegreeError(
            f"degree {degree} outside supported range [0, {MAX_DEGREE}]"
        )
    return degree


def evaluate(family: PolyFamily, degree: int, x):
    """Evaluate the classical (non-normalized) polynomial by three-term recurrence."""
    degree = _check_degree(degree)
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if degree == 0:
        return p_prev
    a, b = family.alpha, family.beta
    if family.kind == "hermite":
        p = x.copy()
        for k in range(1, degree):
            p, p_prev = x * p - k * p_prev, p
    elif family.kind == "legendre":
        p = x.copy()
        for k in range(1, degree):
            p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    elif family.kind == "jacobi":
        p = 0.5 * (a + b + 2.0) * x + 0.5 * (a - b)
        for k in range(2, degree + 1):
            s = 2 * k + a + b
            c0 = 2.0 * k * (k + a + b) * (s - 2.0)
            c1 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b)
            c2 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s
            p, p_prev = (c1 * p - c2 * p_prev) / c0, p
    elif family.kind == "laguerre":
        p = 1.0 - x
        for k in range(1, degree):
            p, p_prev = ((2 * k + 1 - x) * p - k * p_prev) / (k + 1), p
    else:  # genlaguerre
        p = 1.0 + a - x
        for k in range(1, degree):
            p, p_prev = ((2 * k + 1 + a - x) * p - (k + a) * p_prev) / (k + 1), p
    return p


def norm_squared(family: PolyFamily, degree: int) -> float:
    """Squared norm under the probability-normalized weight (closed form)."""
    n = _check_degree(degree)
    a, b = family.alpha, family.beta
    if family.kind == "hermite":
        return float(math.factorial(n))
    if family.kind == "legendre":
        return 1.0 / (2 * n + 1)
    if family.kind == "jacobi":
        if n == 0:
            return 1.0
        # h_n / h_0 with all gamma arguments positive for n >= 1
        log_ratio = (
            math.lgamma(n + a + 1.0)
            + math.lgamma(n + b + 1.0)
            + math.lgamma(a + b + 2.0)
            - math.lgamma(n + a + b + 1.0)
            - math.lgamma(n + 1.0)
            - math.lgamma(a + 1.0)
            - math.lgamma(b + 1.0)
        )
        return math.exp(log_ratio) / (2 * n + a + b + 1.0)
    if family.kind == "laguerre":
        return 1.0
    # genlaguerre: Gamma(n+a+1) / (n! * Gamma(a+1))
    return math.exp(math.lgamma(n + a + 1.0) - math.lgamma(n + 1.0) - math.lgamma(a + 1.0))


def evaluate_orthonormal(family: PolyFamily, degree: int, x):
    """Evaluate the polynomial scaled to unit norm under the probability weight."""
    return evaluate(family, degree, x) / math.sqrt(norm_squared(family, degree))


def recurrence_coefficients(family: PolyFamily, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Monic recurrence coefficients (a[0..n-1], b[1..n-1]) for p_{k+1} = (x-a_k)p_k - b_k p_{k-1}."""
    if n < 1:
        raise NumericalError(f"need at least one recurrence step, got n={n}")
    al, be = family.alpha, family.beta
    k = np.arange(n, dtype=float)
    if family.kind == "hermite":
        a = np.zeros(n)
        b = k[1:]
    elif family.kind == "legendre":
        a = np.zeros(n)
        b = k[1:] ** 2 / (4.0 * k[1:] ** 2 - 1.0)
    elif family.kind == "jacobi":
        s = 2.0 * k + al + be
        a = np.empty(n)
        a[0] = (be - al) / (al + be + 2.0)
        if n > 1:
            a[1:] = (be**2 - al**2) / (s[1:] * (s[1:] + 2.0))
        b = np.empty(max(n - 1, 0))
        if n > 1:
            b[0] = 4.0 * (al + 1.0) * (be + 1.0) / ((al + be + 2.0) ** 2 * (al + be + 3.0))
            kk = k[2:]
            ss = s[2:]
            b[1:] = (
                4.0
                * kk
                * (kk + al)
                * (kk + be)
                * (kk + al + be)
                / (ss**2 * (ss + 1.0) * (ss - 1.0))
            )
    elif family.kind == "laguerre":
        a = 2.0 * k + 1.0
        b = k[1:] ** 2
    else:  # genlaguerre
        a = 2.0 * k + al + 1.0
        b = k[1:] * (k[1:] + al)
    return a, b


def gauss_rule(family: PolyFamily, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss rule for the family's probability weight.

    Nodes ascend; weights are positive and sum to one. Built from the
    symmetric tridiagonal eigenproblem of the recurrence coefficients.
    """
    if n < 1:
        raise NumericalError(f"gauss rule needs n >= 1, got n={n}")
    a, b = recurrence_coefficients(family, n)
    try:
        nodes, vecs = eigh_tridiagonal(a, np.sqrt(b))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy rarely fails here
        raise NumericalError(f"gauss rule eigensolver failed for n={n}: {exc}") from exc
    weights = vecs[0, :] ** 2
    return nodes, weights
