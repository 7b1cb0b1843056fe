"""Sequential Monte Carlo estimation with a dynamic stopping rule.

Sampling stops once the width of the mean's confidence interval, relative to
the running mean, drops to the requested tolerance. Below 30 samples the
interval uses Student-t critical values; from 30 on, standard normal ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigError, DegenerateMeanError, DomainError, EvaluationError
from .inputspace import ProblemSpec, sample_germ, to_physical

__all__ = [
    "T_TO_Z_SWITCH",
    "McConfig",
    "McResult",
    "z_quantile",
    "t_quantile",
    "stopping_quantile",
    "run_mc",
]

T_TO_Z_SWITCH = 30
_MEAN_FLOOR = 1e-300


@dataclass(frozen=True)
class McConfig:
    tolerance: float = 0.05
    alpha: float = 0.05
    min_samples: int = 10
    max_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (self.tolerance > 0.0):
            raise ConfigError(f"mc.tolerance must be > 0, got {self.tolerance}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"mc.alpha must lie in (0, 1), got {self.alpha}")
        if self.min_samples < 2:
            raise ConfigError(f"mc.min_samples must be >= 2, got {self.min_samples}")
        if self.max_samples < self.min_samples:
            raise ConfigError(
                f"mc.max_samples must be >= min_samples, got "
                f"{self.max_samples} < {self.min_samples}"
            )


@dataclass(frozen=True)
class McResult:
    mean: float
    relative_error: float
    samples_used: int
    converged: bool
    trace: tuple[tuple[int, float], ...]


def z_quantile(p: float) -> float:
    """Standard normal quantile; absolute error below 1e-9."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"z_quantile argument must lie in (0, 1), got {p}")
    return float(special.ndtri(p))


def t_quantile(p: float, df: int) -> float:
    """Student-t quantile with df degrees of freedom; absolute error below 1e-7."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"t_quantile argument must lie in (0, 1), got {p}")
    if df < 1:
        raise DomainError(f"t_quantile needs df >= 1, got {df}")
    return float(special.stdtrit(df, p))


def stopping_quantile(i: int, alpha: float) -> float:
    """Critical value used at sample count i: t below the switch, z from it on."""
    if i < 2:
        raise DomainError(f"stopping rule needs at least 2 samples, got {i}")
    p = 1.0 - 0.5 * alpha
    if i < T_TO_Z_SWITCH:
        return t_quantile(p, i - 1)
    return z_quantile(p)


def run_mc(
    evaluator: Callable[[np.ndarray], float],
    problem: ProblemSpec,
    config: McConfig = McConfig(),
) -> McResult:
    """Draw samples one at a time until the stopping rule fires or the budget ends.

    The full germ block for max_samples is derived up front from the seed, so
    raising the budget extends the same sample path rather than reshuffling it.
    """
    germ = sample_germ(problem, config.max_samples, config.seed)
    physical = np.empty_like(germ)
    for k, gmap in enumerate(problem.germ_maps()):
        physical[:, k] = to_physical(gmap, germ[:, k])
    sum_y = 0.0
    sum_y2 = 0.0
    trace: list[tuple[int, float]] = []
    mean = math.nan
    rel_error = math.inf
    converged = False
    i = 0
    for i in range(1, config.max_samples + 1):
        row = physical[i - 1]
        try:
            y = float(evaluator(row))
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"evaluator failed at sample {i - 1}: {exc}", index=i - 1) from exc
        if not math.isfinite(y):
            raise EvaluationError(f"evaluator returned {y!r} at sample {i - 1}", index=i - 1)
        sum_y += y
        sum_y2 += y * y
        if i < config.min_samples:
            continue
        mean = sum_y / i
        spread = math.sqrt(max(sum_y2 / i - mean * mean, 0.0))
        if abs(mean) < _MEAN_FLOOR:
            raise DegenerateMeanError(
                f"running mean {mean!r} too close to zero at sample {i} "
                "for a mean-relative stopping rule"
            )
        q = stopping_quantile(i, config.alpha)
        rel_error = (2.0 * q / math.sqrt(i)) * spread / abs(mean)
        trace.append((i, rel_error))
        if rel_error <= config.tolerance:
            converged = True
            break
    return McResult(
        mean=mean,
        relative_error=rel_error,
        samples_used=i,
        converged=converged,
        trace=tuple(trace),
    )
