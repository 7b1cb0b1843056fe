"""Robustness metrics: coefficient of variation, cross-validation, noise studies.

The leave-one-out error uses the hat-matrix shortcut (one fit instead of n)
and falls back to exhaustive refits only for samples whose leverage is
numerically one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.random import Generator, Philox
from scipy import special

from .errors import (
    ConfigError,
    DegenerateMeanError,
    DegenerateVarianceError,
    InsufficientSamplesError,
    PcePerfError,
)
from .inputspace import ProblemSpec
from .pce import (
    PceModel,
    SelectionReport,
    basis_matrix,
    moments,
    select_degree,
    total_degree_basis,
    _svd_lstsq,
    _validate_samples,
)

__all__ = [
    "COV_DEFINITION",
    "RobustnessReport",
    "LooReport",
    "NoiseRow",
    "cov",
    "robustness_report",
    "loo_error",
    "add_noise",
    "noise_sweep",
    "kde_pdf",
    "kde_bandwidth",
    "kde_grid",
]

COV_DEFINITION = "cov_percent = 100 * sd / |mean|"
_MASK64 = (1 << 64) - 1
_NOISE_STREAM_BASE = 1 << 32  # keeps noise streams disjoint from parameter streams
_LEVERAGE_TOL = 1e-10
_MEAN_FLOOR_FACTOR = 1e-12


@dataclass(frozen=True)
class RobustnessReport:
    mean: float
    sd: float
    cov_percent: float
    degree: int


@dataclass(frozen=True)
class LooReport:
    degree: int
    loo_error: float
    n_samples: int
    exhaustive_refits: int


@dataclass(frozen=True)
class NoiseRow:
    ran_level: float
    best_degree: int | None
    loo_error: float | None
    error: str | None = None


def cov(mean: float, sd: float) -> float:
    """Coefficient of variation in percent, sd over |mean|."""
    mean = float(mean)
    sd = float(sd)
    if not (sd >= 0.0) or not math.isfinite(sd):
        raise ConfigError(f"cov needs sd >= 0, got {sd}")
    if not math.isfinite(mean) or abs(mean) < _MEAN_FLOOR_FACTOR * max(1.0, sd):
        raise DegenerateMeanError(
            f"cov undefined: |mean|={abs(mean)!r} below 1e-12 * max(1, sd={sd!r})"
        )
    return 100.0 * sd / abs(mean)


def robustness_report(model: PceModel) -> RobustnessReport:
    """Mean, standard deviation and CoV of a fitted surrogate."""
    mom = moments(model)
    sd = math.sqrt(mom.variance)
    return RobustnessReport(
        mean=mom.mean,
        sd=sd,
        cov_percent=cov(mom.mean, sd),
        degree=model.basis.degree,
    )


def loo_error(problem: ProblemSpec, germ_samples, outputs, degree: int) -> LooReport:
    """Relative leave-one-out error of a regression fit at the given degree."""
    germ, y = _validate_samples(problem, germ_samples, outputs)
    basis = total_degree_basis(problem.germ_families(), degree)
    n, p = germ.shape[0], basis.size
    if n <= p:
        raise InsufficientSamplesError(
            f"leave-one-out needs more than {p} samples for degree {degree}, got {n}"
        )
    design = basis_matrix(basis, germ)
    coef, _, leverages = _svd_lstsq(design, y)
    fitted = design @ coef
    residuals = y - fitted
    denominators = 1.0 - leverages
    errors = np.empty(n)
    refit_rows = np.flatnonzero(denominators < _LEVERAGE_TOL)
    plain_rows = np.setdiff1d(np.arange(n), refit_rows, assume_unique=True)
    errors[plain_rows] = residuals[plain_rows] / denominators[plain_rows]
    for k in refit_rows:
        keep = np.arange(n) != k
        coef_k, *_ = np.linalg.lstsq(design[keep], y[keep], rcond=None)
        errors[k] = y[k] - design[k] @ coef_k
    total_ss = float(np.sum((y - np.mean(y)) ** 2))
    if total_ss == 0.0:
        if np.all(np.abs(residuals) < 1e-12):
            return LooReport(degree, 0.0, n, len(refit_rows))
        raise DegenerateVarianceError(
            "outputs are constant but the fit does not reproduce them"
        )
    return LooReport(degree, float(np.sum(errors**2)) / total_ss, n, len(refit_rows))


def add_noise(outputs, ran: float, seed: int, stream: int = 0) -> np.ndarray:
    """Add Gaussian noise scaled so the signal-to-noise ratio |mean|/sigma is `ran`."""
    y = np.asarray(outputs, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise ConfigError("outputs must be finite")
    if not (ran > 0.0) or not math.isfinite(ran):
        raise ConfigError(f"noise level must be > 0, got {ran}")
    mean = float(np.mean(y))
    if abs(mean) < 1e-300:
        raise DegenerateMeanError(
            "noise scale undefined: outputs have (near) zero mean"
        )
    sigma = abs(mean) / ran
    rng = Generator(
        Philox(
            key=np.array(
                [seed & _MASK64, (_NOISE_STREAM_BASE + stream) & _MASK64],
                dtype=np.uint64,
            )
        )
    )
    u = np.maximum(rng.random(y.shape[0]), 1e-300)
    return y + sigma * special.ndtri(u)


def noise_sweep(
    problem: ProblemSpec,
    germ_samples,
    outputs,
    ran_levels: Sequence[float] = (20.0, 10.0, 5.0, 1.0),
    seed: int = 0,
    d_max: int = 30,
) -> tuple[NoiseRow, ...]:
    """Re-select the degree under increasing noise; one row per level, in order.

    A failing level is recorded in its row and the sweep continues.
    """
    if len(ran_levels) == 0:
        raise ConfigError("noise sweep needs at least one level")
    rows: list[NoiseRow] = []
    for stream, ran in enumerate(ran_levels):
        try:
            noisy = add_noise(outputs, ran, seed, stream=stream)
            sel: SelectionReport = select_degree(problem, germ_samples, noisy, d_max)
            rows.append(NoiseRow(float(ran), sel.best_degree, sel.best_loo))
        except PcePerfError as exc:
            rows.append(NoiseRow(float(ran), None, None, error=str(exc)))
    return tuple(rows)


def kde_bandwidth(samples) -> float:
    """Gaussian-kernel bandwidth 1.06 * sd * n^(-1/5)."""
    y = np.asarray(samples, dtype=float).reshape(-1)
    n = y.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f"density estimate needs >= 2 samples, got {n}")
    sd = float(np.std(y, ddof=1))
    # identical samples can leave a tiny nonzero sd through the mean's rounding
    if not math.isfinite(sd) or sd <= 1e-13 * max(1.0, abs(float(np.mean(y)))):
        raise DegenerateVarianceError(
            "density estimate undefined: samples form a point mass"
        )
    return 1.06 * sd * n ** (-0.2)


def kde_pdf(samples, grid) -> np.ndarray:
    """Gaussian kernel density of the samples evaluated on the grid."""
    y = np.asarray(samples, dtype=float).reshape(-1)
    g = np.asarray(grid, dtype=float).reshape(-1)
    h = kde_bandwidth(y)
    n = y.shape[0]
    out = np.empty(g.shape[0])
    # block the grid so the (grid x samples) kernel matrix stays small
    block = max(1, int(8_000_000 / max(n, 1)))
    norm = 1.0 / (n * h * math.sqrt(2.0 * math.pi))
    for start in range(0, g.shape[0], block):
        chunk = g[start : start + block, None]
        z = (chunk - y[None, :]) / h
        out[start : start + block] = norm * np.exp(-0.5 * z * z).sum(axis=1)
    return out


def kde_grid(sample_sets: Sequence, points: int = 256) -> np.ndarray:
    """Shared evaluation grid: joint data range widened by three bandwidths."""
    points = int(points)
    if points < 2:
        raise ConfigError(f"grid needs >= 2 points, got {points}")
    sets = [np.asarray(s, dtype=float).reshape(-1) for s in sample_sets]
    if not sets:
        raise ConfigError("grid needs at least one sample set")
    h = max(kde_bandwidth(s) for s in sets)
    lo = min(float(np.min(s)) for s in sets) - 3.0 * h
    hi = max(float(np.max(s)) for s in sets) + 3.0 * h
    return np.linspace(lo, hi, points)
