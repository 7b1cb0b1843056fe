"""Polynomial chaos surrogates: basis bookkeeping, fitting, moments, model files.

A surrogate is a linear combination of orthonormal multivariate polynomials of
the germ variables. Coefficients come either from least-squares regression on
random germ samples or from spectral projection on a quadrature rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    EvaluationError,
    InsufficientSamplesError,
    ModelFileError,
    RankDeficiencyError,
    SizeLimitError,
    UnderdeterminedError,
)
from .inputspace import ProblemSpec, germ_support, problem_from_dict, problem_to_dict
from .orthopoly import MAX_DEGREE, PolyFamily, evaluate_orthonormal, norm_squared
from .quadrature import QuadratureRuleND
from .report import dumps_json, format_float

__all__ = [
    "MAX_BASIS_TERMS",
    "MODEL_FORMAT",
    "MODEL_FORMAT_VERSION",
    "BasisSet",
    "PceModel",
    "MomentReport",
    "LooEntry",
    "SelectionReport",
    "basis_size",
    "total_degree_basis",
    "eval_basis",
    "basis_matrix",
    "fit_regression",
    "fit_projection",
    "predict",
    "moments",
    "select_degree",
    "save_model",
    "load_model",
]

MAX_BASIS_TERMS = 1_000_000
MODEL_FORMAT = "pceperf-model"
MODEL_FORMAT_VERSION = 1
_LOO_TIE_TOL = 1e-12


@dataclass(frozen=True)
class BasisSet:
    """Total-degree orthonormal basis in graded lexicographic order."""

    families: tuple[PolyFamily, ...]
    degree: int
    indices: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.families)

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass
class PceModel:
    problem: ProblemSpec
    basis: BasisSet
    coefficients: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    second_moment: float


@dataclass(frozen=True)
class LooEntry:
    degree: int
    loo_error: float
    basis_terms: int


@dataclass(frozen=True)
class SelectionReport:
    best_degree: int
    best_loo: float
    table: tuple[LooEntry, ...]
    skipped_degrees: tuple[int, ...]


def basis_size(dim: int, degree: int) -> int:
    return math.comb(dim + degree, degree)


def _multi_indices(dim: int, degree: int):
    def fixed_total(d: int, t: int):
        if d == 1:
            yield (t,)
            return
        for first in range(t + 1):
            for rest in fixed_total(d - 1, t - first):
                yield (first, *rest)

    for t in range(degree + 1):
        yield from fixed_total(dim, t)


def total_degree_basis(families: Sequence[PolyFamily], degree: int) -> BasisSet:
    """All multi-indices with total degree <= degree, graded lexicographic."""
    families = tuple(families)
    degree = int(degree)
    if not families:
        raise ConfigError("basis needs at least one germ dimension")
    if degree < 0 or degree > MAX_DEGREE:
        raise DomainError(f"basis degree {degree} outside [0, {MAX_DEGREE}]")
    count = basis_size(len(families), degree)
    if count > MAX_BASIS_TERMS:
        raise SizeLimitError(
            f"basis would hold {count} terms (limit {MAX_BASIS_TERMS})"
        )
    return BasisSet(families, degree, tuple(_multi_indices(len(families), degree)))


def eval_basis(basis: BasisSet, position: int, germ_point) -> float:
    """Evaluate one orthonormal basis function at a single germ point."""
    if position < 0 or position >= basis.size:
        raise DomainError(f"basis position {position} outside [0, {basis.size})")
    point = np.asarray(germ_point, dtype=float).reshape(-1)
    if point.shape[0] != basis.dim:
        raise DomainError(f"germ point has {point.shape[0]} dims, basis has {basis.dim}")
    value = 1.0
    for fam, deg, x in zip(basis.families, basis.indices[position], point):
        value *= float(evaluate_orthonormal(fam, deg, x))
    return value


def _orthonormal_tables(basis: BasisSet, points: np.ndarray) -> list[np.ndarray]:
    tables = []
    for k, fam in enumerate(basis.families):
        per_degree = [
            evaluate_orthonormal(fam, d, points[:, k]) for d in range(basis.degree + 1)
        ]
        tables.append(np.vstack(per_degree) if per_degree else np.ones((1, len(points))))
    return tables


def basis_matrix(basis: BasisSet, points) -> np.ndarray:
    """Design matrix (n, P) of orthonormal basis values at germ points (n, dim)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != basis.dim:
        raise DomainError(
            f"points have {points.shape[1]} dims, basis has {basis.dim}"
        )
    tables = _orthonormal_tables(basis, points)
    out = np.empty((points.shape[0], basis.size))
    for j, idx in enumerate(basis.indices):
        col = tables[0][idx[0]].copy()
        for k in range(1, basis.dim):
            col *= tables[k][idx[k]]
        out[:, j] = col
    return out


def _validate_samples(
    problem: ProblemSpec, germ_samples, outputs
) -> tuple[np.ndarray, np.ndarray]:
    germ = np.atleast_2d(np.asarray(germ_samples, dtype=float))
    y = np.asarray(outputs, dtype=float).reshape(-1)
    if germ.shape[1] != problem.dim:
        raise DomainError(
            f"germ samples have {germ.shape[1]} dims, problem has {problem.dim}"
        )
    if germ.shape[0] != y.shape[0]:
        raise DomainError(
            f"sample count mismatch: {germ.shape[0]} germ rows vs {y.shape[0]} outputs"
        )
    if not np.all(np.isfinite(germ)):
        raise DomainError("germ samples must be finite")
    if not np.all(np.isfinite(y)):
        raise DomainError("outputs must be finite")
    return germ, y


def _svd_lstsq(design: np.ndarray, y: np.ndarray):
    """Least squares through the SVD; returns (coefficients, rank, leverages)."""
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    cutoff = max(design.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    if rank < design.shape[1]:
        raise RankDeficiencyError(
            f"design matrix is rank-deficient: rank {rank} of {design.shape[1]} columns",
            deficient_columns=design.shape[1] - rank,
        )
    coef = vt.T @ ((u.T @ y) / s)
    leverages = np.sum(u * u, axis=1)
    return coef, rank, leverages


def fit_regression(
    problem: ProblemSpec, germ_samples, outputs, degree: int
) -> PceModel:
    """Least-squares fit on germ samples; never forms normal equations."""
    germ, y = _validate_samples(problem, germ_samples, outputs)
    basis = total_degree_basis(problem.germ_families(), degree)
    n, p = germ.shape[0], basis.size
    if n < p:
        raise UnderdeterminedError(
            f"regression needs at least {p} samples for degree {degree}, got {n}"
        )
    design = basis_matrix(basis, germ)
    coef, rank, _ = _svd_lstsq(design, y)
    meta = {
        "method": "regression",
        "n_samples": n,
        "basis_terms": p,
        "rank": rank,
        "conditioning_warning": bool(n < 2 * p),
    }
    return PceModel(problem, basis, coef, meta)


def fit_projection(
    problem: ProblemSpec,
    rule: QuadratureRuleND,
    evaluator: Callable[[np.ndarray], float],
    degree: int,
) -> PceModel:
    """Spectral projection: coefficients are weighted sums over quadrature nodes."""
    basis = total_degree_basis(problem.germ_families(), degree)
    if rule.dim != basis.dim:
        raise DomainError(f"rule has {rule.dim} dims, problem has {basis.dim}")
    values = np.empty(rule.n_nodes)
    for i, node in enumerate(rule.nodes):
        try:
            v = float(evaluator(node))
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"evaluator failed at node {i}: {exc}", index=i) from exc
        if not math.isfinite(v):
            raise EvaluationError(f"evaluator returned {v!r} at node {i}", index=i)
        values[i] = v
    design = basis_matrix(basis, rule.nodes)
    coef = design.T @ (rule.weights * values)
    meta = {
        "method": "projection",
        "n_nodes": rule.n_nodes,
        "basis_terms": basis.size,
    }
    return PceModel(problem, basis, coef, meta)


def predict(model: PceModel, germ_points):
    """Evaluate the surrogate; (dim,) gives a float, (n, dim) gives (n,)."""
    points = np.asarray(germ_points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    for k, fam in enumerate(model.basis.families):
        lo, hi = germ_support(fam)
        col = points[:, k]
        if np.any(col < lo) or np.any(col > hi) or not np.all(np.isfinite(col)):
            raise DomainError(
                f"germ point outside {fam.kind} support [{lo}, {hi}] in dim {k}"
            )
    values = basis_matrix(model.basis, points) @ model.coefficients
    return float(values[0]) if single else values


def moments(model: PceModel) -> MomentReport:
    """Mean and (co)variance read directly off the orthonormal coefficients."""
    c = np.asarray(model.coefficients, dtype=float)
    mean = float(c[0])
    variance = float(np.dot(c[1:], c[1:]))
    return MomentReport(mean=mean, variance=variance, second_moment=mean * mean + variance)


def select_degree(
    problem: ProblemSpec, germ_samples, outputs, d_max: int = 30
) -> SelectionReport:
    """Sweep degrees 1..d_max, score by leave-one-out error, prefer lower degree.

    Degrees whose basis is not strictly smaller than the sample count are
    skipped; ties within 1e-12 go to the smaller degree.
    """
    from .robustness import loo_error  # local import to avoid a module cycle

    germ, y = _validate_samples(problem, germ_samples, outputs)
    d_max = int(d_max)
    if d_max < 1 or d_max > MAX_DEGREE:
        raise DomainError(f"d_max {d_max} outside [1, {MAX_DEGREE}]")
    n = germ.shape[0]
    table: list[LooEntry] = []
    skipped: list[int] = []
    for degree in range(1, d_max + 1):
        p = basis_size(problem.dim, degree)
        if n <= p:
            skipped.append(degree)
            continue
        rep = loo_error(problem, germ, y, degree)
        table.append(LooEntry(degree, rep.loo_error, p))
    if not table:
        raise InsufficientSamplesError(
            f"no feasible degree in 1..{d_max} for {n} samples "
            f"(smallest basis needs more than {basis_size(problem.dim, 1)} samples)"
        )
    best_loo = min(entry.loo_error for entry in table)
    best_degree = min(
        entry.degree for entry in table if entry.loo_error <= best_loo + _LOO_TIE_TOL
    )
    return SelectionReport(
        best_degree=best_degree,
        best_loo=next(e.loo_error for e in table if e.degree == best_degree),
        table=tuple(table),
        skipped_degrees=tuple(skipped),
    )


def _family_to_dict(fam: PolyFamily) -> dict:
    return {"kind": fam.kind, "alpha": fam.alpha, "beta": fam.beta}


def save_model(model: PceModel, path: str | Path) -> Path:
    """Write the model as a versioned text document; round-trips bit-exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "problem": problem_to_dict(model.problem),
        "degree": model.basis.degree,
        "indices": [list(idx) for idx in model.basis.indices],
        "coefficients": [format_float(c) for c in model.coefficients],
        "meta": dict(model.meta),
    }
    path = Path(path)
    path.write_text(dumps_json(doc), encoding="utf-8")
    return path


def load_model(path: str | Path) -> PceModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path} is not a {MODEL_FORMAT} document")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"unsupported model format version {doc.get('format_version')!r} "
            f"(supported: {MODEL_FORMAT_VERSION})"
        )
    try:
        problem = problem_from_dict(doc["problem"])
        degree = int(doc["degree"])
        indices = tuple(tuple(int(i) for i in idx) for idx in doc["indices"])
        coefficients = np.array([float(c) for c in doc["coefficients"]])
        meta = dict(doc.get("meta", {}))
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    basis = total_degree_basis(problem.germ_families(), degree)
    if basis.indices != indices:
        raise ModelFileError(f"corrupt model file {path}: basis index list mismatch")
    if coefficients.shape[0] != basis.size:
        raise ModelFileError(
            f"corrupt model file {path}: {coefficients.shape[0]} coefficients "
            f"for a {basis.size}-term basis"
        )
    return PceModel(problem, basis, coefficients, meta)
