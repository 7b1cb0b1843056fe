"""Multi-dimensional germ quadrature: tensor products and Smolyak sparse grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, NumericalError, SizeLimitError
from .orthopoly import PolyFamily, gauss_rule

__all__ = [
    "MAX_NODES",
    "QuadratureRuleND",
    "tensor_grid",
    "smolyak_grid",
    "integrate",
]

MAX_NODES = 10_000_000
_MERGE_DECIMALS = 12  # duplicate nodes are merged when equal to 1e-12
_WEIGHT_SUM_TOL = 1e-10


@dataclass(frozen=True)
class QuadratureRuleND:
    """Nodes (n, dim) in germ coordinates with weights (n,) summing to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape[0] != weights.shape[0]:
            raise NumericalError(
                f"node/weight count mismatch: {nodes.shape[0]} vs {weights.shape[0]}"
            )
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise NumericalError("quadrature rule contains non-finite entries")
        total = math.fsum(weights.tolist())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise NumericalError(f"quadrature weights sum to {total!r}, expected 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def _tensor_arrays(
    nodes_1d: Sequence[np.ndarray], weights_1d: Sequence[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    grids = np.meshgrid(*nodes_1d, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(1)
    for w in weights_1d:
        weights = np.multiply.outer(weights, w).ravel()
    return nodes, weights


def tensor_grid(families: Sequence[PolyFamily], points_per_dim: Sequence[int]) -> QuadratureRuleND:
    """Full tensor-product Gauss rule; node count is capped at MAX_NODES."""
    families = tuple(families)
    counts = [int(p) for p in points_per_dim]
    if len(families) != len(counts) or not families:
        raise NumericalError(
            f"families/points length mismatch: {len(families)} vs {len(counts)}"
        )
    if any(c < 1 for c in counts):
        raise NumericalError(f"points per dimension must be >= 1, got {counts}")
    total = math.prod(counts)
    if total > MAX_NODES:
        raise SizeLimitError(f"tensor grid would hold {total} nodes (limit {MAX_NODES})")
    rules = [gauss_rule(fam, c) for fam, c in zip(families, counts)]
    nodes, weights = _tensor_arrays([r[0] for r in rules], [r[1] for r in rules])
    return QuadratureRuleND(nodes, weights)


def _compositions(total: int, parts: int):
    """Positive integer compositions of `total` into `parts`, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def smolyak_grid(families: Sequence[PolyFamily], level: int) -> QuadratureRuleND:
    """Sparse combination-technique rule; 1-D rule at level l has l+1 points.

    Exact for total polynomial degree <= 2*level + 1. Coincident nodes from
    different tensor terms are merged by weight summation; weights may be
    negative.
    """
    families = tuple(families)
    m = len(families)
    level = int(level)
    if m < 1:
        raise NumericalError("smolyak grid needs at least one dimension")
    if level < 0:
        raise NumericalError(f"smolyak level must be >= 0, got {level}")
    q = level + m
    rule_cache: dict[tuple[PolyFamily, int], tuple[np.ndarray, np.ndarray]] = {}

    def rule_1d(fam: PolyFamily, pts: int):
        key = (fam, pts)
        if key not in rule_cache:
            rule_cache[key] = gauss_rule(fam, pts)
        return rule_cache[key]

    merged: dict[tuple, list] = {}
    for s in range(max(m, q - m + 1), q + 1):
        coeff = (-1.0) ** (q - s) * math.comb(m - 1, q - s)
        for comp in _compositions(s, m):
            if math.prod(comp) + len(merged) > MAX_NODES:
                raise SizeLimitError(
                    f"smolyak grid would exceed the {MAX_NODES}-node limit"
                )
            rules = [rule_1d(fam, pts) for fam, pts in zip(families, comp)]
            nodes, weights = _tensor_arrays([r[0] for r in rules], [r[1] for r in rules])
            keys = np.round(nodes, _MERGE_DECIMALS)
            for row, key_row, w in zip(nodes, keys, weights):
                key = tuple(key_row)
                entry = merged.get(key)
                if entry is None:
                    merged[key] = [row, coeff * w]
                else:
                    entry[1] += coeff * w
    nodes = np.array([entry[0] for entry in merged.values()])
    weights = np.array([entry[1] for entry in merged.values()])
    order = np.lexsort(tuple(nodes[:, k] for k in reversed(range(m))))
    return QuadratureRuleND(nodes[order], weights[order])


def integrate(rule: QuadratureRuleND, fn: Callable[[np.ndarray], float]) -> float:
    """Weighted sum of fn over the rule's nodes, in stored node order."""
    values = np.empty(rule.n_nodes)
    for i, node in enumerate(rule.nodes):
        try:
            y = float(fn(node))
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"integrand failed at node {i}: {exc}", index=i) from exc
        if not math.isfinite(y):
            raise EvaluationError(f"integrand returned {y!r} at node {i}", index=i)
        values[i] = y
    return float(np.dot(rule.weights, values))
