"""Performance model evaluators: M/M/1, exact MVA, dataset lookup, external command.

Every evaluator maps a named physical input vector to named output metrics;
they are deliberately small stand-ins that exercise the analysis machinery.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DatasetFormatError,
    DatasetLookupError,
    DomainError,
    EvaluationError,
    InstabilityError,
)
from .report import format_float

__all__ = [
    "Mm1Metrics",
    "mm1_metrics",
    "Station",
    "ClosedNetworkSpec",
    "MvaResult",
    "mva_solve",
    "DatasetSpec",
    "Dataset",
    "load_dataset",
    "dataset_eval",
    "external_eval",
    "external_eval_batch",
    "round_half_even",
]

logger = logging.getLogger(__name__)

_EXACT_MATCH_RTOL = 1e-9
DEFAULT_EXTERNAL_TIMEOUT = 600.0


@dataclass(frozen=True)
class Mm1Metrics:
    utilization: float
    response_time: float
    throughput: float


def mm1_metrics(arrival_rate: float, service_time: float) -> Mm1Metrics:
    """Open single-queue metrics; rejects saturated or invalid loads."""
    lam = float(arrival_rate)
    s = float(service_time)
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError(f"arrival rate must be positive and finite, got {lam}")
    if not (s > 0.0 and math.isfinite(s)):
        raise DomainError(f"service time must be positive and finite, got {s}")
    utilization = lam * s
    if utilization >= 1.0:
        raise InstabilityError(
            f"queue is unstable: arrival_rate={lam}, service_time={s} "
            f"give utilization={utilization} >= 1"
        )
    return Mm1Metrics(
        utilization=utilization,
        response_time=s / (1.0 - utilization),
        throughput=lam,
    )


@dataclass(frozen=True)
class Station:
    name: str
    demand: float

    def __post_init__(self):
        if not self.name:
            raise ConfigError("station name must be nonempty")
        if not (self.demand > 0.0 and math.isfinite(self.demand)):
            raise DomainError(
                f"station {self.name!r} service demand must be positive, got {self.demand}"
            )


@dataclass(frozen=True)
class ClosedNetworkSpec:
    stations: tuple[Station, ...]
    think_time: float = 0.0
    population: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        if not self.stations:
            raise ConfigError("closed network needs at least one station")
        names = [s.name for s in self.stations]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate station names: {names}")
        if not (self.think_time >= 0.0 and math.isfinite(self.think_time)):
            raise DomainError(f"think time must be >= 0, got {self.think_time}")
        if not isinstance(self.population, int) or isinstance(self.population, bool):
            raise DomainError(f"population must be an integer, got {self.population!r}")
        if self.population < 1:
            raise DomainError(f"population must be >= 1, got {self.population}")


@dataclass(frozen=True)
class MvaResult:
    throughput: float
    response_time: float
    residence_times: dict[str, float]
    queue_lengths: dict[str, float]
    utilizations: dict[str, float]


def mva_solve(network: ClosedNetworkSpec) -> MvaResult:
    """Exact mean value analysis by the standard population recursion."""
    demands = np.array([s.demand for s in network.stations])
    queue = np.zeros_like(demands)
    residence = demands.copy()
    throughput = 0.0
    for n in range(1, network.population + 1):
        residence = demands * (1.0 + queue)
        throughput = n / (network.think_time + float(residence.sum()))
        queue = throughput * residence
    names = [s.name for s in network.stations]
    return MvaResult(
        throughput=throughput,
        response_time=float(residence.sum()),
        residence_times=dict(zip(names, residence.tolist())),
        queue_lengths=dict(zip(names, queue.tolist())),
        utilizations=dict(zip(names, (throughput * demands).tolist())),
    )


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    match: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.inputs or not self.outputs:
            raise ConfigError("dataset needs at least one input and one output column")
        if self.match not in ("exact", "nearest"):
            raise ConfigError(f"dataset match must be 'exact' or 'nearest', got {self.match!r}")


@dataclass
class Dataset:
    spec: DatasetSpec
    inputs: np.ndarray  # (rows, n_inputs)
    outputs: np.ndarray  # (rows, n_outputs)
    lines: tuple[int, ...]  # 1-based source line per row, for messages


def load_dataset(spec: DatasetSpec) -> Dataset:
    """Parse the measurement table; '#' lines are comments, columns match by name."""
    path = Path(spec.path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read dataset {path}: {exc}") from exc
    numbered = [
        (lineno, line)
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise DatasetFormatError(f"dataset {path} has no header row")
    header_line, data_lines = numbered[0], numbered[1:]
    header = [cell.strip() for cell in next(csv.reader([header_line[1]]))]
    if len(set(header)) != len(header):
        raise DatasetFormatError(
            f"dataset {path} line {header_line[0]}: duplicate column names in header"
        )
    missing = [c for c in (*spec.inputs, *spec.outputs) if c not in header]
    if missing:
        raise DatasetFormatError(f"dataset {path}: missing columns {missing}")
    if not data_lines:
        raise DatasetFormatError(f"dataset {path} has no data rows")
    col_pos = {name: header.index(name) for name in header}
    n_rows = len(data_lines)
    inputs = np.empty((n_rows, len(spec.inputs)))
    outputs = np.empty((n_rows, len(spec.outputs)))
    lines = []
    for r, (lineno, line) in enumerate(data_lines):
        cells = [cell.strip() for cell in next(csv.reader([line]))]
        if len(cells) != len(header):
            raise DatasetFormatError(
                f"dataset {path} line {lineno}: {len(cells)} cells, header has {len(header)}"
            )
        for j, name in enumerate(spec.inputs):
            inputs[r, j] = _parse_cell(cells[col_pos[name]], path, lineno, name)
        for j, name in enumerate(spec.outputs):
            outputs[r, j] = _parse_cell(cells[col_pos[name]], path, lineno, name)
        lines.append(lineno)
    return Dataset(spec, inputs, outputs, tuple(lines))


def _parse_cell(cell: str, path: Path, lineno: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError as exc:
        raise DatasetFormatError(
            f"dataset {path} line {lineno}, column {column!r}: not a number: {cell!r}"
        ) from exc
    if not math.isfinite(value):
        raise DatasetFormatError(
            f"dataset {path} line {lineno}, column {column!r}: non-finite value {cell!r}"
        )
    return value


def _normalized_distances(dataset: Dataset, query: np.ndarray) -> np.ndarray:
    lo = dataset.inputs.min(axis=0)
    hi = dataset.inputs.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    diff = (dataset.inputs - query) / span
    return np.sqrt(np.sum(diff * diff, axis=1))


def dataset_eval(dataset: Dataset, query) -> np.ndarray:
    """Look up the output row for a query input vector (exact or nearest match)."""
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.shape[0] != dataset.inputs.shape[1]:
        raise DomainError(
            f"query has {q.shape[0]} values, dataset has {dataset.inputs.shape[1]} inputs"
        )
    if not np.all(np.isfinite(q)):
        raise DomainError(f"query must be finite, got {q!r}")
    if dataset.spec.match == "nearest":
        best = int(np.argmin(_normalized_distances(dataset, q)))  # ties: lower row
        return dataset.outputs[best].copy()
    scale = np.maximum(1.0, np.maximum(np.abs(dataset.inputs), np.abs(q)))
    hits = np.flatnonzero(np.all(np.abs(dataset.inputs - q) <= _EXACT_MATCH_RTOL * scale, axis=1))
    if hits.size == 1:
        return dataset.outputs[hits[0]].copy()
    if hits.size > 1:
        where = ", ".join(f"line {dataset.lines[h]}" for h in hits[:5])
        raise DatasetLookupError(
            f"query {q.tolist()} matches {hits.size} rows ({where}); expected exactly one"
        )
    order = np.argsort(_normalized_distances(dataset, q), kind="stable")[:3]
    nearest = "; ".join(
        f"line {dataset.lines[r]}: {dataset.inputs[r].tolist()}" for r in order
    )
    raise DatasetLookupError(
        f"no dataset row matches {q.tolist()} exactly; nearest rows: {nearest}"
    )


def external_eval(
    command: Sequence[str],
    inputs,
    timeout: float = DEFAULT_EXTERNAL_TIMEOUT,
    expected_outputs: int | None = None,
) -> np.ndarray:
    """One evaluation of an external solver: one CSV line in, one CSV line out."""
    command = [str(c) for c in command]
    if not command:
        raise ConfigError("external command must be nonempty")
    x = np.asarray(inputs, dtype=float).reshape(-1)
    line = ",".join(format_float(v) for v in x) + "\n"
    try:
        proc = subprocess.run(
            command,
            input=line,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise EvaluationError(
            f"external command {command!r} timed out after {timeout}s"
        ) from exc
    except OSError as exc:
        raise EvaluationError(f"cannot run external command {command!r}: {exc}") from exc
    if proc.returncode != 0:
        raise EvaluationError(
            f"external command {command!r} exited with {proc.returncode}; "
            f"stderr: {proc.stderr.strip()!r}"
        )
    rows = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if len(rows) != 1:
        raise EvaluationError(
            f"external command {command!r} wrote {len(rows)} output lines, expected 1; "
            f"stdout: {proc.stdout!r}"
        )
    try:
        values = np.array([float(cell) for cell in rows[0].split(",")])
    except ValueError as exc:
        raise EvaluationError(
            f"external command {command!r} wrote a non-numeric row: {rows[0]!r}"
        ) from exc
    if not np.all(np.isfinite(values)):
        raise EvaluationError(
            f"external command {command!r} returned non-finite values: {rows[0]!r}"
        )
    if expected_outputs is not None and values.shape[0] != expected_outputs:
        raise EvaluationError(
            f"external command {command!r} returned {values.shape[0]} values, "
            f"expected {expected_outputs}: {rows[0]!r}"
        )
    return values


def external_eval_batch(
    command: Sequence[str],
    rows,
    timeout: float = DEFAULT_EXTERNAL_TIMEOUT,
    expected_outputs: int | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Run the external solver over many rows, preserving row order.

    threads=None reads PCEPERF_THREADS (default 1); failures carry the row index.
    """
    from concurrent.futures import ThreadPoolExecutor

    block = np.asarray(rows, dtype=float)
    if block.ndim != 2:
        raise DomainError(f"rows must be 2-D, got shape {block.shape}")
    if threads is None:
        raw = os.environ.get("PCEPERF_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError as exc:
            raise ConfigError(f"PCEPERF_THREADS must be an integer, got {raw!r}") from exc
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")

    def one(i: int) -> np.ndarray:
        try:
            return external_eval(command, block[i], timeout, expected_outputs)
        except EvaluationError as exc:
            raise EvaluationError(f"row {i}: {exc}", index=i) from exc

    if threads == 1 or block.shape[0] <= 1:
        results = [one(i) for i in range(block.shape[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(block.shape[0])))
    return np.vstack(results) if results else np.empty((0, expected_outputs or 0))


def round_half_even(value: float, name: str = "value") -> int:
    """Round a continuous knob to the nearest integer, ties to even; logged."""
    v = float(value)
    if not math.isfinite(v):
        raise DomainError(f"{name} must be finite to round, got {v!r}")
    k = round(v)
    logger.debug("rounded %s=%r to %d", name, v, k)
    return int(k)
