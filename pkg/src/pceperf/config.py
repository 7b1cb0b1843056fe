"""Analysis configuration: JSON schema, validation with field paths, model binding.

A config file is one JSON object with blocks problem / model / indices / pce /
mc / noise / seed.  Parsing is strict: unknown keys and type mismatches fail
with the offending field path.  Beta parameters follow our Beta(alpha, beta)
naming; the matching germ weight on [-1, 1] is (1-x)^(beta-1) (1+x)^(alpha-1).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, EvaluationError
from .inputspace import (
    ProblemSpec,
    problem_from_dict,
    problem_to_dict,
    to_physical,
)
from .montecarlo import McConfig
from .sysmodel import (
    ClosedNetworkSpec,
    Dataset,
    DatasetSpec,
    Station,
    dataset_eval,
    external_eval,
    external_eval_batch,
    load_dataset,
    mm1_metrics,
    mva_solve,
    round_half_even,
)

__all__ = [
    "PceSettings",
    "NoiseSettings",
    "Mm1Model",
    "StationBinding",
    "MvaModel",
    "DatasetModel",
    "ExternalModel",
    "AnalysisConfig",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "physical_from_germ",
    "Evaluator",
    "build_evaluator",
    "default_threads",
]

DEFAULT_RAN_LEVELS = (20.0, 10.0, 5.0, 1.0)
MC_SEED_OFFSET = 1
NOISE_SEED_OFFSET = 2

_MM1_INDICES = ("utilization", "response_time", "throughput")
_MVA_SYSTEM_INDICES = ("throughput", "response_time")
_MVA_STATION_METRICS = ("utilization", "queue_length", "residence_time")


@dataclass(frozen=True)
class PceSettings:
    degree: int | None = None  # None selects the degree by leave-one-out error
    d_max: int = 30
    samples: int | None = None
    fit: str = "regression"
    sparse_level: int | None = None


@dataclass(frozen=True)
class NoiseSettings:
    ran_levels: tuple[float, ...] = DEFAULT_RAN_LEVELS
    seed: int = 0


@dataclass(frozen=True)
class Mm1Model:
    arrival_rate: str | float
    service_time: str | float


@dataclass(frozen=True)
class StationBinding:
    name: str
    demand: str | float


@dataclass(frozen=True)
class MvaModel:
    stations: tuple[StationBinding, ...]
    think_time: str | float = 0.0
    population: str | int = 1


@dataclass(frozen=True)
class DatasetModel:
    path: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    match: str = "exact"


@dataclass(frozen=True)
class ExternalModel:
    command: tuple[str, ...]
    timeout: float = 600.0


Model = Mm1Model | MvaModel | DatasetModel | ExternalModel


@dataclass(frozen=True)
class AnalysisConfig:
    problem: ProblemSpec
    model: Model
    indices: tuple[str, ...]
    pce: PceSettings
    mc: McConfig
    noise: NoiseSettings
    seed: int


def _require_object(data, where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    return data

def _reject_unknown(data: dict, allowed: Sequence[str], where: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")

def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: expected a finite number, got {value!r}")
    return float(value)

def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value

def _as_str(value, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where}: expected a nonempty string, got {value!r}")
    return value

def _as_binding(value, where: str) -> str | float:
    """A model knob is either a parameter name or a constant."""
    if isinstance(value, str):
        return _as_str(value, where)
    return _as_number(value, where)


def _pce_from_dict(data, where: str = "pce") -> PceSettings:
    data = _require_object(data, where)
    _reject_unknown(data, ("degree", "d_max", "samples", "fit", "sparse_level"), where)
    degree = data.get("degree", "auto")
    if degree == "auto":
        degree = None
    else:
        degree = _as_int(degree, f"{where}.degree")
        if degree < 0:
            raise ConfigError(f"{where}.degree: must be >= 0, got {degree}")
    d_max = _as_int(data.get("d_max", 30), f"{where}.d_max")
    if d_max < 1:
        raise ConfigError(f"{where}.d_max: must be >= 1, got {d_max}")
    samples = data.get("samples")
    if samples is not None:
        samples = _as_int(samples, f"{where}.samples")
        if samples < 1:
            raise ConfigError(f"{where}.samples: must be >= 1, got {samples}")
    fit = data.get("fit", "regression")
    if fit not in ("regression", "projection"):
        raise ConfigError(f"{where}.fit: expected 'regression' or 'projection', got {fit!r}")
    sparse_level = data.get("sparse_level")
    if sparse_level is not None:
        sparse_level = _as_int(sparse_level, f"{where}.sparse_level")
        if sparse_level < 0:
            raise ConfigError(f"{where}.sparse_level: must be >= 0, got {sparse_level}")
    if fit == "projection":
        if degree is None:
            raise ConfigError(f"{where}.degree: 'auto' needs fit=regression")
        if sparse_level is None:
            raise ConfigError(f"{where}.sparse_level: required for fit=projection")
    return PceSettings(degree, d_max, samples, fit, sparse_level)


def _mc_from_dict(data, seed: int, where: str = "mc") -> McConfig:
    data = _require_object(data, where)
    _reject_unknown(data, ("tolerance", "alpha", "min_samples", "max_samples", "seed"), where)
    kwargs = {}
    for key in ("tolerance", "alpha"):
        if key in data:
            kwargs[key] = _as_number(data[key], f"{where}.{key}")
    for key in ("min_samples", "max_samples", "seed"):
        if key in data:
            kwargs[key] = _as_int(data[key], f"{where}.{key}")
    kwargs.setdefault("seed", seed + MC_SEED_OFFSET)
    try:
        return McConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _noise_from_dict(data, seed: int, where: str = "noise") -> NoiseSettings:
    data = _require_object(data, where)
    _reject_unknown(data, ("ran_levels", "seed"), where)
    levels = data.get("ran_levels", list(DEFAULT_RAN_LEVELS))
    if not isinstance(levels, list) or not levels:
        raise ConfigError(f"{where}.ran_levels: expected a nonempty list")
    parsed = tuple(
        _as_number(v, f"{where}.ran_levels[{i}]") for i, v in enumerate(levels)
    )
    for i, v in enumerate(parsed):
        if v <= 0:
            raise ConfigError(f"{where}.ran_levels[{i}]: must be > 0, got {v}")
    noise_seed = _as_int(data.get("seed", seed + NOISE_SEED_OFFSET), f"{where}.seed")
    return NoiseSettings(parsed, noise_seed)


def _model_from_dict(data, problem: ProblemSpec, base_dir: Path, where: str = "model") -> Model:
    data = _require_object(data, where)
    kind = data.get("type")
    names = set(problem.names)

    def binding(value, path) -> str | float:
        bound = _as_binding(value, path)
        if isinstance(bound, str) and bound not in names:
            raise ConfigError(f"{path}: unknown parameter {bound!r}")
        return bound

    if kind == "builtin-mm1":
        _reject_unknown(data, ("type", "arrival_rate", "service_time"), where)
        for key in ("arrival_rate", "service_time"):
            if key not in data:
                raise ConfigError(f"{where}.{key}: required")
        return Mm1Model(
            arrival_rate=binding(data["arrival_rate"], f"{where}.arrival_rate"),
            service_time=binding(data["service_time"], f"{where}.service_time"),
        )
    if kind == "builtin-mva":
        _reject_unknown(data, ("type", "stations", "think_time", "population"), where)
        raw = data.get("stations")
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{where}.stations: expected a nonempty list")
        stations = []
        seen = set()
        for i, item in enumerate(raw):
            here = f"{where}.stations[{i}]"
            item = _require_object(item, here)
            _reject_unknown(item, ("name", "demand"), here)
            for key in ("name", "demand"):
                if key not in item:
                    raise ConfigError(f"{here}.{key}: required")
            name = _as_str(item["name"], f"{here}.name")
            if name in seen:
                raise ConfigError(f"{here}.name: duplicate station {name!r}")
            seen.add(name)
            demand = binding(item["demand"], f"{here}.demand")
            if isinstance(demand, float) and demand <= 0:
                raise ConfigError(f"{here}.demand: must be > 0, got {demand}")
            stations.append(StationBinding(name, demand))
        think = binding(data.get("think_time", 0.0), f"{where}.think_time")
        if isinstance(think, float) and think < 0:
            raise ConfigError(f"{where}.think_time: must be >= 0, got {think}")
        population = data.get("population", 1)
        if isinstance(population, str):
            population = binding(population, f"{where}.population")
        else:
            population = _as_int(population, f"{where}.population")
            if population < 1:
                raise ConfigError(f"{where}.population: must be >= 1, got {population}")
        return MvaModel(tuple(stations), think, population)
    if kind == "dataset":
        _reject_unknown(data, ("type", "path", "inputs", "outputs", "match"), where)
        for key in ("path", "inputs", "outputs"):
            if key not in data:
                raise ConfigError(f"{where}.{key}: required")
        path = _as_str(data["path"], f"{where}.path")
        resolved = str((base_dir / path).resolve()) if not os.path.isabs(path) else path
        inputs = _str_list(data["inputs"], f"{where}.inputs")
        outputs = _str_list(data["outputs"], f"{where}.outputs")
        if len(inputs) != problem.dim:
            raise ConfigError(
                f"{where}.inputs: {len(inputs)} columns for {problem.dim} parameters"
            )
        match = data.get("match", "exact")
        if match not in ("exact", "nearest"):
            raise ConfigError(f"{where}.match: expected 'exact' or 'nearest', got {match!r}")
        return DatasetModel(resolved, inputs, outputs, match)
    if kind == "external":
        _reject_unknown(data, ("type", "command", "timeout"), where)
        if "command" not in data:
            raise ConfigError(f"{where}.command: required")
        command = _str_list(data["command"], f"{where}.command")
        timeout = _as_number(data.get("timeout", 600.0), f"{where}.timeout")
        if timeout <= 0:
            raise ConfigError(f"{where}.timeout: must be > 0, got {timeout}")
        return ExternalModel(command, timeout)
    raise ConfigError(
        f"{where}.type: expected one of builtin-mm1, builtin-mva, dataset, external; "
        f"got {kind!r}"
    )


def _str_list(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a nonempty list of strings")
    out = tuple(_as_str(v, f"{where}[{i}]") for i, v in enumerate(value))
    if len(set(out)) != len(out):
        raise ConfigError(f"{where}: duplicate entries")
    return out


def _validate_indices(indices: tuple[str, ...], model: Model, problem: ProblemSpec) -> None:
    for i, name in enumerate(indices):
        if any(c.isspace() or c in "/\\" for c in name):
            raise ConfigError(f"indices[{i}]: {name!r} is not file-name safe")
    if isinstance(model, Mm1Model):
        allowed = set(_MM1_INDICES)
    elif isinstance(model, MvaModel):
        allowed = set(_MVA_SYSTEM_INDICES)
        for st in model.stations:
            allowed.update(f"{st.name}.{metric}" for metric in _MVA_STATION_METRICS)
    elif isinstance(model, DatasetModel):
        allowed = set(model.outputs)
    else:
        return  # external: child defines the order, any names
    for i, name in enumerate(indices):
        if name not in allowed:
            raise ConfigError(
                f"indices[{i}]: {name!r} is not produced by this model "
                f"(choose from {sorted(allowed)})"
            )


def config_from_dict(data, base_dir: str | Path = ".", seed_override: int | None = None) -> AnalysisConfig:
    data = _require_object(data, "config")
    _reject_unknown(data, ("problem", "model", "indices", "pce", "mc", "noise", "seed"), "config")
    for key in ("problem", "model", "indices"):
        if key not in data:
            raise ConfigError(f"{key}: required")
    problem = problem_from_dict(data["problem"], "problem")
    seed = _as_int(data.get("seed", 0), "seed")
    if seed_override is not None:
        seed = int(seed_override)
    model = _model_from_dict(data["model"], problem, Path(base_dir), "model")
    indices = _str_list(data["indices"], "indices")
    _validate_indices(indices, model, problem)
    pce = _pce_from_dict(data.get("pce", {}), "pce")
    mc = _mc_from_dict(data.get("mc", {}), seed, "mc")
    noise = _noise_from_dict(data.get("noise", {}), seed, "noise")
    return AnalysisConfig(problem, model, indices, pce, mc, noise, seed)


def load_config(path: str | Path, seed_override: int | None = None) -> AnalysisConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent, seed_override=seed_override)


def _model_to_dict(model: Model) -> dict:
    if isinstance(model, Mm1Model):
        return {
            "type": "builtin-mm1",
            "arrival_rate": model.arrival_rate,
            "service_time": model.service_time,
        }
    if isinstance(model, MvaModel):
        return {
            "type": "builtin-mva",
            "stations": [{"name": s.name, "demand": s.demand} for s in model.stations],
            "think_time": model.think_time,
            "population": model.population,
        }
    if isinstance(model, DatasetModel):
        return {
            "type": "dataset",
            "path": model.path,
            "inputs": list(model.inputs),
            "outputs": list(model.outputs),
            "match": model.match,
        }
    return {"type": "external", "command": list(model.command), "timeout": model.timeout}


def config_to_dict(config: AnalysisConfig) -> dict:
    """Canonical form: all defaults written out, so parse(serialize(x)) == x."""
    return {
        "problem": problem_to_dict(config.problem),
        "model": _model_to_dict(config.model),
        "indices": list(config.indices),
        "pce": {
            "degree": "auto" if config.pce.degree is None else config.pce.degree,
            "d_max": config.pce.d_max,
            "samples": config.pce.samples,
            "fit": config.pce.fit,
            "sparse_level": config.pce.sparse_level,
        },
        "mc": {
            "tolerance": config.mc.tolerance,
            "alpha": config.mc.alpha,
            "min_samples": config.mc.min_samples,
            "max_samples": config.mc.max_samples,
            "seed": config.mc.seed,
        },
        "noise": {
            "ran_levels": list(config.noise.ran_levels),
            "seed": config.noise.seed,
        },
        "seed": config.seed,
    }


def physical_from_germ(problem: ProblemSpec, germ) -> np.ndarray:
    """Column-wise germ-to-physical transform of an (n, dim) block."""
    block = np.atleast_2d(np.asarray(germ, dtype=float))
    if block.shape[1] != problem.dim:
        raise DomainError(f"germ block has {block.shape[1]} columns, problem has {problem.dim}")
    out = np.empty_like(block)
    for k, gmap in enumerate(problem.germ_maps()):
        out[:, k] = to_physical(gmap, block[:, k])
    return out


def default_threads() -> int:
    """Evaluator pool size: PCEPERF_THREADS, default 1."""
    raw = os.environ.get("PCEPERF_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"PCEPERF_THREADS must be an integer, got {raw!r}") from exc
    if threads < 1:
        raise ConfigError(f"PCEPERF_THREADS must be >= 1, got {threads}")
    return threads


class Evaluator:
    """Bound model: physical input row -> one value per configured index."""

    def __init__(self, config: AnalysisConfig):
        self.config = config
        self.names = config.indices
        self._positions = {name: k for k, name in enumerate(config.problem.names)}
        model = config.model
        self._dataset: Dataset | None = None
        if isinstance(model, DatasetModel):
            self._dataset = load_dataset(
                DatasetSpec(model.path, model.inputs, model.outputs, model.match)
            )
            self._out_cols = [model.outputs.index(name) for name in self.names]

    def _get(self, binding: str | float, x: np.ndarray) -> float:
        if isinstance(binding, str):
            return float(x[self._positions[binding]])
        return float(binding)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.config.problem.dim:
            raise DomainError(
                f"input row has {x.shape[0]} values, problem has {self.config.problem.dim}"
            )
        model = self.config.model
        if isinstance(model, Mm1Model):
            return self._mm1_row(model, x)
        if isinstance(model, MvaModel):
            return self._mva_row(model, x)
        if isinstance(model, DatasetModel):
            row = dataset_eval(self._dataset, x)
            return row[self._out_cols]
        return external_eval(model.command, x, model.timeout, expected_outputs=len(self.names))

    def _mm1_row(self, model: Mm1Model, x: np.ndarray) -> np.ndarray:
        try:
            metrics = mm1_metrics(self._get(model.arrival_rate, x), self._get(model.service_time, x))
        except (DomainError, ConfigError) as exc:
            raise EvaluationError(str(exc)) from exc
        values = {
            "utilization": metrics.utilization,
            "response_time": metrics.response_time,
            "throughput": metrics.throughput,
        }
        return np.array([values[name] for name in self.names])

    def _mva_row(self, model: MvaModel, x: np.ndarray) -> np.ndarray:
        population = model.population
        if isinstance(population, str):
            population = round_half_even(self._get(population, x), "population")
        try:
            network = ClosedNetworkSpec(
                stations=tuple(
                    Station(s.name, self._get(s.demand, x)) for s in model.stations
                ),
                think_time=self._get(model.think_time, x),
                population=population,
            )
        except (DomainError, ConfigError) as exc:
            raise EvaluationError(str(exc)) from exc
        result = mva_solve(network)
        out = np.empty(len(self.names))
        for j, name in enumerate(self.names):
            if name == "throughput":
                out[j] = result.throughput
            elif name == "response_time":
                out[j] = result.response_time
            else:
                station, metric = name.rsplit(".", 1)
                table = {
                    "utilization": result.utilizations,
                    "queue_length": result.queue_lengths,
                    "residence_time": result.residence_times,
                }[metric]
                out[j] = table[station]
        return out

    def many(self, rows, threads: int | None = None) -> np.ndarray:
        """(n, dim) physical rows -> (n, len(indices)); failures carry the row index."""
        block = np.atleast_2d(np.asarray(rows, dtype=float))
        model = self.config.model
        if isinstance(model, ExternalModel):
            return external_eval_batch(
                model.command, block, model.timeout,
                expected_outputs=len(self.names), threads=threads,
            )
        out = np.empty((block.shape[0], len(self.names)))
        for i in range(block.shape[0]):
            try:
                out[i] = self(block[i])
            except EvaluationError as exc:
                if exc.index is None:
                    raise type(exc)(f"sample {i}: {exc}", index=i) from exc
                raise
        return out

    def scalar(self, index: str) -> Callable[[np.ndarray], float]:
        """Single-index view, for the sequential Monte Carlo loop."""
        j = self.names.index(index)
        return lambda x: float(self(x)[j])


def build_evaluator(config: AnalysisConfig) -> Evaluator:
    return Evaluator(config)
