"""Uncertain input parameters and their polynomial germ representation.

Each supported distribution is carried exactly by a germ: a standard random
variable matched to an orthogonal polynomial family, composed with either an
affine map or an inverse-CDF map back to physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.random import Generator, Philox
from scipy import special

from .errors import ConfigError, DomainError
from .orthopoly import (
    PolyFamily,
    generalized_laguerre,
    hermite,
    jacobi,
    laguerre,
    legendre,
)

__all__ = [
    "Normal",
    "Uniform",
    "Beta",
    "Exponential",
    "Gamma",
    "Triangular",
    "Discrete",
    "Distribution",
    "Affine",
    "InverseCdf",
    "GermMap",
    "InputParameter",
    "ProblemSpec",
    "germ_for",
    "germ_support",
    "quantile",
    "to_physical",
    "sample_germ",
    "sample_physical",
    "dist_to_dict",
    "dist_from_dict",
    "problem_to_dict",
    "problem_from_dict",
]

_MASK64 = (1 << 64) - 1
# smallest uniform fed to inverse CDFs; keeps unbounded quantiles finite
_U_FLOOR = 1e-300


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise ConfigError(f"normal.sigma must be > 0, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise ConfigError(f"normal.mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ConfigError(f"uniform requires lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ConfigError(
                f"beta shapes must be > 0, got alpha={self.alpha}, beta={self.beta}"
            )
        if not (self.lo < self.hi):
            raise ConfigError(f"beta requires lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0):
            raise ConfigError(f"exponential.rate must be > 0, got {self.rate}")


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ConfigError(
                f"gamma requires shape > 0 and scale > 0, got {self.shape}, {self.scale}"
            )


@dataclass(frozen=True)
class Triangular:
    lo: float
    mode: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi) or not (self.lo <= self.mode <= self.hi):
            raise ConfigError(
                f"triangular requires lo <= mode <= hi and lo < hi, got "
                f"({self.lo}, {self.mode}, {self.hi})"
            )


@dataclass(frozen=True)
class Discrete:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) == 0:
            raise ConfigError("discrete.values must be nonempty")
        if len(self.values) != len(self.probs):
            raise ConfigError(
                f"discrete values/probs length mismatch: "
                f"{len(self.values)} vs {len(self.probs)}"
            )
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigError("discrete.values must all be finite")
        if any(p <= 0.0 for p in self.probs):
            raise ConfigError("discrete.probs must all be > 0")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"discrete.probs must sum to 1 within 1e-9, got {total!r}")


Distribution = Union[Normal, Uniform, Beta, Exponential, Gamma, Triangular, Discrete]


@dataclass(frozen=True)
class Affine:
    """Physical value x = shift + scale * germ."""

    shift: float
    scale: float

    def __post_init__(self):
        if not (self.scale > 0.0):
            raise ConfigError(f"affine scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class InverseCdf:
    """Physical value x = quantile(dist, (germ + 1) / 2) on a Legendre germ."""

    dist: Distribution


@dataclass(frozen=True)
class GermMap:
    family: PolyFamily
    transform: Union[Affine, InverseCdf]


@dataclass(frozen=True)
class InputParameter:
    name: str
    dist: Distribution

    def __post_init__(self):
        if not self.name:
            raise ConfigError("parameter name must be nonempty")


@dataclass(frozen=True)
class ProblemSpec:
    params: tuple[InputParameter, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.params) == 0:
            raise ConfigError("problem needs at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate parameter names: {names}")

    @property
    def dim(self) -> int:
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def germ_maps(self) -> tuple[GermMap, ...]:
        return tuple(germ_for(p.dist) for p in self.params)

    def germ_families(self) -> tuple[PolyFamily, ...]:
        return tuple(m.family for m in self.germ_maps())


def germ_for(dist: Distribution) -> GermMap:
    """Germ family and exact transform carrying the distribution."""
    if isinstance(dist, Normal):
        return GermMap(hermite(), Affine(dist.mu, dist.sigma))
    if isinstance(dist, Uniform):
        return GermMap(legendre(), Affine(0.5 * (dist.lo + dist.hi), 0.5 * (dist.hi - dist.lo)))
    if isinstance(dist, Beta):
        fam = jacobi(dist.beta - 1.0, dist.alpha - 1.0)
        return GermMap(fam, Affine(0.5 * (dist.lo + dist.hi), 0.5 * (dist.hi - dist.lo)))
    if isinstance(dist, Exponential):
        return GermMap(laguerre(), Affine(0.0, 1.0 / dist.rate))
    if isinstance(dist, Gamma):
        return GermMap(generalized_laguerre(dist.shape - 1.0), Affine(0.0, dist.scale))
    if isinstance(dist, (Triangular, Discrete)):
        return GermMap(legendre(), InverseCdf(dist))
    raise ConfigError(f"unsupported distribution {type(dist).__name__}")


def germ_support(family: PolyFamily) -> tuple[float, float]:
    """Closed support of the germ density for a family."""
    if family.kind == "hermite":
        return (-math.inf, math.inf)
    if family.kind in ("legendre", "jacobi"):
        return (-1.0, 1.0)
    return (0.0, math.inf)


def quantile(dist: Distribution, u):
    """Generalized inverse CDF, vectorized over u in [0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0) or not np.all(np.isfinite(u)):
        raise DomainError(f"quantile argument must lie in [0, 1], got {u!r}")
    if isinstance(dist, Normal):
        return dist.mu + dist.sigma * special.ndtri(u)
    if isinstance(dist, Uniform):
        return dist.lo + u * (dist.hi - dist.lo)
    if isinstance(dist, Beta):
        return dist.lo + (dist.hi - dist.lo) * special.betaincinv(dist.alpha, dist.beta, u)
    if isinstance(dist, Exponential):
        return -np.log1p(-u) / dist.rate
    if isinstance(dist, Gamma):
        return dist.scale * special.gammaincinv(dist.shape, u)
    if isinstance(dist, Triangular):
        lo, mode, hi = dist.lo, dist.mode, dist.hi
        span = hi - lo
        f_mode = (mode - lo) / span
        left = lo + np.sqrt(np.clip(u, 0.0, 1.0) * span * (mode - lo))
        right = hi - np.sqrt(np.clip(1.0 - u, 0.0, 1.0) * span * (hi - mode))
        return np.where(u <= f_mode, left, right)
    if isinstance(dist, Discrete):
        cum = np.cumsum(dist.probs)
        cum[-1] = 1.0  # guard float drift so u = 1 stays in range
        idx = np.searchsorted(cum, u, side="left")
        return np.asarray(dist.values, dtype=float)[idx]
    raise ConfigError(f"unsupported distribution {type(dist).__name__}")


def _check_germ_domain(family: PolyFamily, germ) -> np.ndarray:
    g = np.asarray(germ, dtype=float)
    lo, hi = germ_support(family)
    bad = ~np.isfinite(g) | (g < lo) | (g > hi)
    if np.any(bad):
        offender = g[bad].flat[0] if g.ndim else float(g)
        raise DomainError(
            f"germ value {offender!r} outside {family.kind} support [{lo}, {hi}]"
        )
    return g


def to_physical(param: InputParameter | GermMap, germ):
    """Map germ values to physical units; rejects values outside the germ support."""
    gmap = param if isinstance(param, GermMap) else germ_for(param.dist)
    g = _check_germ_domain(gmap.family, germ)
    if isinstance(gmap.transform, Affine):
        return gmap.transform.shift + gmap.transform.scale * g
    return quantile(gmap.transform.dist, 0.5 * (g + 1.0))


def _param_stream(seed: int, index: int) -> Generator:
    """Independent counter-based stream keyed by (seed, parameter index)."""
    return Generator(Philox(key=np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)))


def _germ_from_uniform(family: PolyFamily, u: np.ndarray) -> np.ndarray:
    """Germ quantile transform; exactly one uniform consumed per variate."""
    if family.kind == "hermite":
        return special.ndtri(np.maximum(u, _U_FLOOR))
    if family.kind == "legendre":
        return 2.0 * u - 1.0
    if family.kind == "jacobi":
        # germ density (1-x)^a (1+x)^b on [-1,1]: (x+1)/2 ~ Beta(b+1, a+1)
        return 2.0 * special.betaincinv(family.beta + 1.0, family.alpha + 1.0, u) - 1.0
    if family.kind == "laguerre":
        return -np.log1p(-u)
    return special.gammaincinv(family.alpha + 1.0, u)  # genlaguerre


def sample_germ(spec: ProblemSpec, n: int, seed: int) -> np.ndarray:
    """(n, dim) germ sample matrix; column k comes from stream (seed, k)."""
    n = int(n)
    if n < 1:
        raise ConfigError(f"sample count must be >= 1, got {n}")
    out = np.empty((n, spec.dim))
    for k, gmap in enumerate(spec.germ_maps()):
        u = _param_stream(seed, k).random(n)
        out[:, k] = _germ_from_uniform(gmap.family, u)
    return out


def sample_physical(spec: ProblemSpec, n: int, seed: int) -> np.ndarray:
    """(n, dim) physical sample matrix via the exact germ transforms."""
    germ = sample_germ(spec, n, seed)
    out = np.empty_like(germ)
    for k, gmap in enumerate(spec.germ_maps()):
        out[:, k] = to_physical(gmap, germ[:, k])
    return out


_DIST_TAGS = {
    Normal: "normal",
    Uniform: "uniform",
    Beta: "beta",
    Exponential: "exponential",
    Gamma: "gamma",
    Triangular: "triangular",
    Discrete: "discrete",
}


def dist_to_dict(dist: Distribution) -> dict:
    tag = _DIST_TAGS[type(dist)]
    if isinstance(dist, Normal):
        return {"type": tag, "mu": dist.mu, "sigma": dist.sigma}
    if isinstance(dist, Uniform):
        return {"type": tag, "lo": dist.lo, "hi": dist.hi}
    if isinstance(dist, Beta):
        return {"type": tag, "alpha": dist.alpha, "beta": dist.beta, "lo": dist.lo, "hi": dist.hi}
    if isinstance(dist, Exponential):
        return {"type": tag, "rate": dist.rate}
    if isinstance(dist, Gamma):
        return {"type": tag, "shape": dist.shape, "scale": dist.scale}
    if isinstance(dist, Triangular):
        return {"type": tag, "lo": dist.lo, "mode": dist.mode, "hi": dist.hi}
    return {"type": tag, "values": list(dist.values), "probs": list(dist.probs)}


_DIST_FIELDS = {
    "normal": ("mu", "sigma"),
    "uniform": ("lo", "hi"),
    "beta": ("alpha", "beta", "lo", "hi"),
    "exponential": ("rate",),
    "gamma": ("shape", "scale"),
    "triangular": ("lo", "mode", "hi"),
    "discrete": ("values", "probs"),
}

_DIST_OPTIONAL = {"beta": {"lo": 0.0, "hi": 1.0}}


def dist_from_dict(data: dict, where: str = "dist") -> Distribution:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    tag = data.get("type")
    if tag not in _DIST_FIELDS:
        raise ConfigError(f"{where}.type: unknown distribution {tag!r}")
    fields = _DIST_FIELDS[tag]
    optional = _DIST_OPTIONAL.get(tag, {})
    unknown = set(data) - set(fields) - {"type"}
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)} for {tag}")
    kwargs = {}
    for f in fields:
        if f in data:
            kwargs[f] = data[f]
        elif f in optional:
            kwargs[f] = optional[f]
        else:
            raise ConfigError(f"{where}.{f}: required for {tag}")
    cls = {v: k for k, v in _DIST_TAGS.items()}[tag]
    try:
        if tag == "discrete":
            return cls(values=tuple(kwargs["values"]), probs=tuple(kwargs["probs"]))
        return cls(**{k: float(v) for k, v in kwargs.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def problem_to_dict(spec: ProblemSpec) -> dict:
    return {"params": [{"name": p.name, "dist": dist_to_dict(p.dist)} for p in spec.params]}


def problem_from_dict(data: dict, where: str = "problem") -> ProblemSpec:
    if not isinstance(data, dict) or set(data) != {"params"}:
        raise ConfigError(f"{where}: expected an object with a 'params' list")
    raw = data["params"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}.params: expected a nonempty list")
    params = []
    for i, item in enumerate(raw):
        here = f"{where}.params[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{here}: expected an object with 'name' and 'dist'")
        unknown = set(item) - {"name", "dist"}
        if unknown:
            raise ConfigError(f"{here}: unknown fields {sorted(unknown)}")
        for field in ("name", "dist"):
            if field not in item:
                raise ConfigError(f"{here}.{field}: required")
        name = item["name"]
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{here}.name: expected a nonempty string")
        params.append(InputParameter(name, dist_from_dict(item["dist"], f"{here}.dist")))
    try:
        return ProblemSpec(tuple(params))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
