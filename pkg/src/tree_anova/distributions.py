"""Seeded sampling from the error laws used in size, power and robustness studies.

Every draw is keyed by a :class:`Seed`, a root integer plus a derivation
path.  The path is fed to :class:`numpy.random.SeedSequence` as its spawn
key, so a given ``(root, path)`` always maps to the same independent
stream no matter which process or thread asks for it.

Robustness studies shift and scale *standardized* draws,
``mean + sd * (Y - E[Y]) / SD[Y]``, using the closed-form moments of each
law rather than the moments of the sample at hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np

from .errors import ParameterDomainError, UnsupportedMomentsError

# Purpose tags for stream derivation.
DATA = 0
BOOTSTRAP = 1

_MAX_ROOT = 2**64 - 1


@dataclass(frozen=True)
class Seed:
    """A root seed plus a derivation path of non-negative integers."""

    root: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.root) <= _MAX_ROOT:
            raise ParameterDomainError(f"seed root must fit in 64 unsigned bits, got {self.root}")
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ParameterDomainError(f"seed path entries must be non-negative, got {path}")
        object.__setattr__(self, "root", int(self.root))
        object.__setattr__(self, "path", path)

    def child(self, *indices: int) -> "Seed":
        return Seed(self.root, self.path + tuple(indices))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.root, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def as_seed(seed: Seed | int) -> Seed:
    return seed if isinstance(seed, Seed) else Seed(int(seed))


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ParameterDomainError(f"{name} must be positive and finite, got {value}")
    return value


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterDomainError(f"{name} must be finite, got {value}")
    return value


class DistributionSpec:
    """Base class for the supported error laws.

    Subclasses are frozen dataclasses that validate their parameters on
    construction and implement :meth:`_draw` and :meth:`moments`.
    """

    kind: ClassVar[str]

    def _draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> tuple[float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def label(self) -> str:
        """Compact, comma-free description for CSV cells."""
        body = ";".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind}({body})"

    @staticmethod
    def from_dict(obj: Mapping[str, Any]) -> "DistributionSpec":
        """Build a spec from its config-file form, e.g. ``{"kind": "laplace", "location": 0, "scale": 1}``."""
        if not isinstance(obj, Mapping) or "kind" not in obj:
            raise ParameterDomainError("distribution must be an object with a 'kind' field")
        kind = obj["kind"]
        cls = _KINDS.get(kind)
        if cls is None:
            raise ParameterDomainError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
        params = {k: v for k, v in obj.items() if k != "kind"}
        try:
            if cls is NormalMixture:
                return NormalMixture(tuple(tuple(c) for c in params.pop("components")), **params)
            return cls(**params)
        except (TypeError, KeyError) as exc:
            raise ParameterDomainError(f"bad parameters for {kind!r}: {exc}") from None


@dataclass(frozen=True)
class Normal(DistributionSpec):
    mean: float = 0.0
    variance: float = 1.0
    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        _finite("mean", self.mean)
        _positive("variance", self.variance)

    def _draw(self, rng, n):
        return self.mean + math.sqrt(self.variance) * rng.standard_normal(n)

    def moments(self):
        return float(self.mean), float(self.variance)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class SkewNormal(DistributionSpec):
    location: float = 0.0
    scale: float = 1.0
    shape: float = 0.0
    kind: ClassVar[str] = "skew-normal"

    def __post_init__(self):
        _finite("location", self.location)
        _positive("scale", self.scale)
        _finite("shape", self.shape)

    @property
    def delta(self) -> float:
        return self.shape / math.sqrt(1.0 + self.shape**2)

    def _draw(self, rng, n):
        # xi + omega * (delta*|U0| + sqrt(1 - delta^2)*U1), U0, U1 iid N(0, 1)
        u = rng.standard_normal((2, n))
        d = self.delta
        return self.location + self.scale * (d * np.abs(u[0]) + math.sqrt(1.0 - d * d) * u[1])

    def moments(self):
        d = self.delta
        mean = self.location + self.scale * d * math.sqrt(2.0 / math.pi)
        var = self.scale**2 * (1.0 - 2.0 * d * d / math.pi)
        return mean, var

    def to_dict(self):
        return {"kind": self.kind, "location": self.location, "scale": self.scale, "shape": self.shape}


@dataclass(frozen=True)
class StudentT(DistributionSpec):
    df: float = 3.0
    kind: ClassVar[str] = "student-t"

    def __post_init__(self):
        _positive("df", self.df)

    def _draw(self, rng, n):
        return rng.standard_t(self.df, n)

    def moments(self):
        if self.df <= 2:
            raise UnsupportedMomentsError(f"student-t with df={self.df} has infinite variance (need df > 2)")
        return 0.0, self.df / (self.df - 2.0)

    def to_dict(self):
        return {"kind": self.kind, "df": self.df}


@dataclass(frozen=True)
class Laplace(DistributionSpec):
    location: float = 0.0
    scale: float = 1.0
    kind: ClassVar[str] = "laplace"

    def __post_init__(self):
        _finite("location", self.location)
        _positive("scale", self.scale)

    def _draw(self, rng, n):
        return rng.laplace(self.location, self.scale, n)

    def moments(self):
        return float(self.location), 2.0 * self.scale**2

    def to_dict(self):
        return {"kind": self.kind, "location": self.location, "scale": self.scale}


@dataclass(frozen=True)
class NormalMixture(DistributionSpec):
    """Finite mixture of normals; ``components`` holds ``(weight, mean, variance)`` triples."""

    components: tuple[tuple[float, float, float], ...] = field(default=((1.0, 0.0, 1.0),))
    kind: ClassVar[str] = "normal-mixture"

    def __post_init__(self):
        comps = tuple(tuple(float(x) for x in c) for c in self.components)
        if not comps or any(len(c) != 3 for c in comps):
            raise ParameterDomainError("mixture components must be non-empty (weight, mean, variance) triples")
        for w, m, v in comps:
            _positive("mixture weight", w)
            _finite("mixture mean", m)
            _positive("mixture variance", v)
        total = sum(c[0] for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ParameterDomainError(f"mixture weights must sum to 1, got {total!r}")
        object.__setattr__(self, "components", comps)

    def _draw(self, rng, n):
        w, m, v = (np.array(col) for col in zip(*self.components))
        which = rng.choice(len(w), size=n, p=w / w.sum())
        return m[which] + np.sqrt(v[which]) * rng.standard_normal(n)

    def moments(self):
        mean = sum(w * m for w, m, _ in self.components)
        second = sum(w * (v + m * m) for w, m, v in self.components)
        return mean, second - mean * mean

    def to_dict(self):
        return {"kind": self.kind, "components": [list(c) for c in self.components]}

    def label(self):
        body = "+".join(f"{w}*N({m};{v})" for w, m, v in self.components)
        return f"{self.kind}({body})"


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float = 1.0
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate)

    def _draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def moments(self):
        return 1.0 / self.rate, 1.0 / self.rate**2

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate}


_KINDS: dict[str, type[DistributionSpec]] = {
    cls.kind: cls for cls in (Normal, SkewNormal, StudentT, Laplace, NormalMixture, Exponential)
}


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n must be an integer >= 1, got {n}")
    return int(n)


def sample(spec: DistributionSpec, n: int, seed: Seed | int) -> np.ndarray:
    """Draw ``n`` iid values from ``spec``; deterministic in ``seed``."""
    n = _check_n(n)
    return spec._draw(as_seed(seed).generator(), n)


def theoretical_moments(spec: DistributionSpec) -> tuple[float, float]:
    """Closed-form ``(mean, variance)`` of ``spec``."""
    return spec.moments()


def standardized(spec: DistributionSpec, n: int, seed: Seed | int) -> np.ndarray:
    """Draws from ``spec`` centred and scaled by its theoretical moments."""
    mean, var = spec.moments()
    return (sample(spec, n, seed) - mean) / math.sqrt(var)


def sample_standardized_shifted(
    spec: DistributionSpec, mean: float, sd: float, n: int, seed: Seed | int
) -> np.ndarray:
    """Draws with population mean ``mean`` and population sd ``sd`` and the shape of ``spec``."""
    _finite("mean", mean)
    _positive("sd", sd)
    return mean + sd * standardized(spec, n, seed)


def group_draws(
    spec: DistributionSpec, sds: Sequence[float], n: Sequence[int], seed: Seed
) -> list[np.ndarray]:
    """Zero-mean draws ``sd_i * W_i`` for every group, one stream per group.

    Group ``i`` uses ``seed.child(DATA, i)``, so its draws never depend on
    the other groups.
    """
    return [sd * standardized(spec, ni, seed.child(DATA, i)) for i, (sd, ni) in enumerate(zip(sds, n))]
