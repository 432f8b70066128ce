"""Monte-Carlo size and power estimation.

One replication draws zero-mean group errors ``sigma_i * W_i``, bootstraps
the null distribution of every requested statistic once, and then, for
each point ``c`` of the power grid, evaluates the observed statistics on
``c * mu_i + sigma_i * W_i``.  The bootstrap only depends on the sample
variances, which do not move with ``c``, so one bootstrap per replication
serves the whole grid and all grid points share their random numbers.

Replication ``r`` reads its data from ``Seed(seed, (r, DATA, i))`` and its
bootstrap from ``Seed(seed, (r, BOOTSTRAP, i))``.  Replications are split
into chunks for a process pool and merged by index, so results do not
depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .distributions import DistributionSpec, Normal, Seed, group_draws
from .errors import ConfigError, ParameterDomainError, TreeAnovaError
from .estimation import ConvergenceConfig, GroupedData, as_stats
from .procedures import (
    ALL_TESTS,
    LRT,
    MAXD,
    MIND,
    BootstrapConfig,
    bootstrap_null,
    d_statistics,
    lrt_statistic,
    parse_tests,
    reject,
)

log = logging.getLogger(__name__)

THREADS_ENV = "TREE_ANOVA_THREADS"
CSV_FIELDS = (
    "k", "n_vec", "sigma2_vec", "mu_vec", "c", "distribution", "test",
    "alpha", "P", "M", "rejection_rate", "mc_se", "seed",
)

# Power-curve multipliers 1.0, 1.3, ..., 6.1.
STANDARD_C_GRID = tuple(round(1.0 + 0.3 * i, 1) for i in range(18))


@dataclass(frozen=True)
class SimulationSpec:
    mu: tuple[float, ...]
    sigma2: tuple[float, ...]
    n: tuple[int, ...]
    distribution: DistributionSpec = field(default_factory=Normal)
    tests: tuple[str, ...] = ALL_TESTS
    replications: int = 2000
    bootstrap: int = 1000
    alpha: float = 0.05
    seed: int = 0
    c_grid: tuple[float, ...] | None = None
    tol_exponent: int = 6

    def __post_init__(self):
        try:
            mu = tuple(float(x) for x in self.mu)
            sigma2 = tuple(float(x) for x in self.sigma2)
            n = tuple(int(x) for x in self.n)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mu, sigma2 and n must be numeric vectors: {exc}") from None
        if not (len(mu) == len(sigma2) == len(n)) or len(mu) < 2:
            raise ConfigError(
                f"mu, sigma2 and n must have equal length k+1 >= 2; got {len(mu)}, {len(sigma2)}, {len(n)}"
            )
        if any(not math.isfinite(m) for m in mu):
            raise ConfigError("mu must be finite")
        if any(not (math.isfinite(s) and s > 0) for s in sigma2):
            raise ConfigError("sigma2 entries must be positive")
        if any(ni < 2 for ni in n):
            raise ConfigError("every group size n must be >= 2")
        if int(self.replications) != self.replications or self.replications < 100:
            raise ConfigError(f"replications must be an integer >= 100, got {self.replications}")
        try:
            tests = parse_tests(self.tests)
            BootstrapConfig(self.bootstrap, self.alpha, Seed(self.seed))
            ConvergenceConfig(self.tol_exponent)
            self.distribution.moments()
        except (ParameterDomainError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        c_grid = None
        if self.c_grid is not None:
            c_grid = tuple(float(c) for c in self.c_grid)
            if not c_grid or any(not math.isfinite(c) for c in c_grid):
                raise ConfigError("c_grid must be a non-empty list of finite numbers")
        for name, value in (("mu", mu), ("sigma2", sigma2), ("n", n), ("tests", tests), ("c_grid", c_grid)):
            object.__setattr__(self, name, value)

    @property
    def k(self) -> int:
        return len(self.mu) - 1

    @property
    def is_null(self) -> bool:
        return max(self.mu) == min(self.mu)

    def grid(self) -> tuple[float, ...]:
        return self.c_grid if self.c_grid is not None else (1.0,)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "SimulationSpec":
        """Parse a config-file cell; errors name the offending field."""
        if not isinstance(obj, Mapping):
            raise ConfigError("simulation spec must be a JSON object")
        known = {
            "mu", "sigma2", "sigma", "n", "distribution", "tests", "replications",
            "bootstrap", "alpha", "seed", "c_grid", "tol_exponent",
        }
        extra = sorted(set(obj) - known)
        if extra:
            raise ConfigError(f"unknown field(s) {extra}")
        kwargs: dict[str, Any] = {}
        for req in ("mu", "n"):
            if req not in obj:
                raise ConfigError(f"missing required field '{req}'")
        if ("sigma2" in obj) == ("sigma" in obj):
            raise ConfigError("give exactly one of 'sigma2' or 'sigma'")
        for key in ("mu", "n", "sigma2", "sigma", "c_grid"):
            if key in obj and obj[key] is not None:
                val = obj[key]
                if not isinstance(val, (list, tuple)) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in val
                ):
                    raise ConfigError(f"field '{key}' must be a list of numbers")
                kwargs[key] = tuple(val)
        if "sigma" in kwargs:
            sig = kwargs.pop("sigma")
            if any(s <= 0 for s in sig):
                raise ConfigError("field 'sigma' must be positive")
            kwargs["sigma2"] = tuple(s * s for s in sig)
        if "distribution" in obj:
            try:
                kwargs["distribution"] = DistributionSpec.from_dict(obj["distribution"])
            except ParameterDomainError as exc:
                raise ConfigError(f"field 'distribution': {exc}") from None
        for key, typ in (("replications", int), ("bootstrap", int), ("seed", int), ("tol_exponent", int), ("alpha", float)):
            if key in obj:
                val = obj[key]
                if isinstance(val, bool) or not isinstance(val, (int, float)) or (typ is int and int(val) != val):
                    raise ConfigError(f"field '{key}' must be {'an integer' if typ is int else 'a number'}")
                kwargs[key] = typ(val)
        if "tests" in obj:
            try:
                kwargs["tests"] = parse_tests(obj["tests"])
            except ParameterDomainError as exc:
                raise ConfigError(f"field 'tests': {exc}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mu": list(self.mu), "sigma2": list(self.sigma2), "n": list(self.n),
            "distribution": self.distribution.to_dict(), "tests": list(self.tests),
            "replications": self.replications, "bootstrap": self.bootstrap, "alpha": self.alpha,
            "seed": self.seed, "c_grid": None if self.c_grid is None else list(self.c_grid),
            "tol_exponent": self.tol_exponent,
        }


@dataclass(frozen=True)
class ResultRow:
    c: float
    test: str
    rejections: int
    valid: int

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.valid if self.valid else float("nan")

    @property
    def mc_se(self) -> float:
        r = self.rejection_rate
        return math.sqrt(r * (1.0 - r) / self.valid) if self.valid else float("nan")


@dataclass(frozen=True)
class SimulationResult:
    spec: SimulationSpec
    rows: tuple[ResultRow, ...]
    replications_failed: int
    elapsed: float

    def rate(self, test: str, c: float = 1.0) -> float:
        for row in self.rows:
            if row.test == test and row.c == c:
                return row.rejection_rate
        raise KeyError((test, c))

    def csv_rows(self) -> list[dict[str, str]]:
        s = self.spec
        return [
            {
                "k": str(s.k),
                "n_vec": _vec(s.n),
                "sigma2_vec": _vec(s.sigma2),
                "mu_vec": _vec(s.mu),
                "c": repr(row.c),
                "distribution": s.distribution.label(),
                "test": row.test,
                "alpha": repr(s.alpha),
                "P": str(s.replications),
                "M": str(s.bootstrap),
                "rejection_rate": repr(row.rejection_rate),
                "mc_se": repr(row.mc_se),
                "seed": str(s.seed),
            }
            for row in self.rows
        ]


def _vec(values) -> str:
    return "|".join(repr(v) for v in values)


def write_csv(results: Sequence[SimulationResult], stream=None) -> str:
    """Render results in the CSV schema; also writes to ``stream`` when given."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for result in results:
        writer.writerows(result.csv_rows())
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# -- engine -------------------------------------------------------------------


def replicate(spec: SimulationSpec, r: int) -> np.ndarray:
    """Outcomes of replication ``r``: ``(len(grid), len(tests))`` with 1 reject, 0 accept, -1 failed."""
    grid = spec.grid()
    out = np.full((len(grid), len(spec.tests)), -1, dtype=np.int8)
    seed = Seed(spec.seed).child(r)
    sds = [math.sqrt(s) for s in spec.sigma2]
    errors = group_draws(spec.distribution, sds, spec.n, seed)
    cfg = ConvergenceConfig(spec.tol_exponent)
    try:
        null_dist = bootstrap_null(
            as_stats(GroupedData(tuple(errors))), BootstrapConfig(spec.bootstrap, spec.alpha, seed), cfg, spec.tests
        )
    except TreeAnovaError as exc:
        log.debug("replication %d: bootstrap failed: %s", r, exc)
        return out
    crit = {t: null_dist.critical_value(t, spec.alpha) for t in spec.tests}
    for gi, c in enumerate(grid):
        data = GroupedData(tuple(c * m + e for m, e in zip(spec.mu, errors)))
        observed: dict[str, float] = {}
        try:
            if MAXD in spec.tests or MIND in spec.tests:
                d = d_statistics(data)
                observed[MAXD] = float(d.max())
                observed[MIND] = float(d.min())
        except TreeAnovaError as exc:
            log.debug("replication %d, c=%s: D statistics failed: %s", r, c, exc)
        if LRT in spec.tests:
            try:
                observed[LRT] = lrt_statistic(data, cfg)
            except TreeAnovaError as exc:
                log.debug("replication %d, c=%s: LRT failed: %s", r, c, exc)
        for ti, test in enumerate(spec.tests):
            if test in observed:
                out[gi, ti] = reject(test, observed[test], crit[test])
    return out


def _run_chunk(spec: SimulationSpec, start: int, stop: int) -> np.ndarray:
    return np.stack([replicate(spec, r) for r in range(start, stop)])


def default_workers() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return n


def _chunks(total: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(total / (workers * 4)))
    return [(i, min(i + size, total)) for i in range(0, total, size)]


def _simulate(spec: SimulationSpec, workers: int | None) -> SimulationResult:
    workers = default_workers() if workers is None else max(1, int(workers))
    env_cap = os.environ.get(THREADS_ENV)
    if env_cap:
        workers = min(workers, default_workers())
    t0 = time.perf_counter()
    P = spec.replications
    if workers == 1:
        outcomes = _run_chunk(spec, 0, P)
    else:
        chunks = _chunks(P, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [spec] * len(chunks), *zip(*chunks)))
        outcomes = np.concatenate(parts)
    rows = []
    for gi, c in enumerate(spec.grid()):
        for ti, test in enumerate(spec.tests):
            col = outcomes[:, gi, ti]
            valid = int(np.sum(col >= 0))
            rows.append(ResultRow(c, test, int(np.sum(col == 1)), valid))
    failed = int(np.sum(np.any(outcomes < 0, axis=(1, 2))))
    return SimulationResult(spec, tuple(rows), failed, time.perf_counter() - t0)


def estimate_size(spec: SimulationSpec, workers: int | None = None) -> SimulationResult:
    """Empirical size under a common mean; ``spec.mu`` must be constant."""
    if not spec.is_null:
        raise ConfigError(f"size estimation needs equal means, got mu={spec.mu}")
    if spec.c_grid is not None:
        raise ConfigError("c_grid applies to power estimation only")
    return _simulate(spec, workers)


def estimate_power(spec: SimulationSpec, workers: int | None = None) -> SimulationResult:
    """Empirical power at ``c * mu`` for every ``c`` in the grid (``c = 1`` without a grid)."""
    mu = spec.mu
    if any(m < mu[0] for m in mu[1:]):
        raise ConfigError(f"mu must satisfy mu_0 <= mu_i for all i, got {mu}")
    if not any(m > mu[0] for m in mu[1:]):
        raise ConfigError(f"mu needs at least one treatment strictly above the control, got {mu}")
    if any(c < 0 for c in spec.grid()):
        raise ConfigError("c_grid multipliers must be non-negative")
    return _simulate(spec, workers)


@dataclass(frozen=True)
class GridResult:
    results: tuple[SimulationResult | None, ...]
    errors: tuple[str | None, ...]

    def ok(self) -> list[SimulationResult]:
        return [r for r in self.results if r is not None]


def run_grid(specs: Sequence[SimulationSpec], workers: int | None = None) -> GridResult:
    """Run every cell; a failing cell records its error and the rest proceed.

    Cells with a constant mean vector are size cells, all others power cells.
    """
    if not specs:
        raise ConfigError("grid needs at least one simulation spec")
    results: list[SimulationResult | None] = []
    errors: list[str | None] = []
    for i, spec in enumerate(specs):
        try:
            fn = estimate_size if spec.is_null and spec.c_grid is None else estimate_power
            results.append(fn(spec, workers))
            errors.append(None)
        except TreeAnovaError as exc:
            log.warning("grid cell %d failed: %s", i, exc)
            results.append(None)
            errors.append(str(exc))
    return GridResult(tuple(results), tuple(errors))
