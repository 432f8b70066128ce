"""Parametric-bootstrap tests of equal means against the tree order.

Three statistics are supported:

``LRT``
    The likelihood ratio ``prod_i (sigma2_tree_i / sigma2_null_i) ** (n_i / 2)``;
    small values are evidence against equality.
``MaxD`` / ``MinD``
    The largest / smallest standardized treatment-minus-control difference
    ``(xbar_i - xbar_0) / sqrt(S_i**2 / n_i + S_0**2 / n_0)``; large values
    are evidence against equality.

Null distributions come from resampling group ``i`` as ``n_i`` draws from
``N(0, S_i**2)``.  All statistics are location and scale free, so the zero
bootstrap mean loses nothing.  The ``M`` resamples are drawn and evaluated
as one vectorized batch, one random stream per group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .distributions import BOOTSTRAP, Seed, as_seed
from .errors import BootstrapInstabilityError, DegenerateVarianceError, ParameterDomainError
from .estimation import (
    ConvergenceConfig,
    GroupedData,
    NULL,
    RestrictedMleResult,
    SummaryStats,
    as_stats,
    check_condition1,
    fit_batch,
    fit_tree_batch,
    mle_null,
    mle_tree,
)

LRT = "LRT"
MAXD = "MaxD"
MIND = "MinD"
ALL_TESTS = (LRT, MAXD, MIND)

MAX_REDRAWS = 100
MAX_NONCONVERGED_FRACTION = 0.01


def parse_tests(names: Union[str, Iterable[str]]) -> tuple[str, ...]:
    """Normalize ``"lrt,maxd"`` or ``["LRT", "MinD"]`` to canonical names in canonical order."""
    if isinstance(names, str):
        names = [t for t in names.split(",") if t.strip()]
    lookup = {t.lower(): t for t in ALL_TESTS}
    wanted = set()
    for name in names:
        key = name.strip().lower().replace("-", "")
        if key not in lookup:
            raise ParameterDomainError(f"unknown test {name!r}; choose from lrt, maxd, mind")
        wanted.add(lookup[key])
    if not wanted:
        raise ParameterDomainError("no tests selected")
    return tuple(t for t in ALL_TESTS if t in wanted)


def _floor_rank(x: float) -> int:
    # alpha*M is often an integer spoiled by rounding (0.29*100 = 28.999...)
    return math.floor(x + 1e-9)


def lrt_rank(alpha: float, draws: int) -> int:
    """1-indexed ascending rank of the LRT critical value: ``floor(alpha*M)``."""
    return _floor_rank(alpha * draws)


def d_rank(alpha: float, draws: int) -> int:
    """1-indexed ascending rank of the Max-D/Min-D critical value: ``floor((1-alpha)*M)``."""
    return _floor_rank((1.0 - alpha) * draws)


@dataclass(frozen=True)
class BootstrapConfig:
    draws: int = 5000
    alpha: float = 0.05
    seed: Seed = field(default_factory=lambda: Seed(0))

    def __post_init__(self):
        object.__setattr__(self, "seed", as_seed(self.seed))
        if not 0.0 < self.alpha < 1.0:
            raise ParameterDomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.draws) != self.draws or self.draws < 100:
            raise ParameterDomainError(f"bootstrap draws must be an integer >= 100, got {self.draws}")
        if lrt_rank(self.alpha, self.draws) < 1:
            raise ParameterDomainError(
                f"floor(alpha * draws) must be >= 1; alpha={self.alpha} with draws={self.draws} gives 0"
            )


@dataclass(frozen=True)
class TestReport:
    test: str
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    alpha: float
    draws: int
    per_treatment_d: tuple[float, ...] | None = None
    ci_lower: tuple[float, ...] | None = None
    mle_null: RestrictedMleResult | None = None
    mle_tree: RestrictedMleResult | None = None
    condition1_warnings: tuple[str, ...] = ()
    bootstrap_redrawn: int = 0
    bootstrap_nonconverged: int = 0

    __test__ = False  # keep pytest from collecting this class

    @property
    def decision(self) -> str:
        return "Rejected" if self.reject else "Not rejected"

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "decision": self.decision,
            "alpha": self.alpha,
            "draws": self.draws,
            "per_treatment_d": None if self.per_treatment_d is None else list(self.per_treatment_d),
            "ci_lower": None if self.ci_lower is None else list(self.ci_lower),
            "mle_null": None if self.mle_null is None else self.mle_null.to_dict(),
            "mle_tree": None if self.mle_tree is None else self.mle_tree.to_dict(),
            "condition1_warnings": list(self.condition1_warnings),
            "bootstrap_redrawn": self.bootstrap_redrawn,
            "bootstrap_nonconverged": self.bootstrap_nonconverged,
        }


# -- statistics ---------------------------------------------------------------


def _log_lambda(n, sigma2_tree, sigma2_null):
    return 0.5 * np.sum(n * (np.log(sigma2_tree) - np.log(sigma2_null)), axis=-1)


def lrt_fits(data, cfg: ConvergenceConfig | None = None) -> tuple[float, RestrictedMleResult, RestrictedMleResult]:
    """``(lambda, null fit, tree fit)`` for one dataset."""
    cfg = cfg or ConvergenceConfig()
    stats = as_stats(data)
    null = mle_null(stats, cfg)
    tree = mle_tree(stats, cfg, null=null)
    lam = math.exp(float(_log_lambda(stats.n, tree.sigma2_hat, null.sigma2_hat)))
    return lam, null, tree


def lrt_statistic(data: Union[GroupedData, SummaryStats], cfg: ConvergenceConfig | None = None) -> float:
    """Likelihood ratio of the null against the tree order, in ``(0, 1]``."""
    return lrt_fits(data, cfg)[0]


def _standard_errors(stats: SummaryStats) -> np.ndarray:
    se2 = stats.unbiased_var[1:] / stats.n[1:] + stats.unbiased_var[0] / stats.n[0]
    if np.any(se2 <= 0):
        bad = (np.flatnonzero(se2 <= 0) + 1).tolist()
        raise DegenerateVarianceError(f"zero standard error for treatment(s) {bad}")
    return np.sqrt(se2)


def d_statistics(stats: Union[GroupedData, SummaryStats]) -> np.ndarray:
    """Standardized treatment-minus-control differences ``(D_1, ..., D_k)``."""
    stats = as_stats(stats)
    return (stats.mean[1:] - stats.mean[0]) / _standard_errors(stats)


def simultaneous_ci(stats: Union[GroupedData, SummaryStats], d_max_critical: float) -> np.ndarray:
    """Lower limits of one-sided simultaneous intervals for ``mu_i - mu_0``; upper limits are infinite."""
    if not math.isfinite(d_max_critical):
        raise ParameterDomainError("critical value must be finite")
    stats = as_stats(stats)
    return stats.mean[1:] - stats.mean[0] - d_max_critical * _standard_errors(stats)


# -- bootstrap ----------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapSample:
    """``M`` resampled datasets in summary form, each array ``(M, k+1)``."""

    n: np.ndarray
    mean: np.ndarray
    biased_var: np.ndarray
    redrawn: int

    @property
    def unbiased_var(self) -> np.ndarray:
        return self.biased_var * self.n / (self.n - 1)


def draw_bootstrap(stats: SummaryStats, draws: int, seed: Seed) -> BootstrapSample:
    """Resample group ``i`` as ``n_i`` draws from ``N(0, S_i**2)``, ``draws`` times.

    Group ``i`` reads from ``seed.child(BOOTSTRAP, i)``.  A resample whose
    group variance is exactly zero is redrawn from the same stream, at most
    ``MAX_REDRAWS`` times.
    """
    if np.any(stats.unbiased_var <= 0):
        bad = np.flatnonzero(stats.unbiased_var <= 0).tolist()
        raise DegenerateVarianceError(f"group(s) {bad} have zero sample variance; cannot bootstrap")
    means = np.empty((draws, stats.n.size))
    vars_ = np.empty_like(means)
    redrawn = 0
    for i, (ni, S2) in enumerate(zip(stats.n, stats.unbiased_var)):
        rng = seed.child(BOOTSTRAP, i).generator()
        sd = math.sqrt(S2)
        x = sd * rng.standard_normal((draws, ni))
        m = x.mean(axis=1)
        v = np.mean((x - m[:, None]) ** 2, axis=1)
        for _ in range(MAX_REDRAWS):
            bad = np.flatnonzero(v <= 0)
            if bad.size == 0:
                break
            redrawn += bad.size
            x = sd * rng.standard_normal((bad.size, ni))
            m[bad] = x.mean(axis=1)
            v[bad] = np.mean((x - m[bad, None]) ** 2, axis=1)
        else:
            raise BootstrapInstabilityError(
                f"group {i}: degenerate resamples persisted after {MAX_REDRAWS} redraws", int(bad.size), draws
            )
        means[:, i] = m
        vars_[:, i] = v
    return BootstrapSample(stats.n, means, vars_, redrawn)


def bootstrap_lrt(sample: BootstrapSample, cfg: ConvergenceConfig) -> tuple[np.ndarray, int]:
    """Bootstrap likelihood ratios and the number of resamples whose fits did not converge."""
    null = fit_batch(NULL, sample.n, sample.mean, sample.biased_var, cfg)
    tree = fit_tree_batch(sample.n, sample.mean, sample.biased_var, cfg, null)
    failed = int(np.sum(~(null.converged & tree.converged)))
    draws = sample.mean.shape[0]
    if failed > MAX_NONCONVERGED_FRACTION * draws:
        raise BootstrapInstabilityError(
            f"{failed} of {draws} bootstrap likelihood fits did not converge", failed, draws
        )
    return np.exp(_log_lambda(sample.n, tree.sigma2, null.sigma2)), failed


def bootstrap_d(sample: BootstrapSample) -> np.ndarray:
    """Bootstrap ``D*`` matrix of shape ``(M, k)``."""
    S2 = sample.unbiased_var
    n = sample.n
    se = np.sqrt(S2[:, 1:] / n[1:] + S2[:, :1] / n[0])
    return (sample.mean[:, 1:] - sample.mean[:, :1]) / se


@dataclass(frozen=True)
class NullDistribution:
    """Sorted bootstrap statistics for each requested test."""

    statistics: dict[str, np.ndarray]
    redrawn: int
    nonconverged: int

    def critical_value(self, test: str, alpha: float) -> float:
        values = self.statistics[test]
        rank = lrt_rank(alpha, values.size) if test == LRT else d_rank(alpha, values.size)
        return float(values[rank - 1])

    def p_value(self, test: str, observed: float) -> float:
        values = self.statistics[test]
        if test == LRT:
            count = np.searchsorted(values, observed, side="right")
        else:
            count = values.size - np.searchsorted(values, observed, side="left")
        return (1.0 + count) / (values.size + 1.0)


def bootstrap_null(
    stats: SummaryStats, boot: BootstrapConfig, cfg: ConvergenceConfig | None = None, tests: Sequence[str] = ALL_TESTS
) -> NullDistribution:
    """Draw one set of resamples and evaluate every requested statistic on it."""
    cfg = cfg or ConvergenceConfig()
    sample = draw_bootstrap(stats, boot.draws, boot.seed)
    out: dict[str, np.ndarray] = {}
    failed = 0
    if LRT in tests:
        lam, failed = bootstrap_lrt(sample, cfg)
        out[LRT] = np.sort(lam)
    if MAXD in tests or MIND in tests:
        d = bootstrap_d(sample)
        if MAXD in tests:
            out[MAXD] = np.sort(d.max(axis=1))
        if MIND in tests:
            out[MIND] = np.sort(d.min(axis=1))
    return NullDistribution(out, sample.redrawn, failed)


def reject(test: str, statistic: float, critical: float) -> bool:
    return statistic < critical if test == LRT else statistic > critical


# -- full procedures ----------------------------------------------------------


def run_tests(
    data: Union[GroupedData, SummaryStats],
    boot: BootstrapConfig | None = None,
    cfg: ConvergenceConfig | None = None,
    tests: Union[str, Sequence[str]] = ALL_TESTS,
) -> dict[str, TestReport]:
    """Run the selected tests on one dataset, sharing a single bootstrap draw.

    Each report equals what the corresponding ``run_*`` function returns
    for the same configuration.
    """
    boot = boot or BootstrapConfig()
    cfg = cfg or ConvergenceConfig()
    tests = parse_tests(tests)
    stats = as_stats(data)
    warnings = tuple(check_condition1(stats).warnings())
    null_dist = bootstrap_null(stats, boot, cfg, tests)
    reports = {}
    common = dict(alpha=boot.alpha, draws=boot.draws, bootstrap_redrawn=null_dist.redrawn)
    if LRT in tests:
        lam, null, tree = lrt_fits(stats, cfg)
        crit = null_dist.critical_value(LRT, boot.alpha)
        reports[LRT] = TestReport(
            LRT, lam, crit, null_dist.p_value(LRT, lam), reject(LRT, lam, crit),
            mle_null=null, mle_tree=tree, condition1_warnings=warnings,
            bootstrap_nonconverged=null_dist.nonconverged, **common,
        )
    if MAXD in tests or MIND in tests:
        d = d_statistics(stats)
        for test, stat in ((MAXD, float(d.max())), (MIND, float(d.min()))):
            if test not in tests:
                continue
            crit = null_dist.critical_value(test, boot.alpha)
            ci = tuple(simultaneous_ci(stats, crit).tolist()) if test == MAXD else None
            reports[test] = TestReport(
                test, stat, crit, null_dist.p_value(test, stat), reject(test, stat, crit),
                per_treatment_d=tuple(d.tolist()), ci_lower=ci, **common,
            )
    return reports


def run_lrt(data, boot: BootstrapConfig | None = None, cfg: ConvergenceConfig | None = None) -> TestReport:
    """Bootstrap likelihood ratio test; rejects when the ratio falls below its critical value."""
    return run_tests(data, boot, cfg, (LRT,))[LRT]


def run_maxd(data, boot: BootstrapConfig | None = None) -> TestReport:
    """Bootstrap Max-D test, with simultaneous lower confidence limits."""
    return run_tests(data, boot, None, (MAXD,))[MAXD]


def run_mind(data, boot: BootstrapConfig | None = None) -> TestReport:
    """Bootstrap Min-D test."""
    return run_tests(data, boot, None, (MIND,))[MIND]
