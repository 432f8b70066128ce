"""Maximum likelihood under the common-mean null and under the tree order.

Both estimators alternate between a mean step and a variance step.  Given
variances, the mean step maximizes the likelihood exactly (a weighted mean
under the null, a tree-order isotonic projection under the alternative);
given means, each variance is ``(1/n_i) * sum_j (x_ij - mu_i)**2``, which
equals ``s_i**2 + (xbar_i - mu_i)**2``.  Every step therefore needs only the
per-group count, mean and biased variance, and the same vectorized engine
serves a single dataset and a whole batch of bootstrap resamples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateLikelihoodError,
    InsufficientDataError,
    ParameterDomainError,
)
from .isotonic import tree_isotonic_batch

VARIANCE_FLOOR = 1e-300
NULL = "null"
TREE = "tree"


@dataclass(frozen=True)
class GroupedData:
    """Raw observations; ``groups[0]`` is the control."""

    groups: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=float).ravel() for g in self.groups)
        if len(groups) < 2:
            raise InsufficientDataError("need a control and at least one treatment (k >= 1)")
        for i, g in enumerate(groups):
            if g.size < 2:
                raise InsufficientDataError(f"group {i} has {g.size} observation(s); at least 2 required")
            if not np.all(np.isfinite(g)):
                raise ParameterDomainError(f"group {i} contains non-finite observations")
        if self.labels is not None and len(self.labels) != len(groups):
            raise ParameterDomainError("labels must match the number of groups")
        object.__setattr__(self, "groups", groups)

    @property
    def k(self) -> int:
        return len(self.groups) - 1

    def shifted(self, c: float) -> "GroupedData":
        return GroupedData(tuple(g + c for g in self.groups), self.labels)

    def scaled(self, c: float) -> "GroupedData":
        return GroupedData(tuple(g * c for g in self.groups), self.labels)


@dataclass(frozen=True)
class SummaryStats:
    n: np.ndarray
    mean: np.ndarray
    biased_var: np.ndarray
    unbiased_var: np.ndarray

    @property
    def k(self) -> int:
        return self.n.size - 1

    @classmethod
    def from_unbiased(cls, n, mean, unbiased_var) -> "SummaryStats":
        """Build from published ``(n_i, xbar_i, S_i**2)`` columns."""
        n = np.asarray(n, dtype=int)
        mean = np.asarray(mean, dtype=float)
        S2 = np.asarray(unbiased_var, dtype=float)
        if not (n.shape == mean.shape == S2.shape) or n.ndim != 1 or n.size < 2:
            raise ParameterDomainError("n, mean and variance must be equal-length vectors of length >= 2")
        if np.any(n < 2):
            raise InsufficientDataError("every group needs at least 2 observations")
        if np.any(S2 < 0):
            raise ParameterDomainError("variances must be non-negative")
        return cls(n, mean, S2 * (n - 1) / n, S2)


def summarize(data: GroupedData) -> SummaryStats:
    """Per-group size, mean, biased and unbiased variance."""
    n = np.array([g.size for g in data.groups])
    if np.any(n < 2):
        raise InsufficientDataError("every group needs at least 2 observations")
    mean = np.array([g.mean() for g in data.groups])
    ss = np.array([np.sum((g - m) ** 2) for g, m in zip(data.groups, mean)])
    return SummaryStats(n, mean, ss / n, ss / (n - 1))


def as_stats(data: Union[GroupedData, SummaryStats]) -> SummaryStats:
    return data if isinstance(data, SummaryStats) else summarize(data)


@dataclass(frozen=True)
class ConvergenceConfig:
    """Stop when every mean and variance moves by at most ``10**-tol_exponent``."""

    tol_exponent: int = 6
    max_iterations: int = 10_000

    def __post_init__(self):
        if int(self.tol_exponent) != self.tol_exponent or self.tol_exponent < 3:
            raise ParameterDomainError(f"tol_exponent must be an integer >= 3, got {self.tol_exponent}")
        if self.max_iterations < 1:
            raise ParameterDomainError("max_iterations must be >= 1")

    @property
    def tolerance(self) -> float:
        return 10.0 ** (-self.tol_exponent)


@dataclass(frozen=True)
class RestrictedMleResult:
    mu_hat: np.ndarray
    sigma2_hat: np.ndarray
    iterations: int
    converged: bool
    loglik_trace: tuple[float, ...]
    space: str
    restarted: bool = False

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "mu_hat": self.mu_hat.tolist(),
            "sigma2_hat": self.sigma2_hat.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "loglik": self.loglik,
            "restarted": self.restarted,
        }


@dataclass(frozen=True)
class Condition1Report:
    a: float
    b: float
    lhs: np.ndarray
    rhs: np.ndarray
    passed: tuple[bool, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", tuple(bool(x) for x in self.lhs > self.rhs))

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def warnings(self) -> list[str]:
        return [
            f"group {i}: s^2={self.lhs[i]:.6g} does not exceed {self.rhs[i]:.6g}; "
            "uniqueness of the restricted MLE is not guaranteed"
            for i, p in enumerate(self.passed)
            if not p
        ]


def check_condition1(stats: SummaryStats) -> Condition1Report:
    """Check ``s_i**2 > max((xbar_i - a)**2, (xbar_i - b)**2)`` with ``a, b`` the extreme means.

    A failure is advisory: the iteration may still converge.
    """
    a = float(stats.mean.min())
    b = float(stats.mean.max())
    rhs = np.maximum((stats.mean - a) ** 2, (stats.mean - b) ** 2)
    return Condition1Report(a, b, stats.biased_var.copy(), rhs)


def loglik(n, xbar, s2, mu, sigma2) -> np.ndarray:
    """Normal log-likelihood without its additive constant, row-wise over the last axis."""
    sigma2 = np.maximum(sigma2, VARIANCE_FLOOR)
    return -0.5 * np.sum(n * (np.log(sigma2) + (s2 + (xbar - mu) ** 2) / sigma2), axis=-1)


@dataclass
class BatchFit:
    mu: np.ndarray
    sigma2: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    loglik: np.ndarray
    trace: list[np.ndarray] | None = None
    restarted: np.ndarray | None = None


def _mean_step(space: str, n, xbar, sigma2) -> np.ndarray:
    w = n / np.maximum(sigma2, VARIANCE_FLOOR)
    if space == TREE:
        return tree_isotonic_batch(xbar, w)
    common = np.sum(w * xbar, axis=1) / np.sum(w, axis=1)
    return np.repeat(common[:, None], xbar.shape[1], axis=1)


def fit_batch(
    space: str,
    n: np.ndarray,
    xbar: np.ndarray,
    s2: np.ndarray,
    cfg: ConvergenceConfig,
    record_trace: bool = False,
    start: tuple[np.ndarray, np.ndarray] | None = None,
) -> BatchFit:
    """Run the alternating scheme on every row of ``(B, k+1)`` arrays.

    Rows stop individually: once a row meets the tolerance its iterate is
    frozen, so each row's answer is what a single-row run would give.
    ``start`` overrides the default initial ``(mu, sigma2)``; it must be
    feasible for ``space``.
    """
    xbar = np.atleast_2d(np.asarray(xbar, dtype=float))
    s2 = np.atleast_2d(np.asarray(s2, dtype=float))
    n = np.asarray(n, dtype=float)
    b = xbar.shape[0]
    tol = cfg.tolerance
    if space not in (NULL, TREE):
        raise ParameterDomainError(f"unknown parameter space {space!r}")
    if start is not None:
        mu = np.array(start[0], dtype=float).reshape(xbar.shape)
        sigma2 = np.array(start[1], dtype=float).reshape(xbar.shape)
    elif space == TREE:
        mu = xbar.copy()
        sigma2 = s2.copy()
    else:
        grand = np.sum(n * xbar, axis=1) / np.sum(n)
        mu = np.repeat(grand[:, None], xbar.shape[1], axis=1)
        sigma2 = s2 + (xbar - mu) ** 2
    iterations = np.zeros(b, dtype=int)
    converged = np.zeros(b, dtype=bool)
    # the default tree start (the raw means) is generally infeasible, so its
    # likelihood is not part of the monotone sequence
    trace = [] if record_trace else None
    if record_trace and (space == NULL or start is not None):
        trace.append(loglik(n, xbar, s2, mu, sigma2))
    active = np.arange(b)
    for it in range(1, cfg.max_iterations + 1):
        xa, sa = xbar[active], s2[active]
        new_mu = _mean_step(space, n, xa, sigma2[active])
        new_sigma2 = sa + (xa - new_mu) ** 2
        done = (np.max(np.abs(new_mu - mu[active]), axis=1) <= tol) & (
            np.max(np.abs(new_sigma2 - sigma2[active]), axis=1) <= tol
        )
        mu[active] = new_mu
        sigma2[active] = new_sigma2
        iterations[active] = it
        converged[active[done]] = True
        if record_trace:
            trace.append(loglik(n, xbar, s2, mu, sigma2))
        active = active[~done]
        if active.size == 0:
            break
    return BatchFit(mu, sigma2, iterations, converged, loglik(n, xbar, s2, mu, sigma2), trace)


def fit_tree_batch(n, xbar, s2, cfg: ConvergenceConfig, null: BatchFit, record_trace: bool = False) -> BatchFit:
    """Tree fit from the raw means, restarted from the null fit where that is better.

    Without Condition 1 the likelihood can be multimodal and the default
    start may settle below the null maximum, which is itself a point of the
    tree-ordered space.  Rows where this happens are re-run from the null
    estimate; ascent from there cannot end below it.
    """
    fit = fit_batch(TREE, n, xbar, s2, cfg, record_trace)
    worse = np.flatnonzero(fit.loglik < null.loglik)
    fit.restarted = np.zeros(fit.mu.shape[0], dtype=bool)
    if worse.size == 0:
        return fit
    xbar = np.atleast_2d(xbar)
    s2 = np.atleast_2d(s2)
    warm = fit_batch(TREE, n, xbar[worse], s2[worse], cfg, record_trace, start=(null.mu[worse], null.sigma2[worse]))
    for name in ("mu", "sigma2", "iterations", "converged", "loglik"):
        getattr(fit, name)[worse] = getattr(warm, name)
    if record_trace:
        # only meaningful for single-row fits
        fit.trace = warm.trace
    fit.restarted[worse] = True
    return fit


def _result(space: str, stats: SummaryStats, fit: BatchFit, cfg: ConvergenceConfig) -> RestrictedMleResult:
    result = RestrictedMleResult(
        mu_hat=fit.mu[0],
        sigma2_hat=fit.sigma2[0],
        iterations=int(fit.iterations[0]),
        converged=bool(fit.converged[0]),
        loglik_trace=tuple(float(t[0]) for t in fit.trace),
        space=space,
        restarted=fit.restarted is not None and bool(fit.restarted[0]),
    )
    if not result.converged:
        cond = check_condition1(stats)
        msg = f"{space}-space MLE did not converge in {cfg.max_iterations} iterations"
        if not cond.ok:
            msg += " (Condition 1 fails: " + "; ".join(cond.warnings()) + ")"
        raise ConvergenceError(msg, result=result, condition1=None if cond.ok else cond)
    if np.any(result.sigma2_hat <= VARIANCE_FLOOR):
        bad = np.flatnonzero(result.sigma2_hat <= VARIANCE_FLOOR).tolist()
        raise DegenerateLikelihoodError(
            f"{space}-space MLE has zero variance for group(s) {bad}; the likelihood is unbounded"
        )
    return result


def _single(stats: SummaryStats):
    return stats.n, stats.mean[None, :], stats.biased_var[None, :]


def mle_null(data: Union[GroupedData, SummaryStats], cfg: ConvergenceConfig | None = None) -> RestrictedMleResult:
    """Common-mean MLE, iterated from the grand mean."""
    cfg = cfg or ConvergenceConfig()
    stats = as_stats(data)
    return _result(NULL, stats, fit_batch(NULL, *_single(stats), cfg, record_trace=True), cfg)


def mle_tree(
    data: Union[GroupedData, SummaryStats],
    cfg: ConvergenceConfig | None = None,
    null: RestrictedMleResult | None = None,
) -> RestrictedMleResult:
    """Tree-ordered MLE, iterated from the unrestricted estimates.

    Each sweep projects the sample means onto the tree order with weights
    ``n_i / sigma_i**2`` and then refits the variances about the projected
    means, so the log-likelihood never decreases along the trace.  If the
    fixed point reached this way is less likely than the null MLE (possible
    when the likelihood is multimodal), the sweeps are re-run from the null
    MLE and ``restarted`` is set.  Pass ``null`` to reuse an existing fit.
    """
    cfg = cfg or ConvergenceConfig()
    stats = as_stats(data)
    if null is None:
        null = mle_null(stats, cfg)
    nfit = BatchFit(null.mu_hat[None, :], null.sigma2_hat[None, :], np.array([null.iterations]),
                    np.array([null.converged]), np.array([null.loglik]))
    return _result(TREE, stats, fit_tree_batch(*_single(stats), cfg, nfit, record_trace=True), cfg)


def null_stationarity_residuals(data: Union[GroupedData, SummaryStats], result: RestrictedMleResult) -> tuple[float, float]:
    """Residuals of the null likelihood equations at ``result``: ``(mean eq., variance eq.)``."""
    stats = as_stats(data)
    mu = float(result.mu_hat[0])
    s2 = result.sigma2_hat
    w = stats.n / s2
    mean_res = abs(mu - float(np.sum(w * stats.mean) / np.sum(w)))
    var_res = float(np.max(np.abs(s2 - (stats.biased_var + (stats.mean - mu) ** 2))))
    return mean_res, var_res
