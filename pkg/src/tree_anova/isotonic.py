"""Weighted least-squares projection onto the simple tree order.

The cone is ``{mu : mu[0] <= mu[i], i = 1..k}``: the control (index 0)
is bounded above by every treatment.  The projection is computed with the
minimum violator algorithm: starting from the control alone, repeatedly
pool the smallest treatment that lies below the current pooled level.
Because treatments are visited in increasing order of value, the pooled
set is always a prefix of the sorted treatments, which is what the
vectorized :func:`tree_isotonic_batch` exploits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError

BRUTE_FORCE_MAX_LENGTH = 6


@dataclass(frozen=True)
class TreeProjection:
    fitted: np.ndarray
    pooled_set: tuple[int, ...]
    objective: float


def _validate(values, weights) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.ndim != 1 or values.shape != weights.shape:
        raise ParameterDomainError("values and weights must be 1-d arrays of equal length")
    if values.size < 2:
        raise ParameterDomainError("need a control and at least one treatment")
    if not np.all(np.isfinite(values)):
        raise ParameterDomainError("values must be finite")
    if not np.all(np.isfinite(weights) & (weights > 0)):
        raise ParameterDomainError("weights must be positive and finite")
    return values, weights


def _objective(values, weights, fitted) -> float:
    return float(np.sum(weights * (values - fitted) ** 2))


def tree_isotonic(values, weights) -> TreeProjection:
    """Project ``values`` onto the tree-order cone in the ``weights`` inner product.

    Ties between equal violators are broken by lowest treatment index; this
    only affects the order recorded in ``pooled_set``, never the fit.

    Examples
    --------
    >>> tree_isotonic([3.0, 1.0, 6.0], [1.0, 1.0, 1.0]).fitted
    array([2., 2., 6.])
    """
    values, weights = _validate(values, weights)
    level = values[0]
    total = weights[0]
    pooled: list[int] = []
    # stable sort: equal values keep index order
    for i in sorted(range(1, values.size), key=lambda j: values[j]):
        if values[i] >= level:
            break
        level = (total * level + weights[i] * values[i]) / (total + weights[i])
        total += weights[i]
        pooled.append(i)
    fitted = values.copy()
    fitted[0] = level
    fitted[pooled] = level
    return TreeProjection(fitted, tuple(pooled), _objective(values, weights, fitted))


def tree_isotonic_batch(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Row-wise :func:`tree_isotonic` for ``(B, k+1)`` arrays; returns the fits only.

    No validation is done here; callers own their inputs.
    """
    b, m = values.shape
    k = m - 1
    order = np.argsort(values[:, 1:], axis=1, kind="stable")
    sv = np.take_along_axis(values[:, 1:], order, axis=1)
    sw = np.take_along_axis(weights[:, 1:], order, axis=1)
    cw = weights[:, :1] + np.cumsum(sw, axis=1)
    cs = (weights[:, :1] * values[:, :1]) + np.cumsum(sw * sv, axis=1)
    # levels[:, j] is the pooled level after absorbing the j smallest treatments
    levels = np.concatenate([values[:, :1], cs / cw], axis=1)
    violates = sv < levels[:, :k]
    npooled = np.where(violates.all(axis=1), k, np.argmin(violates, axis=1))
    level = levels[np.arange(b), npooled]
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(k)[None, :].repeat(b, axis=0), axis=1)
    fitted = values.copy()
    fitted[:, 0] = level
    fitted[:, 1:] = np.where(rank < npooled[:, None], level[:, None], values[:, 1:])
    return fitted


def brute_force_projection(values, weights, tolerance: float = 1e-12) -> TreeProjection:
    """Exhaustive tree-order projection over all pooled subsets (test oracle).

    For each subset ``S`` of treatments the candidate sets the control and
    ``S`` to their weighted mean and leaves every other treatment alone; it
    is feasible when no unpooled treatment falls below that mean (up to
    ``tolerance``).  The feasible candidate with the least weighted squared
    error is returned.  Only lengths up to six are accepted.
    """
    values, weights = _validate(values, weights)
    if values.size > BRUTE_FORCE_MAX_LENGTH:
        raise ParameterDomainError(
            f"brute-force projection is limited to length {BRUTE_FORCE_MAX_LENGTH}, got {values.size}"
        )
    treatments = range(1, values.size)
    best = None
    for r in range(values.size):
        for subset in itertools.combinations(treatments, r):
            idx = [0, *subset]
            level = float(np.dot(weights[idx], values[idx]) / weights[idx].sum())
            rest = [i for i in treatments if i not in subset]
            if any(values[i] < level - tolerance for i in rest):
                continue
            fitted = values.copy()
            fitted[idx] = level
            obj = _objective(values, weights, fitted)
            if best is None or obj < best.objective:
                best = TreeProjection(fitted, subset, obj)
    assert best is not None  # the all-pooled candidate is always feasible
    return best


def optimality_residuals(values, weights, fitted) -> tuple[float, float]:
    """Projection residuals against the cone's generators.

    Returns ``(|<v - f, f>_w|, max_z <v - f, z>_w)`` where ``z`` ranges over
    ``±(1, ..., 1)`` and the unit treatment directions ``e_i``.  Both are
    zero (the second at most zero) exactly at the projection.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    r = weights * (values - fitted)
    along = abs(float(np.dot(r, fitted)))
    ones = float(r.sum())
    gens = [ones, -ones, *r[1:].tolist()]
    return along, max(gens)
