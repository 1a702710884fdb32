"""Importance-sampling estimators with log-space weight bookkeeping.

All arithmetic on weights happens in log space through stable log-sum-exp;
signed test-function values are handled by sign-tracking accumulation, so the
estimators stay exact even when log weights sit hundreds of log-units below
zero (linear-space weights are never materialized).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .rng import RandomSource

__all__ = [
    "DegenerateWeightsError",
    "WeightedSample",
    "SampleSet",
    "Estimate",
    "TestFunction",
    "standard_estimate",
    "self_normalized_estimate",
    "snis_variance_estimate",
    "evidence_estimate",
    "combine",
    "decomposition_residual",
    "error_convexity_margin",
    "resample",
]

STANDARD = "standard"
SELF_NORMALIZED = "self-normalized"
EVIDENCE = "evidence"


class DegenerateWeightsError(ValueError):
    """Raised when every weight in a sample set is zero."""


@dataclass(frozen=True)
class WeightedSample:
    """A point in parameter space with its unnormalized log weight."""

    point: Any
    log_weight: float

    def __post_init__(self):
        lw = float(self.log_weight)
        if np.isnan(lw) or lw == np.inf:
            raise ValueError(f"log_weight must be finite or -inf, got {lw!r}")
        object.__setattr__(self, "log_weight", lw)


def _check_log_weights(log_weights: np.ndarray) -> None:
    if np.any(np.isnan(log_weights)) or np.any(log_weights == np.inf):
        raise ValueError("log weights must be finite or -inf; found NaN or +inf")


class SampleSet:
    """An ordered collection of weighted samples with its cached log weight sum.

    ``points`` may be a ``(n, d)`` array for vector-valued points or any
    sequence of opaque point objects; estimators only ever hand points to a
    :class:`TestFunction`.  Instances are immutable after construction and
    safe to share across threads.
    """

    __slots__ = ("points", "log_weights", "log_weight_sum")

    def __init__(self, points, log_weights):
        log_weights = np.asarray(log_weights, dtype=float)
        if log_weights.ndim != 1:
            raise ValueError("log_weights must be one-dimensional")
        _check_log_weights(log_weights)
        if isinstance(points, np.ndarray):
            if points.shape[0] != log_weights.size:
                raise ValueError("points and log_weights disagree on sample count")
        else:
            points = list(points)
            if len(points) != log_weights.size:
                raise ValueError("points and log_weights disagree on sample count")
        self.points = points
        self.log_weights = log_weights
        self.log_weight_sum = float(logsumexp(log_weights)) if log_weights.size else -np.inf

    @classmethod
    def from_samples(cls, samples: Iterable[WeightedSample]) -> SampleSet:
        samples = list(samples)
        return cls([s.point for s in samples], [s.log_weight for s in samples])

    @property
    def samples(self) -> tuple[WeightedSample, ...]:
        return tuple(WeightedSample(p, lw) for p, lw in zip(self.points, self.log_weights))

    def __len__(self) -> int:
        return int(self.log_weights.size)

    def __iter__(self) -> Iterator[WeightedSample]:
        return iter(self.samples)

    def subset(self, indices) -> SampleSet:
        indices = np.asarray(indices, dtype=int)
        if isinstance(self.points, np.ndarray):
            pts = self.points[indices]
        else:
            pts = [self.points[i] for i in indices]
        return SampleSet(pts, self.log_weights[indices])

    def shifted(self, offset: float) -> SampleSet:
        """The same samples with a constant added to every log weight."""
        return SampleSet(self.points, self.log_weights + float(offset))


@dataclass(frozen=True)
class Estimate:
    """An estimator value together with its weight-sum and sample count."""

    value: np.ndarray
    kind: str
    n: int
    log_weight_sum: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("an estimate needs at least one sample")


@dataclass(frozen=True)
class TestFunction:
    """A batched map from points to real vectors.

    ``fn`` receives the sample set's points container (array or sequence) and
    must return an ``(n, dim)`` array.  It must be total on the target's
    support.
    """

    fn: Callable[[Any], np.ndarray]
    dim: int

    __test__ = False  # keep pytest from collecting this as a test class

    def __call__(self, points) -> np.ndarray:
        values = np.asarray(self.fn(points), dtype=float)
        n = points.shape[0] if isinstance(points, np.ndarray) else len(points)
        if values.shape != (n, self.dim):
            raise ValueError(f"test function returned {values.shape}, expected {(n, self.dim)}")
        return values

    @classmethod
    def identity(cls, dim: int) -> TestFunction:
        return cls(lambda pts: np.asarray(pts, dtype=float).reshape(-1, dim), dim)

    @classmethod
    def from_pointwise(cls, f: Callable[[Any], Sequence[float]], dim: int) -> TestFunction:
        return cls(lambda pts: np.array([np.atleast_1d(f(p)) for p in pts], dtype=float), dim)


def _require_nonempty(x: SampleSet) -> None:
    if len(x) == 0:
        raise ValueError("estimation requires a non-empty sample set")


def _signed_weighted_sum(log_weights: np.ndarray, values: np.ndarray):
    """log|sum_i b_i e^{a_i}| and its sign, per column of ``values``."""
    with np.errstate(divide="ignore"):
        return logsumexp(log_weights[:, None], b=values, axis=0, return_sign=True)


def standard_estimate(x: SampleSet, h: TestFunction) -> Estimate:
    """Mean of ``w * h`` over the set; requires weights from a normalized target."""
    _require_nonempty(x)
    values = h(x.points)
    log_abs, sign = _signed_weighted_sum(x.log_weights, values)
    est = sign * np.exp(log_abs - np.log(len(x)))
    return Estimate(est, STANDARD, len(x), x.log_weight_sum)


def self_normalized_estimate(x: SampleSet, h: TestFunction) -> Estimate:
    """Weight-sum-normalized estimate; valid when the target is known only
    up to a constant (the constant cancels)."""
    _require_nonempty(x)
    if x.log_weight_sum == -np.inf:
        raise DegenerateWeightsError("all weights are zero")
    values = h(x.points)
    log_abs, sign = _signed_weighted_sum(x.log_weights, values)
    est = sign * np.exp(log_abs - x.log_weight_sum)
    return Estimate(est, SELF_NORMALIZED, len(x), x.log_weight_sum)


def snis_variance_estimate(x: SampleSet, h: TestFunction) -> np.ndarray:
    """Per-component variance estimate of the self-normalized estimator:
    ``sum_i (w_i / w_sum)^2 (h(x_i) - estimate)^2``."""
    est = self_normalized_estimate(x, h)
    values = h(x.points)
    dev_sq = (values - est.value) ** 2
    log_sq_norm_w = 2.0 * (x.log_weights - x.log_weight_sum)
    with np.errstate(divide="ignore"):
        log_var = logsumexp(log_sq_norm_w[:, None], b=dev_sq, axis=0)
    return np.exp(log_var)


def evidence_estimate(x: SampleSet) -> Estimate:
    """Log of the normalizing-constant estimate ``(1/n) sum_i w_i``,
    kept in log space throughout."""
    _require_nonempty(x)
    log_f_hat = x.log_weight_sum - np.log(len(x))
    return Estimate(np.array([log_f_hat]), EVIDENCE, len(x), x.log_weight_sum)


def combine(sets: Sequence[SampleSet]) -> SampleSet:
    """Multiset union: concatenation preserving duplicates and order."""
    if not sets:
        raise ValueError("combine requires at least one sample set")
    if len(sets) == 1:
        return sets[0]
    if all(isinstance(s.points, np.ndarray) for s in sets):
        points = np.concatenate([s.points for s in sets], axis=0)
    else:
        points = [p for s in sets for p in s.points]
    log_weights = np.concatenate([s.log_weights for s in sets])
    return SampleSet(points, log_weights)


_ESTIMATORS = {STANDARD: standard_estimate, SELF_NORMALIZED: self_normalized_estimate}


def _convex_lambdas(sets: Sequence[SampleSet], union: SampleSet, kind: str) -> np.ndarray:
    if kind == STANDARD:
        return np.array([len(s) / len(union) for s in sets])
    if kind == SELF_NORMALIZED:
        return np.exp(np.array([s.log_weight_sum for s in sets]) - union.log_weight_sum)
    raise ValueError(f"unknown estimator kind {kind!r}")


def decomposition_residual(sets: Sequence[SampleSet], h: TestFunction, kind: str) -> float:
    """Max-norm gap between the estimate on the union and the convex
    combination of per-set estimates.

    The combination weights are set sizes (standard kind) or weight-sum
    fractions (self-normalized kind); in exact arithmetic the gap is zero for
    any partition, so the residual measures accumulation error only.
    """
    estimator = _ESTIMATORS[kind]
    union = combine(list(sets))
    lambdas = _convex_lambdas(sets, union, kind)
    per_set = np.array([estimator(s, h).value for s in sets])
    combined = lambdas @ per_set
    return float(np.max(np.abs(estimator(union, h).value - combined)))


def error_convexity_margin(
    sets: Sequence[SampleSet],
    h: TestFunction,
    kind: str,
    reference: np.ndarray,
    ord: float = 2,
) -> float:
    """Slack in the bound "convex combination of normed errors >= normed
    error of the combined estimate", for any reference vector and norm.

    Nonnegative up to floating-point error for every valid input.
    """
    estimator = _ESTIMATORS[kind]
    union = combine(list(sets))
    lambdas = _convex_lambdas(sets, union, kind)
    reference = np.asarray(reference, dtype=float)
    per_set = np.array([estimator(s, h).value for s in sets])
    avg_error = float(lambdas @ [np.linalg.norm(v - reference, ord=ord) for v in per_set])
    combined_error = float(np.linalg.norm(lambdas @ per_set - reference, ord=ord))
    return avg_error - combined_error


def resample(x: SampleSet, count: int, rng: RandomSource) -> list:
    """``count`` multinomial draws with replacement, proportional to weights."""
    _require_nonempty(x)
    if x.log_weight_sum == -np.inf:
        raise DegenerateWeightsError("cannot resample: all weights are zero")
    probs = np.exp(x.log_weights - x.log_weight_sum)
    probs /= probs.sum()
    indices = rng.generator.choice(len(x), size=int(count), replace=True, p=probs)
    if isinstance(x.points, np.ndarray):
        return list(x.points[indices])
    return [x.points[i] for i in indices]
