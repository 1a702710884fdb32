"""Factorizing-likelihood models and the sample-inflation engine.

A factorized model splits its unnormalized log density into a global-block
prior, per-block priors, and per-block likelihood factors whose data
partitions are disjoint.  Because blocks are conditionally independent given
the global block, the per-block factors computed for a handful of draws can
be recombined into every cross-combination of block values, yielding far more
(dependent) samples than likelihood evaluations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .distributions import Density
from .estimators import SampleSet
from .rng import RandomSource

__all__ = [
    "InflationBudgetError",
    "FactorizedPoint",
    "FactorizedModel",
    "FactorizedProposal",
    "InflationConfig",
    "EvalCounter",
    "plain_factorized_sampler",
    "inflate",
    "grouped_inflate",
]

# uncapped enumeration refuses beyond this many emitted combinations
MAX_UNCAPPED_COMBINATIONS = 10**8


class InflationBudgetError(ValueError):
    """Raised instead of silently allocating a huge combination set."""


@dataclass(frozen=True)
class FactorizedPoint:
    """A joint sample: the global-block value plus one value per block."""

    global_value: Any
    block_values: tuple

    def __iter__(self):
        yield self.global_value
        yield from self.block_values


@dataclass(frozen=True)
class FactorizedModel:
    """Unnormalized target split along the conditional-independence structure.

    The defining contract: the joint unnormalized log density of
    ``(global, blocks)`` equals ``global_log_prior(global)
    + sum_j [block_log_priors[j](blocks[j])
    + block_log_likelihoods[j](global, blocks[j])] + log_evidence_offset``.
    The data partition behind the block likelihoods must be disjoint across
    blocks for a fixed global value.

    For models without a global block, pass evaluators that accept ``None``.
    Block evaluators used with :func:`grouped_inflate` must additionally
    accept arrays of block values elementwise.
    """

    num_blocks: int
    global_log_prior: Callable[[Any], float]
    block_log_priors: tuple[Callable[[Any], float], ...]
    block_log_likelihoods: tuple[Callable[[Any, Any], float], ...]
    data: Any = None
    log_evidence_offset: float = 0.0

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ValueError("a factorized model needs at least one block")
        if len(self.block_log_priors) != self.num_blocks:
            raise ValueError("one block prior per block required")
        if len(self.block_log_likelihoods) != self.num_blocks:
            raise ValueError("one block likelihood per block required")

    def joint_log_density(self, global_value, block_values: Sequence) -> float:
        """The additive decomposition evaluated monolithically."""
        total = float(self.global_log_prior(global_value))
        for prior, lik, value in zip(self.block_log_priors, self.block_log_likelihoods, block_values):
            total += float(prior(value)) + float(lik(global_value, value))
        return total + self.log_evidence_offset

    def data_log_likelihood(self, global_value, block_values: Sequence) -> float:
        """Likelihood factors only (no priors, no offset)."""
        return float(
            sum(lik(global_value, v) for lik, v in zip(self.block_log_likelihoods, block_values))
        )


@dataclass(frozen=True)
class FactorizedProposal:
    """Per-block proposal densities; blocks are proposed independently given
    the global draw.  ``global_proposal=None`` models an empty global block
    (the global value is ``None`` and contributes nothing to the density)."""

    block_proposals: tuple[Density, ...]
    global_proposal: Density | None = None

    def __post_init__(self):
        if not self.block_proposals:
            raise ValueError("a factorized proposal needs at least one block")

    @property
    def num_blocks(self) -> int:
        return len(self.block_proposals)

    def joint_log_density(self, point: FactorizedPoint) -> float:
        total = 0.0
        if self.global_proposal is not None:
            total += float(self.global_proposal.log_density(point.global_value))
        for prop, value in zip(self.block_proposals, point.block_values):
            total += float(prop.log_density(value))
        return total


@dataclass(frozen=True)
class InflationConfig:
    """How many independent global draws to make and how many block draws to
    recombine per global draw."""

    outer_draws: int
    inner_draws: int
    combination_cap: int | None = None

    def __post_init__(self):
        if self.outer_draws < 1 or self.inner_draws < 1:
            raise ValueError("outer_draws and inner_draws must be >= 1")
        if self.combination_cap is not None and self.combination_cap < 1:
            raise ValueError("combination_cap must be >= 1 when set")


@dataclass
class EvalCounter:
    """Running account of block-likelihood evaluations and emitted samples."""

    block_likelihood_evals: int = 0
    joint_samples_emitted: int = 0


def _check_proposal_support(log_q: float, what: str) -> None:
    if log_q == -np.inf:
        raise RuntimeError(f"proposal density is zero at its own draw ({what})")


def _draw_global(model: FactorizedModel, prop: FactorizedProposal, rng: RandomSource):
    """Returns (global value, base log-weight term for that draw)."""
    if prop.global_proposal is None:
        global_value = None
        log_q_global = 0.0
    else:
        global_value = prop.global_proposal.sample(rng)
        log_q_global = float(prop.global_proposal.log_density(global_value))
        _check_proposal_support(log_q_global, "global block")
    base = float(model.global_log_prior(global_value)) + model.log_evidence_offset - log_q_global
    return global_value, base


def _plain_draw(
    model: FactorizedModel,
    prop: FactorizedProposal,
    rng: RandomSource,
    counter: EvalCounter | None,
) -> tuple[FactorizedPoint, float]:
    """One joint draw and its log weight (model density over proposal density)."""
    global_value, log_w = _draw_global(model, prop, rng)
    values = []
    for j in range(model.num_blocks):
        value = prop.block_proposals[j].sample(rng)
        log_q = float(prop.block_proposals[j].log_density(value))
        _check_proposal_support(log_q, f"block {j}")
        factor = float(model.block_log_priors[j](value)) + float(
            model.block_log_likelihoods[j](global_value, value)
        )
        if counter is not None:
            counter.block_likelihood_evals += 1
        log_w += factor - log_q
        values.append(value)
    return FactorizedPoint(global_value, tuple(values)), log_w


def plain_factorized_sampler(
    model: FactorizedModel,
    prop: FactorizedProposal,
    count: int,
    rng: RandomSource,
    counter: EvalCounter | None = None,
) -> SampleSet:
    """Independent joint draws weighted by model density over joint proposal
    density.  Each draw costs one likelihood evaluation per block."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if prop.num_blocks != model.num_blocks:
        raise ValueError("proposal and model disagree on the number of blocks")
    points: list[FactorizedPoint] = []
    log_weights = np.empty(count)
    for i in range(count):
        point, log_w = _plain_draw(model, prop, rng, counter)
        points.append(point)
        log_weights[i] = log_w
    if counter is not None:
        counter.joint_samples_emitted += count
    return SampleSet(points, log_weights)


def inflate(
    model: FactorizedModel,
    prop: FactorizedProposal,
    cfg: InflationConfig,
    rng: RandomSource,
    counter: EvalCounter | None = None,
) -> tuple[SampleSet, EvalCounter]:
    """Recombining sampler: per global draw, make ``inner_draws`` draws per
    block, cache each block's prior-plus-likelihood factor and proposal
    density once, then emit every cross-combination of block indices with

        log w = global prior + offset - log q_global
                + sum_j (cached_factor[j][c_j] - cached_log_q[j][c_j])

    Combinations are enumerated lexicographically; an optional cap emits only
    the first ``combination_cap`` of them per global draw.  The block
    likelihood is invoked exactly ``outer_draws * inner_draws * num_blocks``
    times no matter how many combinations are emitted.
    """
    if prop.num_blocks != model.num_blocks:
        raise ValueError("proposal and model disagree on the number of blocks")
    k = model.num_blocks
    m, inner = cfg.outer_draws, cfg.inner_draws
    per_draw = inner**k
    if cfg.combination_cap is not None and cfg.combination_cap > per_draw:
        raise ValueError(f"combination_cap {cfg.combination_cap} exceeds {inner}^{k}")
    emitted_per_draw = per_draw if cfg.combination_cap is None else cfg.combination_cap
    if cfg.combination_cap is None and m * per_draw > MAX_UNCAPPED_COMBINATIONS:
        raise InflationBudgetError(
            f"{m} x {inner}^{k} = {m * per_draw} combinations; "
            f"set a combination_cap below {MAX_UNCAPPED_COMBINATIONS}"
        )
    if counter is None:
        counter = EvalCounter()

    points: list[FactorizedPoint] = []
    log_weights = np.empty(m * emitted_per_draw)
    pos = 0
    for _ in range(m):
        pos = _inflated_draw(
            model, prop, inner, emitted_per_draw, rng, counter, points, log_weights, pos
        )
    counter.joint_samples_emitted += pos
    return SampleSet(points, log_weights), counter


def _inflated_draw(
    model: FactorizedModel,
    prop: FactorizedProposal,
    inner: int,
    emit_limit: int,
    rng: RandomSource,
    counter: EvalCounter,
    points: list,
    log_weights: np.ndarray,
    pos: int,
) -> int:
    """One global draw expanded into its block recombinations; appends points
    and fills ``log_weights`` from ``pos``, returning the new position."""
    k = model.num_blocks
    global_value, base = _draw_global(model, prop, rng)
    block_values: list[list] = []
    factors = np.empty((k, inner))
    log_qs = np.empty((k, inner))
    for j in range(k):
        values_j = []
        for i in range(inner):
            value = prop.block_proposals[j].sample(rng)
            log_q = float(prop.block_proposals[j].log_density(value))
            _check_proposal_support(log_q, f"block {j}")
            factors[j, i] = float(model.block_log_priors[j](value)) + float(
                model.block_log_likelihoods[j](global_value, value)
            )
            counter.block_likelihood_evals += 1
            log_qs[j, i] = log_q
            values_j.append(value)
        block_values.append(values_j)
    contrib = factors - log_qs
    for combo in itertools.islice(itertools.product(range(inner), repeat=k), emit_limit):
        log_w = base
        for j, c in enumerate(combo):
            log_w += contrib[j, c]
        points.append(
            FactorizedPoint(global_value, tuple(block_values[j][c] for j, c in enumerate(combo)))
        )
        log_weights[pos] = log_w
        pos += 1
    return pos


def grouped_inflate(
    points,
    group_size: int,
    model: FactorizedModel,
    prop: FactorizedProposal,
) -> SampleSet:
    """Recombine pre-drawn joint samples within consecutive groups.

    ``points`` is an ``(n, K)`` array of scalar block values drawn from
    ``prop``; each group of ``group_size`` rows is treated as that many inner
    draws per block and expanded to all ``group_size**K`` recombinations, and
    the groups are concatenated.  Only models with an empty global block are
    supported on this path, and the block evaluators are applied to whole
    columns at once, so they must be array-capable.
    """
    if prop.global_proposal is not None:
        raise ValueError("grouped recombination requires an empty global block")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != model.num_blocks:
        raise ValueError(f"points must be (n, {model.num_blocks}), got {pts.shape}")
    n, k = pts.shape
    if group_size < 1 or n % group_size != 0:
        raise ValueError(f"{n} samples do not divide into groups of {group_size}")
    num_groups = n // group_size
    total = num_groups * group_size**k
    if total > MAX_UNCAPPED_COMBINATIONS:
        raise InflationBudgetError(f"refusing to emit {total} recombined samples")

    base = float(model.global_log_prior(None)) + model.log_evidence_offset
    # per-block contribution of every input row, evaluated in one shot per column
    contrib = np.empty_like(pts)
    for j in range(k):
        col = pts[:, j]
        contrib[:, j] = (
            np.asarray(model.block_log_priors[j](col), dtype=float)
            + np.asarray(model.block_log_likelihoods[j](None, col), dtype=float)
            - prop.block_proposals[j].log_density_each(col)
        )

    g = group_size
    out_points = np.empty((total, k))
    out_log_w = np.empty(total)
    per_group = g**k
    for gi in range(num_groups):
        rows = slice(gi * g, (gi + 1) * g)
        grid = np.full((g,) * k, base)
        for j in range(k):
            shape = [1] * k
            shape[j] = g
            grid = grid + contrib[rows, j].reshape(shape)
        out = slice(gi * per_group, (gi + 1) * per_group)
        out_log_w[out] = grid.reshape(-1)  # C order = lexicographic combination order
        axes = np.meshgrid(*(pts[rows, j] for j in range(k)), indexing="ij")
        out_points[out] = np.stack([a.reshape(-1) for a in axes], axis=1)
    return SampleSet(out_points, out_log_w)
