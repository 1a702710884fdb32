"""Concrete factorized models used in the experiments, plus synthetic data.

Two model families are provided: a two-dimensional Gaussian target whose
coordinates form two data-free blocks (with a large negative log-evidence
offset to force all arithmetic through log space), and one-dimensional
two-component mixture models whose component parameters are the blocks and
whose mixing weights plus per-point component assignments form the global
block.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .distributions import (
    LOG_TWO_PI,
    Density,
    DiagGaussian,
    Dirichlet,
    Gamma,
    ProductStudentT,
    ScalarInverseWishart,
    StudentT,
    TupleDensity,
    _student_t_logpdf,
)
from .estimators import TestFunction
from .factorized import FactorizedModel, FactorizedProposal
from .rng import RandomSource

__all__ = [
    "GaussianToy",
    "gaussian_toy_model",
    "DmmSpec",
    "MixtureGlobalProposal",
    "MixtureAssignmentProposal",
    "informed_assignment_builder",
    "dmm_model",
    "dmm_init_proposal",
    "component_means_function",
    "SyntheticDataset",
    "make_synthetic",
    "save_dataset",
    "load_dataset",
]

GAUSSIAN = "gaussian"
STUDENT_T = "student-t"
SYNTHETIC_T_DF = 30.0


@dataclass(frozen=True)
class GaussianToy:
    """Diagonal Gaussian target; each coordinate is its own block and the
    global block is empty.  The log evidence is offset to a large negative
    constant, so linear-space weights would underflow immediately."""

    dimension: int = 2
    variance: float = 2.0
    log_evidence_offset: float = -1000.0
    proposal_df: float = 20.0

    @property
    def true_mean(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def true_log_evidence(self) -> float:
        return self.log_evidence_offset

    def model(self) -> FactorizedModel:
        density = DiagGaussian(0.0, self.variance)
        return FactorizedModel(
            num_blocks=self.dimension,
            global_log_prior=lambda phi: 0.0,
            block_log_priors=(density.log_density_each,) * self.dimension,
            block_log_likelihoods=(lambda phi, g: 0.0,) * self.dimension,
            log_evidence_offset=self.log_evidence_offset,
        )

    def proposal(self, center=(0.0, 0.0)) -> FactorizedProposal:
        """Per-coordinate Student-t proposal with the target's scale matrix."""
        center = np.asarray(center, dtype=float)
        scale = float(np.sqrt(self.variance))
        blocks = tuple(
            StudentT(float(c), scale, self.proposal_df) for c in np.broadcast_to(center, (self.dimension,))
        )
        return FactorizedProposal(block_proposals=blocks)

    def sample_proposal(self, count: int, rng: RandomSource, center=(0.0, 0.0)) -> np.ndarray:
        """``(count, dimension)`` draws from :meth:`proposal` in one shot."""
        base = ProductStudentT(
            np.broadcast_to(np.asarray(center, dtype=float), (self.dimension,)),
            np.full(self.dimension, np.sqrt(self.variance)),
            self.proposal_df,
        )
        return base.sample_batch(count, rng)


def gaussian_toy_model() -> FactorizedModel:
    """The default two-block Gaussian toy target."""
    return GaussianToy().model()


@dataclass(frozen=True)
class DmmSpec:
    """A two-component mixture model over one-dimensional observations.

    The gaussian family has unit-variance components with only the means
    latent (standard normal prior on each mean).  The student-t family
    additionally treats each component's variance and degrees of freedom as
    latent, with heavy-tailed priors on all three.
    """

    data: np.ndarray
    component_family: str = GAUSSIAN
    num_components: int = 2
    mixing_concentration: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float).reshape(-1))
        if self.component_family not in (GAUSSIAN, STUDENT_T):
            raise ValueError(f"unknown component family {self.component_family!r}")
        if self.num_components < 1:
            raise ValueError("need at least one component")
        if len(self.mixing_concentration) != self.num_components:
            raise ValueError("one concentration parameter per component required")

    def component_prior(self) -> Density:
        if self.component_family == GAUSSIAN:
            return DiagGaussian(0.0, 1.0)
        return TupleDensity(
            [StudentT(0.0, 1.0, 1.0), ScalarInverseWishart(5.0, 1.0), Gamma(1.0, 1.0)]
        )

    def component_log_density_each(self, obs: np.ndarray, params) -> np.ndarray:
        """Per-observation log likelihood under one component's parameters."""
        obs = np.asarray(obs, dtype=float)
        if self.component_family == GAUSSIAN:
            mean = float(params)
            return -0.5 * (LOG_TWO_PI + (obs - mean) ** 2)
        mean, var, df = params
        if var <= 0.0 or df <= 0.0:
            return np.full(obs.shape, -np.inf)
        return _student_t_logpdf(obs, float(mean), float(np.sqrt(var)), float(df))

    def component_log_density(self, obs: np.ndarray, params) -> float:
        """Log likelihood of ``obs`` under one component's parameters."""
        return float(np.sum(self.component_log_density_each(obs, params)))

    def marginal_data_log_likelihood(self, weights, block_params) -> float:
        """Mixture log likelihood of the data with assignments summed out."""
        weights = np.asarray(weights, dtype=float)
        comp = np.stack(
            [self.component_log_density_each(self.data, p) for p in block_params], axis=1
        )
        with np.errstate(divide="ignore"):
            comp = comp + np.log(weights)[None, :]
        return float(np.sum(logsumexp(comp, axis=1)))


def _mixing_log_prob(prior: Dirichlet, weights, labels, num_components: int) -> float:
    """Shared Dirichlet-plus-assignments term, used by both the model prior
    and the assignment proposal so the two cancel exactly in weights."""
    weights = np.asarray(weights, dtype=float)
    labels = np.asarray(labels)
    total = prior.log_density(weights)
    if total == -np.inf:
        return -np.inf
    if labels.size and (labels.min() < 0 or labels.max() >= num_components):
        return -np.inf
    probs = weights[labels]
    if np.any(probs <= 0.0):
        return -np.inf
    return total + float(np.sum(np.log(probs)))


class MixtureGlobalProposal(Density):
    """Draws mixing weights from their Dirichlet prior and one component
    assignment per observation from the drawn weights."""

    def __init__(self, spec: DmmSpec):
        self.spec = spec
        self.mixing_prior = Dirichlet(spec.mixing_concentration)

    def sample(self, rng: RandomSource):
        weights = self.mixing_prior.sample(rng)
        labels = rng.generator.choice(self.spec.num_components, size=self.spec.data.size, p=weights)
        return weights, labels

    def log_density(self, x) -> float:
        weights, labels = x
        return _mixing_log_prob(self.mixing_prior, weights, labels, self.spec.num_components)


class MixtureAssignmentProposal(Density):
    """Assignment proposal informed by reference component parameters.

    Mixing weights come from their Dirichlet prior; each observation's
    assignment is drawn from the posterior responsibility it would have under
    the reference parameters (typically a resampled sample from the previous
    generation, so the proposal never depends on the current generation).
    The importance weight fully accounts for this density, so estimates stay
    valid; blind prior assignments make the likelihood a lottery over label
    patterns that no amount of adaptation can win.
    """

    def __init__(self, spec: DmmSpec, reference_params):
        self.spec = spec
        self.mixing_prior = Dirichlet(spec.mixing_concentration)
        self.reference_params = tuple(reference_params)
        self._ref_each = np.stack(
            [spec.component_log_density_each(spec.data, p) for p in self.reference_params], axis=1
        )

    def _assignment_log_probs(self, weights) -> np.ndarray:
        with np.errstate(divide="ignore"):
            scores = self._ref_each + np.log(np.asarray(weights, dtype=float))[None, :]
        return scores - logsumexp(scores, axis=1, keepdims=True)

    def sample(self, rng: RandomSource):
        weights = self.mixing_prior.sample(rng)
        log_probs = self._assignment_log_probs(weights)
        cdf = np.cumsum(np.exp(log_probs), axis=1)
        u = rng.generator.random(self.spec.data.size)
        labels = (u[:, None] > cdf).sum(axis=1)
        return weights, np.minimum(labels, self.spec.num_components - 1)

    def log_density(self, x) -> float:
        weights, labels = x
        base = self.mixing_prior.log_density(weights)
        if base == -np.inf:
            return -np.inf
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.spec.num_components):
            return -np.inf
        log_probs = self._assignment_log_probs(weights)
        return base + float(log_probs[np.arange(labels.size), labels].sum())


def informed_assignment_builder(spec: DmmSpec):
    """Per-center global-proposal builder for the generation loop: assignments
    follow the responsibilities under the center's component parameters."""

    def build(center) -> MixtureAssignmentProposal:
        return MixtureAssignmentProposal(spec, center.block_values)

    return build


def dmm_model(spec: DmmSpec) -> FactorizedModel:
    """Mixture model as a factorized target.

    The global block is the pair ``(mixing weights, assignments)``; block ``j``
    holds component ``j``'s parameters, and its likelihood factor covers
    exactly the observations currently assigned to component ``j`` (an empty
    component contributes an empty product, i.e. zero).
    """
    mixing_prior = Dirichlet(spec.mixing_concentration)
    prior = spec.component_prior()

    def global_log_prior(phi) -> float:
        weights, labels = phi
        return _mixing_log_prob(mixing_prior, weights, labels, spec.num_components)

    def make_likelihood(j: int):
        def block_log_likelihood(phi, params) -> float:
            _, labels = phi
            obs = spec.data[np.asarray(labels) == j]
            if obs.size == 0:
                return 0.0
            return spec.component_log_density(obs, params)

        return block_log_likelihood

    return FactorizedModel(
        num_blocks=spec.num_components,
        global_log_prior=global_log_prior,
        block_log_priors=(prior.log_density,) * spec.num_components,
        block_log_likelihoods=tuple(make_likelihood(j) for j in range(spec.num_components)),
        data=spec.data,
    )


def dmm_init_proposal(spec: DmmSpec) -> FactorizedProposal:
    """Prior-based proposal: assignments from the mixing proposal, component
    parameters from their priors."""
    return FactorizedProposal(
        block_proposals=(spec.component_prior(),) * spec.num_components,
        global_proposal=MixtureGlobalProposal(spec),
    )


def component_means_function(spec: DmmSpec) -> TestFunction:
    """Extracts the vector of component means from a joint mixture sample."""
    if spec.component_family == GAUSSIAN:
        extract = lambda point: [float(v) for v in point.block_values]
    else:
        extract = lambda point: [float(v[0]) for v in point.block_values]
    return TestFunction.from_pointwise(extract, spec.num_components)


@dataclass(frozen=True)
class SyntheticDataset:
    """Observations drawn from a known two-component mixture."""

    observations: np.ndarray
    true_means: tuple[float, float]
    seed: int
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "observations", np.asarray(self.observations, dtype=float))


def make_synthetic(
    kind: str,
    means: tuple[float, float],
    seed: int,
    count: int = 100,
    mixing: float = 0.5,
) -> SyntheticDataset:
    """Draw ``count`` observations from an equal (or configured) mixture of
    two unit-scale components centered on ``means``.

    The gaussian kind uses unit-variance normals; the student-t kind uses
    unit-scale t components with 30 degrees of freedom.
    """
    if kind not in (GAUSSIAN, STUDENT_T):
        raise ValueError(f"unknown synthetic kind {kind!r}")
    rng = RandomSource(seed)
    means_arr = np.asarray(means, dtype=float)
    labels = (rng.generator.random(count) < (1.0 - mixing)).astype(int)
    if kind == GAUSSIAN:
        noise = rng.generator.standard_normal(count)
    else:
        noise = rng.generator.standard_t(SYNTHETIC_T_DF, size=count)
    obs = means_arr[labels] + noise
    return SyntheticDataset(obs, (float(means_arr[0]), float(means_arr[1])), seed, kind)


def save_dataset(dataset: SyntheticDataset, path) -> None:
    """One observation per line, header comment recording seed and truth."""
    means = ",".join(repr(m) for m in dataset.true_means)
    lines = [f"# schema=1 seed={dataset.seed} kind={dataset.kind} means={means}"]
    lines.extend(repr(float(x)) for x in dataset.observations)
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> SyntheticDataset:
    text = Path(path).read_text().strip().splitlines()
    header = text[0]
    if not header.startswith("# schema=1 "):
        raise ValueError(f"unrecognized dataset header: {header!r}")
    fields = dict(part.split("=", 1) for part in header[2:].split() if "=" in part)
    means = tuple(float(v) for v in fields["means"].split(","))
    obs = np.array([float(line) for line in text[1:] if line.strip()])
    return SyntheticDataset(obs, (means[0], means[1]), int(fields["seed"]), fields["kind"])
