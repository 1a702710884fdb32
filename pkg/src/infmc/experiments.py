"""Seeded experiment harness: runs the Gaussian-target and mixture-model
comparisons across replications, executes the estimator property suite, and
emits plot-ready CSV/JSON.

Replications use keyed substreams, so results are byte-identical across runs
and across worker counts; aggregation always reduces in replication order.
"""
from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .distributions import DiagGaussian
from .estimators import (
    SampleSet,
    TestFunction,
    decomposition_residual,
    error_convexity_margin,
    evidence_estimate,
    self_normalized_estimate,
)
from .factorized import (
    FactorizedModel,
    FactorizedProposal,
    InflationConfig,
    grouped_inflate,
    inflate,
)
from .models import (
    DmmSpec,
    GaussianToy,
    component_means_function,
    dmm_init_proposal,
    dmm_model,
    informed_assignment_builder,
    make_synthetic,
)
from .pmc import GaussianKernel, GammaKernel, PmcConfig, TupleKernel, VarianceKernel, run_pmc
from .pmc import pooled_estimate, trace_metrics
from .rng import RandomSource

__all__ = [
    "ExperimentConfig",
    "MetricRow",
    "MetricSeries",
    "run_gauss",
    "run_dmm",
    "run_theorem_suite",
    "TheoremReport",
    "emit",
    "gauss_replication",
    "dmm_replication",
]

GAUSS_EXPERIMENTS = ("gauss-centered", "gauss-offcenter")
DMM_EXPERIMENTS = ("dmm-gauss", "dmm-t")
EXPERIMENTS = GAUSS_EXPERIMENTS + DMM_EXPERIMENTS + ("theorem-suite",)
METHODS = ("plain", "inflated")

CSV_COLUMNS = (
    "experiment",
    "method",
    "budget",
    "replications",
    "component",
    "squared_bias",
    "variance",
    "mse",
    "mean_estimate",
    "log_evidence_mse",
    "wall_seconds",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a harness run needs; see the CLI for one flag per field."""

    experiment: str
    seed: int
    budgets: tuple[int, ...] = (200, 2000, 20000)
    replications: int = 50
    method: str = "both"
    group_size: int = 100
    generations: int = 20
    inner_draws: int = 2
    kernel_bandwidth: float = 0.25
    kernel_cv: float = 0.3
    true_means: tuple[float, float] = (-2.0, 2.0)
    data_count: int = 100
    mixing: float = 0.5
    workers: int = 1
    sanity_fq: bool = False
    instances: int = 500
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.method not in METHODS + ("both",):
            raise ValueError(f"unknown method {self.method!r}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")
        budgets = tuple(int(b) for b in self.budgets)
        object.__setattr__(self, "budgets", budgets)
        if self.experiment != "theorem-suite":
            if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
                raise ValueError("budgets must be strictly increasing")
            if self.replications < 2:
                raise ValueError("need at least 2 replications to estimate variances")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)

    @classmethod
    def from_file(cls, path, **overrides) -> ExperimentConfig:
        """Parse the flat ``key = value`` config format (schema version 1).

        Lines are ``key = value`` with ``#`` comments; keys match the field
        names of this class, list values are comma separated, booleans are
        ``true``/``false``.  A ``schema_version = 1`` entry is required.
        """
        entries: dict[str, str] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
        if entries.pop("schema_version", None) != "1":
            raise ValueError("config file must declare schema_version = 1")
        typed: dict = {}
        known = {f.name: f for f in fields(cls)}
        for key, value in entries.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            typed[key] = _parse_config_value(key, value)
        typed.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**typed)


_INT_TUPLE_KEYS = {"budgets"}
_FLOAT_TUPLE_KEYS = {"true_means"}
_INT_KEYS = {"seed", "replications", "group_size", "generations", "inner_draws", "data_count", "workers", "instances"}
_FLOAT_KEYS = {"kernel_bandwidth", "kernel_cv", "mixing"}
_BOOL_KEYS = {"sanity_fq"}


def _parse_config_value(key: str, value: str):
    if key in _INT_TUPLE_KEYS:
        return tuple(int(v.strip()) for v in value.split(","))
    if key in _FLOAT_TUPLE_KEYS:
        return tuple(float(v.strip()) for v in value.split(","))
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        if value.lower() not in ("true", "false"):
            raise ValueError(f"{key} must be true or false, got {value!r}")
        return value.lower() == "true"
    return value


@dataclass(frozen=True)
class MetricRow:
    experiment: str
    method: str
    budget: int
    replications: int
    component: int
    squared_bias: float
    variance: float
    mse: float
    mean_estimate: float
    log_evidence_mse: float
    wall_seconds: float

    def __post_init__(self):
        if not (self.mse >= self.variance >= 0.0):
            raise ValueError(f"need mse >= variance >= 0, got {self.mse}, {self.variance}")
        if abs(self.mse - (self.variance + self.squared_bias)) > 1e-9 * max(1.0, self.mse):
            raise ValueError("mse must decompose into variance plus squared bias")


@dataclass
class MetricSeries:
    """Aggregated metrics, one row per (budget, method, component)."""

    rows: list[MetricRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def to_records(self) -> list[dict]:
        return [{col: getattr(row, col) for col in CSV_COLUMNS} for row in self.rows]

    @classmethod
    def from_records(cls, records) -> MetricSeries:
        return cls([MetricRow(**{col: rec[col] for col in CSV_COLUMNS}) for rec in records])


def _metric_rows(
    experiment: str,
    method: str,
    budget: int,
    estimates: np.ndarray,
    truth: np.ndarray,
    log_evidence_mse: float,
    wall_seconds: float,
) -> list[MetricRow]:
    """Replication aggregation: squared bias from the replication mean,
    variance across replications, and mse as their (exact) sum."""
    estimates = np.asarray(estimates, dtype=float)
    mean_est = estimates.mean(axis=0)
    squared_bias = (mean_est - truth) ** 2
    variance = estimates.var(axis=0)
    rows = []
    for comp in range(estimates.shape[1]):
        rows.append(
            MetricRow(
                experiment=experiment,
                method=method,
                budget=int(budget),
                replications=int(estimates.shape[0]),
                component=comp,
                squared_bias=float(squared_bias[comp]),
                variance=float(variance[comp]),
                mse=float(variance[comp] + squared_bias[comp]),
                mean_estimate=float(mean_est[comp]),
                log_evidence_mse=float(log_evidence_mse),
                wall_seconds=float(wall_seconds),
            )
        )
    return rows


def _map_replications(cfg: ExperimentConfig, worker: Callable[[int], dict]) -> list[dict]:
    if cfg.workers == 1:
        return [worker(r) for r in range(cfg.replications)]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(worker, range(cfg.replications)))


# ---------------------------------------------------------------------------
# Gaussian-target experiment
# ---------------------------------------------------------------------------


def _gauss_setup(cfg: ExperimentConfig):
    toy = GaussianToy(log_evidence_offset=0.0 if cfg.sanity_fq else -1000.0)
    center = np.zeros(2) if cfg.experiment == "gauss-centered" else np.array([5.0, 5.0])
    model = toy.model()
    if cfg.sanity_fq:
        prop = FactorizedProposal(block_proposals=(DiagGaussian(0.0, toy.variance),) * toy.dimension)
    else:
        prop = toy.proposal(center)
    return toy, center, model, prop


def _gauss_draw(toy: GaussianToy, center, count: int, src: RandomSource, sanity: bool):
    if sanity:
        return np.sqrt(toy.variance) * src.generator.standard_normal((count, toy.dimension))
    return toy.sample_proposal(count, src, center)


def _plain_log_weights(model: FactorizedModel, prop: FactorizedProposal, pts: np.ndarray) -> np.ndarray:
    lw = np.full(pts.shape[0], float(model.global_log_prior(None)) + model.log_evidence_offset)
    for j in range(model.num_blocks):
        col = pts[:, j]
        lw = lw + (
            np.asarray(model.block_log_priors[j](col), dtype=float)
            + np.asarray(model.block_log_likelihoods[j](None, col), dtype=float)
            - prop.block_proposals[j].log_density_each(col)
        )
    return lw


def gauss_replication(
    toy: GaussianToy,
    model: FactorizedModel,
    prop: FactorizedProposal,
    center,
    budget: int,
    group_size: int,
    src: RandomSource,
    methods=METHODS,
    sanity: bool = False,
) -> dict:
    """One replication: the same proposal draws feed both methods; the plain
    method estimates from them directly, the inflated method recombines them
    group by group first."""
    pts = _gauss_draw(toy, center, budget, src, sanity)
    identity = TestFunction.identity(toy.dimension)
    out: dict[str, dict] = {}
    if "plain" in methods:
        t0 = time.perf_counter()
        sample_set = SampleSet(pts, _plain_log_weights(model, prop, pts))
        out["plain"] = {
            "expectation": self_normalized_estimate(sample_set, identity).value,
            "log_evidence": float(evidence_estimate(sample_set).value[0]),
            "samples": len(sample_set),
            "wall": time.perf_counter() - t0,
        }
    if "inflated" in methods:
        t0 = time.perf_counter()
        inflated = grouped_inflate(pts, group_size, model, prop)
        out["inflated"] = {
            "expectation": self_normalized_estimate(inflated, identity).value,
            "log_evidence": float(evidence_estimate(inflated).value[0]),
            "samples": len(inflated),
            "wall": time.perf_counter() - t0,
        }
    return out


def run_gauss(cfg: ExperimentConfig) -> MetricSeries:
    """Expectation and log-evidence metrics for the Gaussian target, per
    budget and method, over seeded replications."""
    if cfg.experiment not in GAUSS_EXPERIMENTS:
        raise ValueError(f"run_gauss cannot run {cfg.experiment!r}")
    toy, center, model, prop = _gauss_setup(cfg)
    for budget in cfg.budgets:
        if budget < cfg.group_size or budget % cfg.group_size != 0:
            raise ValueError(f"budget {budget} must be a positive multiple of group_size {cfg.group_size}")
    root = RandomSource(cfg.seed)
    truth = toy.true_mean
    series = MetricSeries()
    for bi, budget in enumerate(cfg.budgets):
        worker = lambda r: gauss_replication(
            toy, model, prop, center, budget, cfg.group_size, root.child(bi, r), cfg.methods, cfg.sanity_fq
        )
        results = _map_replications(cfg, worker)
        for method in cfg.methods:
            estimates = np.array([res[method]["expectation"] for res in results])
            log_ev = np.array([res[method]["log_evidence"] for res in results])
            wall = float(sum(res[method]["wall"] for res in results))
            lev_mse = float(np.mean((log_ev - toy.true_log_evidence) ** 2))
            series.rows.extend(
                _metric_rows(cfg.experiment, method, budget, estimates, truth, lev_mse, wall)
            )
    return series


# ---------------------------------------------------------------------------
# Mixture-model experiment
# ---------------------------------------------------------------------------


def _dmm_kernel(cfg: ExperimentConfig):
    if cfg.experiment == "dmm-gauss":
        return GaussianKernel(cfg.kernel_bandwidth)
    return TupleKernel(
        [GaussianKernel(cfg.kernel_bandwidth), VarianceKernel(cfg.kernel_cv), GammaKernel(cfg.kernel_cv)]
    )


def _aligned_estimate(estimate: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Component labels are exchangeable; align the estimate to the truth by
    the error-minimizing permutation before computing metrics."""
    best = None
    for perm in itertools.permutations(range(truth.size)):
        candidate = estimate[list(perm)]
        err = float(np.linalg.norm(candidate - truth))
        if best is None or err < best[0]:
            best = (err, candidate)
    return best[1]


def _dmm_population(cfg: ExperimentConfig, budget: int) -> int:
    """The budget counts total plain samples over the whole run (the
    generation loop outputs that many), so each generation's population is
    the budget divided by the generation count."""
    if budget % cfg.generations != 0:
        raise ValueError(f"budget {budget} must divide into {cfg.generations} generations")
    population = budget // cfg.generations
    if population % cfg.inner_draws != 0:
        raise ValueError(
            f"per-generation population {population} must divide into inner_draws {cfg.inner_draws}"
        )
    return population


def dmm_replication(cfg: ExperimentConfig, budget: int, src: RandomSource) -> dict:
    """One (plain, inflated) pair on a fresh synthetic dataset at matched
    likelihood-evaluation budgets."""
    family = "gaussian" if cfg.experiment == "dmm-gauss" else "student-t"
    data_seed = int(src.child(0).generator.integers(2**63))
    dataset = make_synthetic(family, cfg.true_means, data_seed, cfg.data_count, cfg.mixing)
    spec = DmmSpec(dataset.observations, family)
    model = dmm_model(spec)
    init = dmm_init_proposal(spec)
    h = component_means_function(spec)
    kernel = _dmm_kernel(cfg)
    truth = np.asarray(cfg.true_means, dtype=float)
    population = _dmm_population(cfg, budget)

    out: dict[str, dict] = {"truth": truth, "dataset_seed": data_seed}
    for mi, method in enumerate(cfg.methods):
        pmc_cfg = PmcConfig(
            population_size=population,
            generations=cfg.generations,
            kernel=kernel,
            use_inflation=(method == "inflated"),
            inner_draws=cfg.inner_draws if method == "inflated" else 1,
            global_proposal_builder=informed_assignment_builder(spec),
        )
        t0 = time.perf_counter()
        gens = run_pmc(model, init, pmc_cfg, src.child(1, mi), h)
        wall = time.perf_counter() - t0
        trace = trace_metrics(gens, truth)
        best_marginal = np.array(
            [
                max(
                    spec.marginal_data_log_likelihood(p.global_value[0], p.block_values)
                    for p in g.sample_set.points
                )
                for g in gens
            ]
        )
        aligned = _aligned_estimate(pooled_estimate(gens, h).value, truth)
        out[method] = {
            "estimate": aligned,
            "error": float(np.linalg.norm(aligned - truth)),
            "trace": trace,
            "best_marginal": best_marginal,
            "block_evals": int(trace.block_evals.sum()),
            "samples_per_generation": len(gens[0].sample_set),
            "wall": wall,
        }
    return out


def run_dmm(cfg: ExperimentConfig) -> tuple[MetricSeries, list[dict]]:
    """Mixture-model comparison; returns the aggregate series plus the raw
    per-replication traces (best log likelihood, errors, eval counts)."""
    if cfg.experiment not in DMM_EXPERIMENTS:
        raise ValueError(f"run_dmm cannot run {cfg.experiment!r}")
    root = RandomSource(cfg.seed)
    truth = np.asarray(cfg.true_means, dtype=float)
    series = MetricSeries()
    all_traces: list[dict] = []
    for bi, budget in enumerate(cfg.budgets):
        worker = lambda r: dmm_replication(cfg, budget, root.child(bi, r))
        results = _map_replications(cfg, worker)
        for r, res in enumerate(results):
            record = {"budget": int(budget), "replication": r, "dataset_seed": res["dataset_seed"]}
            for method in cfg.methods:
                trace = res[method]["trace"]
                best_marginal = res[method]["best_marginal"]
                record[method] = {
                    "best_log_likelihood": trace.best_log_likelihood.tolist(),
                    "best_log_likelihood_so_far": trace.best_log_likelihood_so_far.tolist(),
                    "best_marginal_log_likelihood": best_marginal.tolist(),
                    "best_marginal_so_far": np.maximum.accumulate(best_marginal).tolist(),
                    "estimate_error": trace.estimate_error.tolist(),
                    "block_evals": trace.block_evals.tolist(),
                    "final_estimate": np.asarray(res[method]["estimate"]).tolist(),
                    "final_error": res[method]["error"],
                }
            all_traces.append(record)
        for method in cfg.methods:
            estimates = np.array([res[method]["estimate"] for res in results])
            wall = float(sum(res[method]["wall"] for res in results))
            series.rows.extend(
                _metric_rows(cfg.experiment, method, budget, estimates, truth, float("nan"), wall)
            )
    return series, all_traces


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    worst: float
    tolerance: float
    passed: bool


@dataclass
class TheoremReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "cases": c.cases,
                    "worst": c.worst,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def _random_partition(rng: RandomSource, max_size: int, span: float):
    total = int(rng.generator.integers(1, max_size + 1))
    parts = int(rng.generator.integers(1, min(5, total) + 1))
    cuts = np.sort(rng.generator.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else []
    bounds = [0, *cuts, total]
    points = rng.generator.standard_normal((total, 2))
    log_w = -rng.generator.random(total) * span
    return [
        SampleSet(points[a:b], log_w[a:b]) for a, b in zip(bounds[:-1], bounds[1:])
    ]


def _random_small_instance(rng: RandomSource):
    """A small factorized model/proposal pair with a nontrivial global block
    and at most 3 observations per block (9 data points total)."""
    g = rng.generator
    k = int(g.integers(1, 4))
    data = [g.standard_normal(int(g.integers(1, 4))) for _ in range(k)]
    shift = float(g.normal())

    def make_lik(j):
        obs = data[j]
        return lambda phi, gamma: float(-0.5 * np.sum((obs - (phi * shift + gamma)) ** 2))

    prior = DiagGaussian(0.0, 1.0)
    model = FactorizedModel(
        num_blocks=k,
        global_log_prior=prior.log_density,
        block_log_priors=(prior.log_density,) * k,
        block_log_likelihoods=tuple(make_lik(j) for j in range(k)),
        log_evidence_offset=float(g.normal()),
    )
    proposal = FactorizedProposal(
        block_proposals=tuple(DiagGaussian(float(g.normal()), 2.0) for _ in range(k)),
        global_proposal=DiagGaussian(float(g.normal()), 2.0),
    )
    cfg = InflationConfig(int(g.integers(1, 4)), int(g.integers(1, 4)))
    return model, proposal, cfg


def run_theorem_suite(seed: int, instances: int = 500, inflation_instances: int = 200) -> TheoremReport:
    """Execute the estimator and recombination property checks on randomized
    instances and report the worst residual per check."""
    rng = RandomSource(seed)
    h = TestFunction.identity(2)
    checks: list[CheckResult] = []

    partitions = [_random_partition(rng.child(0, i), 1000, float(rng.child(1, i).generator.random() * 600)) for i in range(instances)]
    for kind in ("standard", "self-normalized"):
        worst = max(decomposition_residual(sets, h, kind) for sets in partitions)
        checks.append(CheckResult(f"union-decomposition-{kind}", instances, worst, 1e-10, worst < 1e-10))

    ref_rng = rng.child(2)
    worst_margin = 0.0
    for sets in partitions:
        reference = ref_rng.generator.standard_normal(2)
        for kind in ("standard", "self-normalized"):
            for ord in (1, 2, np.inf):
                margin = error_convexity_margin(sets, h, kind, reference, ord)
                worst_margin = min(worst_margin, margin)
    checks.append(
        CheckResult("error-convexity-bound", instances * 6, worst_margin, -1e-12, worst_margin >= -1e-12)
    )

    adversarial = [_random_partition(rng.child(3, i), 1000, 600.0) for i in range(50)]
    worst_adv = max(
        decomposition_residual(sets, h, kind)
        for sets in adversarial
        for kind in ("standard", "self-normalized")
    )
    checks.append(CheckResult("union-decomposition-600-log-units", 100, worst_adv, 1e-8, worst_adv < 1e-8))

    worst_cache = 0.0
    count_mismatches = 0
    for i in range(inflation_instances):
        inst_rng = rng.child(4, i)
        model, proposal, cfg = _random_small_instance(inst_rng)
        sample_set, counter = inflate(model, proposal, cfg, inst_rng)
        oracle = np.array(
            [
                model.joint_log_density(p.global_value, p.block_values) - proposal.joint_log_density(p)
                for p in sample_set.points
            ]
        )
        worst_cache = max(worst_cache, float(np.max(np.abs(sample_set.log_weights - oracle))))
        if counter.block_likelihood_evals != cfg.outer_draws * cfg.inner_draws * model.num_blocks:
            count_mismatches += 1
    checks.append(
        CheckResult("recombination-cache-vs-oracle", inflation_instances, worst_cache, 1e-12, worst_cache < 1e-12)
    )
    checks.append(
        CheckResult(
            "recombination-eval-count", inflation_instances, float(count_mismatches), 0.0, count_mismatches == 0
        )
    )
    return TheoremReport(checks)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(series: MetricSeries, path, format: str = "csv") -> None:
    """Write the series; CSV columns are fixed, JSON mirrors rows as objects.
    Refuses to create a file for an empty series."""
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")
    if len(series) == 0:
        raise ValueError("refusing to emit an empty series")
    path = Path(path)
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for record in series.to_records():
            lines.append(",".join(_format_value(record[col]) for col in CSV_COLUMNS))
        path.write_text("\n".join(lines) + "\n")
    else:
        payload = {"schema_version": 1, "rows": series.to_records()}
        path.write_text(json.dumps(payload, indent=2) + "\n")
