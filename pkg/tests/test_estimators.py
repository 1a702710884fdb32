import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infmc.distributions import ProductStudentT
from infmc.estimators import (
    DegenerateWeightsError,
    SampleSet,
    TestFunction,
    WeightedSample,
    combine,
    decomposition_residual,
    error_convexity_margin,
    evidence_estimate,
    resample,
    self_normalized_estimate,
    snis_variance_estimate,
    standard_estimate,
)
from infmc.rng import RandomSource

IDENTITY_1D = TestFunction.identity(1)


def make_set(points, log_weights):
    return SampleSet(np.asarray(points, dtype=float).reshape(len(log_weights), -1), log_weights)


class TestSampleSet:
    def test_log_weight_sum_matches_logaddexp(self):
        s = make_set([[0.0], [1.0], [2.0]], np.log([1.0, 2.0, 5.0]))
        assert s.log_weight_sum == pytest.approx(np.log(8.0), abs=1e-12)

    def test_rejects_nan_and_positive_infinity(self):
        with pytest.raises(ValueError):
            make_set([[0.0]], [np.nan])
        with pytest.raises(ValueError):
            make_set([[0.0]], [np.inf])
        with pytest.raises(ValueError):
            WeightedSample(np.zeros(1), np.inf)

    def test_zero_weight_allowed(self):
        s = make_set([[0.0], [1.0]], [0.0, -np.inf])
        assert s.log_weight_sum == pytest.approx(0.0, abs=1e-12)
        assert WeightedSample(np.zeros(1), -np.inf).log_weight == -np.inf

    def test_samples_round_trip(self):
        s = make_set([[1.0], [2.0]], [0.0, -1.0])
        rebuilt = SampleSet.from_samples(s.samples)
        assert np.array_equal(rebuilt.log_weights, s.log_weights)


class TestStandardEstimate:
    def test_unit_weights_collapse_to_sample_mean(self):
        s = make_set([[1.0], [3.0]], [0.0, 0.0])
        assert standard_estimate(s, IDENTITY_1D).value == pytest.approx([2.0])

    def test_single_sample_weight_two(self):
        s = make_set([[3.0]], [np.log(2.0)])
        assert standard_estimate(s, IDENTITY_1D).value == pytest.approx([6.0])

    def test_against_naive_summation(self):
        rng = np.random.default_rng(1)
        points = rng.normal(size=(10, 1))
        log_w = rng.normal(size=10)
        s = make_set(points, log_w)
        naive = sum(np.exp(lw) * p for lw, p in zip(log_w, points[:, 0])) / 10.0
        assert standard_estimate(s, IDENTITY_1D).value == pytest.approx([naive], abs=1e-12)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            standard_estimate(SampleSet(np.empty((0, 1)), np.empty(0)), IDENTITY_1D)


class TestSelfNormalizedEstimate:
    def test_uniform_weights_give_sample_mean(self):
        s = make_set([[0.0], [4.0]], [-3.3, -3.3])
        assert self_normalized_estimate(s, IDENTITY_1D).value == pytest.approx([2.0])

    def test_hand_computed_two_samples(self):
        # (0*1 + 4*3) / (1+3) = 3
        s = make_set([[0.0], [4.0]], np.log([1.0, 3.0]))
        assert self_normalized_estimate(s, IDENTITY_1D).value == pytest.approx([3.0], abs=1e-12)

    @given(st.floats(min_value=-800.0, max_value=600.0))
    def test_shift_invariance(self, offset):
        s = make_set([[0.5], [-1.25], [4.0]], [-0.3, -2.0, -1.1])
        base = self_normalized_estimate(s, IDENTITY_1D).value
        shifted = self_normalized_estimate(s.shifted(offset), IDENTITY_1D).value
        assert shifted == pytest.approx(base, abs=1e-12)

    def test_matches_standard_when_weights_are_unit(self):
        s = make_set([[0.7], [-0.1], [2.0]], [0.0, 0.0, 0.0])
        a = standard_estimate(s, IDENTITY_1D).value
        b = self_normalized_estimate(s, IDENTITY_1D).value
        assert np.array_equal(a, b)

    def test_all_zero_weights_rejected(self):
        s = make_set([[0.0], [1.0]], [-np.inf, -np.inf])
        with pytest.raises(DegenerateWeightsError):
            self_normalized_estimate(s, IDENTITY_1D)

    def test_negative_components_handled_in_log_space(self):
        s = make_set([[-3.0], [1.0]], [-700.0, -700.0])
        assert self_normalized_estimate(s, IDENTITY_1D).value == pytest.approx([-1.0], abs=1e-12)


class TestVarianceEstimate:
    def test_constant_function_gives_zero(self):
        s = make_set([[1.0], [2.0]], [0.0, -1.0])
        const = TestFunction(lambda pts: np.ones((len(pts), 1)), 1)
        assert snis_variance_estimate(s, const) == pytest.approx([0.0])

    def test_single_sample_gives_zero(self):
        s = make_set([[5.0]], [0.3])
        assert snis_variance_estimate(s, IDENTITY_1D) == pytest.approx([0.0])

    def test_three_samples_match_direct_double_pass(self):
        points = np.array([[1.0], [2.0], [4.0]])
        log_w = np.log([0.2, 0.5, 0.3])
        s = make_set(points, log_w)
        w = np.exp(log_w)
        est = np.sum(w * points[:, 0]) / w.sum()
        direct = np.sum((w / w.sum()) ** 2 * (points[:, 0] - est) ** 2)
        assert snis_variance_estimate(s, IDENTITY_1D) == pytest.approx([direct], abs=1e-12)


class TestEvidenceEstimate:
    def test_unit_weights_give_exact_zero(self):
        s = make_set([[0.0], [1.0], [2.0]], [0.0, 0.0, 0.0])
        assert evidence_estimate(s).value[0] == 0.0

    def test_constant_low_weights(self):
        s = make_set(np.zeros((7, 1)), np.full(7, -1000.0))
        assert evidence_estimate(s).value[0] == pytest.approx(-1000.0, abs=1e-10)

    def test_hand_computed_mixture(self):
        s = make_set([[0.0], [0.0]], np.log([2.0, 4.0]))
        assert evidence_estimate(s).value[0] == pytest.approx(np.log(3.0), abs=1e-12)


class TestCombine:
    def test_single_set_identity(self):
        s = make_set([[1.0]], [0.0])
        assert combine([s]) is s

    def test_cardinality_and_weight_sum(self):
        a = make_set([[0.0], [1.0]], [-1.0, -2.0])
        b = make_set([[2.0]], [0.5])
        u = combine([a, b])
        assert len(u) == 3
        assert u.log_weight_sum == pytest.approx(
            np.logaddexp(a.log_weight_sum, b.log_weight_sum), abs=1e-12
        )

    def test_duplicates_preserved(self):
        a = make_set([[1.0]], [0.0])
        u = combine([a, a])
        assert len(u) == 2


def random_partition(seed, span=600.0, max_total=60, dim=2):
    rng = np.random.default_rng(seed)
    total = rng.integers(1, max_total + 1)
    parts = rng.integers(1, min(4, total) + 1)
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else np.array([], dtype=int)
    bounds = [0, *cuts.tolist(), total]
    points = rng.normal(size=(total, dim))
    log_w = -rng.random(total) * span
    return [SampleSet(points[a:b], log_w[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]


class TestDecomposition:
    """The union estimate equals the convex combination of per-part estimates."""

    def test_single_part_residual_zero(self):
        sets = random_partition(0)
        union = combine(sets)
        assert decomposition_residual([union], TestFunction.identity(2), "standard") == 0.0
        assert decomposition_residual([union], TestFunction.identity(2), "self-normalized") == 0.0

    def test_two_explicit_parts(self):
        rng = np.random.default_rng(3)
        a = SampleSet(rng.normal(size=(5, 2)), rng.normal(size=5))
        b = SampleSet(rng.normal(size=(5, 2)), rng.normal(size=5))
        for kind in ("standard", "self-normalized"):
            assert decomposition_residual([a, b], TestFunction.identity(2), kind) < 1e-10

    @settings(max_examples=120, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_randomized_partitions(self, seed):
        sets = random_partition(seed)
        h = TestFunction.identity(2)
        for kind in ("standard", "self-normalized"):
            assert decomposition_residual(sets, h, kind) < 1e-10

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_error_convexity_over_three_norms(self, seed):
        sets = random_partition(seed)
        h = TestFunction.identity(2)
        reference = np.random.default_rng(seed + 1).normal(size=2)
        for kind in ("standard", "self-normalized"):
            for ord in (1, 2, np.inf):
                assert error_convexity_margin(sets, h, kind, reference, ord) >= -1e-12

    def test_theorem_side_check_explicit(self):
        # the weighted average of per-part errors bounds the union error
        sets = random_partition(17, span=5.0)
        h = TestFunction.identity(2)
        union = combine(sets)
        reference = np.array([0.25, -1.0])
        lambdas = np.array([len(s) / len(union) for s in sets])
        per_part = np.array([standard_estimate(s, h).value for s in sets])
        avg_err = float(lambdas @ [np.linalg.norm(v - reference) for v in per_part])
        union_err = float(np.linalg.norm(standard_estimate(union, h).value - reference))
        assert avg_err >= union_err - 1e-12 >= -1e-12


class TestResample:
    def test_single_sample_set(self):
        s = make_set([[3.0]], [0.0])
        draws = resample(s, 5, RandomSource(0))
        assert all(p[0] == 3.0 for p in draws)

    def test_zero_weight_never_drawn(self):
        s = make_set([[1.0], [2.0]], [0.0, -np.inf])
        draws = resample(s, 200, RandomSource(1))
        assert all(p[0] == 1.0 for p in draws)

    def test_frequencies_proportional_to_weights(self):
        s = make_set([[0.0], [1.0]], np.log([1.0, 3.0]))
        draws = np.array(resample(s, 10**5, RandomSource(2)))
        assert abs(draws.mean() - 0.75) < 0.01

    def test_all_zero_weights_rejected(self):
        s = make_set([[1.0]], [-np.inf])
        with pytest.raises(DegenerateWeightsError):
            resample(s, 3, RandomSource(0))

    def test_preserves_weighted_mean_in_expectation(self):
        s = make_set([[0.0], [1.0], [4.0]], np.log([0.2, 0.3, 0.5]))
        target = self_normalized_estimate(s, IDENTITY_1D).value[0]
        rng = RandomSource(33)
        reps, size = 10**4, 8
        means = np.empty(reps)
        for r in range(reps):
            means[r] = np.mean([p[0] for p in resample(s, size, rng)])
        stderr = means.std(ddof=1) / np.sqrt(reps)
        assert abs(means.mean() - target) < 3 * stderr


class TestConsistencyOnGaussianTarget:
    """Self-normalized estimates tighten at the 1/n rate on the 2-D toy."""

    def test_median_error_decreases_and_mse_rate(self):
        from infmc.distributions import StudentT
        from infmc.models import GaussianToy

        toy = GaussianToy()
        model = toy.model()
        prop = ProductStudentT(np.zeros(2), np.full(2, np.sqrt(2.0)), 20.0)
        t = StudentT(0.0, np.sqrt(2.0), 20.0)
        budgets = [100, 1000, 10000]
        errors = np.empty((50, len(budgets)))
        sq_err = np.empty((50, len(budgets)))
        root = RandomSource(2024)
        h = TestFunction.identity(2)
        for r in range(50):
            for bi, n in enumerate(budgets):
                pts = prop.sample_batch(n, root.child(r, bi))
                log_w = (
                    model.block_log_priors[0](pts[:, 0])
                    + model.block_log_priors[1](pts[:, 1])
                    + toy.log_evidence_offset
                    - t.log_density_each(pts[:, 0])
                    - t.log_density_each(pts[:, 1])
                )
                est = self_normalized_estimate(SampleSet(pts, log_w), h).value
                errors[r, bi] = np.linalg.norm(est)
                sq_err[r, bi] = float(np.sum(est**2))
        medians = np.median(errors, axis=0)
        assert medians[0] > medians[1] > medians[2]
        mse = sq_err.mean(axis=0)
        for a, b in zip(mse[:-1], mse[1:]):
            assert 5.0 <= a / b <= 20.0
