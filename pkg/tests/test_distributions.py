import numpy as np
import pytest
import scipy.stats

from infmc.distributions import (
    Categorical,
    DiagGaussian,
    Dirichlet,
    Gamma,
    ProductStudentT,
    ScalarInverseWishart,
    StudentT,
    TupleDensity,
    log_density,
    sample,
)
from infmc.rng import RandomSource


class TestRandomSource:
    def test_identical_seeds_identical_streams(self):
        a = RandomSource(1234).generator.standard_normal(1000)
        b = RandomSource(1234).generator.standard_normal(1000)
        assert np.array_equal(a, b)

    def test_child_streams_are_keyed_not_ordered(self):
        root = RandomSource(7)
        early = root.child(3).generator.standard_normal(10)
        # deriving other children first must not change child(3)
        root2 = RandomSource(7)
        root2.child(0), root2.child(1)
        late = root2.child(3).generator.standard_normal(10)
        assert np.array_equal(early, late)

    def test_children_differ_from_parent_and_each_other(self):
        root = RandomSource(7)
        streams = [c.generator.standard_normal(50) for c in root.split(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.allclose(streams[i], streams[j])

    def test_nested_keys(self):
        a = RandomSource(1).child(2, 3).generator.random()
        b = RandomSource(1).child(2).child(3).generator.random()
        assert a == b

    def test_invalid_seed(self):
        with pytest.raises(ValueError):
            RandomSource(-1)


class TestDiagGaussian:
    def test_standard_normal_at_mode_2d(self):
        d = DiagGaussian(np.zeros(2), np.ones(2))
        assert d.log_density(np.zeros(2)) == pytest.approx(-np.log(2 * np.pi), abs=1e-12)

    def test_sample_mean_law_of_large_numbers(self):
        d = DiagGaussian(np.array([5.0, 5.0]), np.array([2.0, 2.0]))
        rng = RandomSource(99)
        draws = np.array([d.sample(rng) for _ in range(10**5)])
        assert np.all(np.abs(draws.mean(axis=0) - 5.0) < 0.05)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            DiagGaussian(np.zeros(2), np.ones(2)).log_density(np.zeros(3))

    def test_scalar_parameters_give_scalar_draws(self):
        d = DiagGaussian(0.0, 2.0)
        x = d.sample(RandomSource(0))
        assert isinstance(x, float)
        each = d.log_density_each(np.array([0.0, 1.0]))
        assert each.shape == (2,)
        assert each[0] == pytest.approx(d.log_density(0.0), abs=1e-15)

    def test_invalid_variance(self):
        with pytest.raises(ValueError):
            DiagGaussian(0.0, 0.0)


class TestStudentT:
    def test_matches_scipy(self):
        d = StudentT(0.3, 1.7, 5.0)
        for x in [-2.0, 0.0, 0.3, 4.5]:
            assert d.log_density(x) == pytest.approx(
                scipy.stats.t.logpdf(x, df=5.0, loc=0.3, scale=1.7), abs=1e-12
            )

    def test_product_equals_sum_of_univariate(self):
        # per-coordinate t with the paper-style scale, against scipy twice
        d = ProductStudentT(np.zeros(2), np.full(2, np.sqrt(2.0)), 20.0)
        expected = 2 * scipy.stats.t.logpdf(0.0, df=20.0, scale=np.sqrt(2.0))
        assert d.log_density(np.zeros(2)) == pytest.approx(expected, abs=1e-12)

    def test_batch_sampling_matches_scalar_scale(self):
        d = ProductStudentT(np.array([1.0, -1.0]), np.array([0.5, 2.0]), 4.0)
        draws = d.sample_batch(20000, RandomSource(3))
        assert draws.shape == (20000, 2)
        assert np.abs(np.median(draws, axis=0) - d.loc).max() < 0.05


class TestGamma:
    def test_unit_exponential_at_one(self):
        assert Gamma(1.0, 1.0).log_density(1.0) == pytest.approx(-1.0, abs=1e-12)

    def test_negative_support(self):
        assert Gamma(2.0, 1.0).log_density(-0.5) == -np.inf

    def test_matches_scipy(self):
        d = Gamma(2.5, 0.7)
        for x in [0.1, 1.0, 7.3]:
            assert d.log_density(x) == pytest.approx(
                scipy.stats.gamma.logpdf(x, a=2.5, scale=0.7), abs=1e-12
            )

    def test_sample_mean(self):
        rng = RandomSource(11)
        d = Gamma(3.0, 2.0)
        draws = np.array([d.sample(rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(6.0, abs=0.1)


class TestScalarInverseWishart:
    def test_equals_inverse_gamma_reduction(self):
        # 1x1 inverse-Wishart(scale_sq, df) is inverse-gamma(df/2, scale_sq/2)
        d = ScalarInverseWishart(5.0, 1.0)
        for x in [0.05, 0.5, 2.0, 40.0]:
            expected = scipy.stats.invgamma.logpdf(x, a=0.5, scale=2.5)
            assert d.log_density(x) == pytest.approx(expected, abs=1e-12)

    def test_nonpositive_support(self):
        d = ScalarInverseWishart(2.0, 4.0)
        assert d.log_density(0.0) == -np.inf
        assert d.log_density(-1.0) == -np.inf

    def test_sample_mean_when_defined(self):
        # mean is scale_sq / (df - 2) for df > 2
        d = ScalarInverseWishart(12.0, 8.0)
        rng = RandomSource(5)
        draws = np.array([d.sample(rng) for _ in range(40000)])
        assert draws.mean() == pytest.approx(2.0, rel=0.05)


class TestCategorical:
    def test_degenerate_always_first(self):
        d = Categorical([1.0, 0.0])
        rng = RandomSource(0)
        assert all(d.sample(rng) == 0 for _ in range(100))

    def test_log_density(self):
        d = Categorical([0.25, 0.75])
        assert d.log_density(1) == pytest.approx(np.log(0.75), abs=1e-12)
        assert d.log_density(0.5) == -np.inf
        assert d.log_density(2) == -np.inf
        assert Categorical([1.0, 0.0]).log_density(1) == -np.inf

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            Categorical([0.5, 0.4])
        with pytest.raises(ValueError):
            Categorical([-0.1, 1.1])


class TestDirichlet:
    def test_samples_sum_to_one_exactly(self):
        d = Dirichlet([1.0, 1.0])
        rng = RandomSource(21)
        draws = np.array([d.sample(rng) for _ in range(5000)])
        assert np.all(draws.sum(axis=1) == 1.0)
        assert np.abs(draws.mean(axis=0) - 0.5).max() < 0.02

    def test_log_density_matches_scipy(self):
        d = Dirichlet([2.0, 3.5])
        for x in [0.2, 0.5, 0.9]:
            point = np.array([x, 1.0 - x])
            assert d.log_density(point) == pytest.approx(
                scipy.stats.dirichlet.logpdf(point, [2.0, 3.5]), abs=1e-12
            )

    def test_off_simplex(self):
        d = Dirichlet([2.0, 3.0])
        assert d.log_density(np.array([0.7, 0.7])) == -np.inf
        assert d.log_density(np.array([-0.1, 1.1])) == -np.inf

    def test_positive_concentration_required(self):
        with pytest.raises(ValueError):
            Dirichlet([1.0, 0.0])


class TestTupleDensity:
    def test_sums_parts(self):
        d = TupleDensity([DiagGaussian(0.0, 1.0), Gamma(1.0, 1.0)])
        value = (0.5, 2.0)
        expected = DiagGaussian(0.0, 1.0).log_density(0.5) + Gamma(1.0, 1.0).log_density(2.0)
        assert d.log_density(value) == pytest.approx(expected, abs=1e-12)
        drawn = d.sample(RandomSource(4))
        assert len(drawn) == 2


class TestModuleSurface:
    def test_free_functions_delegate(self):
        d = Gamma(1.0, 1.0)
        rng = RandomSource(8)
        x = sample(d, rng)
        assert log_density(d, x) == d.log_density(x)


def _grid_mass_1d(density, lo, hi, n=200001):
    xs = np.linspace(lo, hi, n)
    return np.trapezoid(np.exp(density.log_density_each(xs)), xs)


class TestNormalization:
    """exp(log_density) integrates to 1 on a truncated support."""

    def test_univariate_families(self):
        cases = [
            (DiagGaussian(0.3, 1.7), -12.0, 12.0),
            (StudentT(0.2, 1.3, 5.0), -300.0, 300.0),
            (Gamma(2.0, 1.5), 1e-9, 60.0),
            (ScalarInverseWishart(2.0, 5.0), 1e-6, 400.0),
        ]
        for density, lo, hi in cases:
            assert _grid_mass_1d(density, lo, hi) == pytest.approx(1.0, abs=1e-3)

    def test_dirichlet_via_first_coordinate(self):
        d = Dirichlet([2.0, 3.0])
        xs = np.linspace(1e-9, 1.0 - 1e-9, 100001)
        pdf = np.exp([d.log_density(np.array([x, 1.0 - x])) for x in xs])
        assert np.trapezoid(pdf, xs) == pytest.approx(1.0, abs=1e-3)

    def test_2d_products(self):
        xs = np.linspace(-10.0, 10.0, 1201)
        cases = [
            (DiagGaussian(np.zeros(2), np.full(2, 2.0)), DiagGaussian(0.0, 2.0)),
            (ProductStudentT(np.zeros(2), np.full(2, np.sqrt(2.0)), 20.0), StudentT(0.0, np.sqrt(2.0), 20.0)),
        ]
        for density, marginal in cases:
            each = marginal.log_density_each(xs)
            joint = each[:, None] + each[None, :]
            # the grid must agree with direct joint evaluation at spot points
            for i, j in [(0, 0), (600, 600), (600, 1200), (137, 901)]:
                direct = density.log_density(np.array([xs[i], xs[j]]))
                assert joint[i, j] == pytest.approx(direct, abs=1e-10)
            mass = np.trapezoid(np.trapezoid(np.exp(joint), xs, axis=1), xs)
            assert mass == pytest.approx(1.0, abs=1e-3)

    def test_reproducible_streams_per_family(self):
        for density in (DiagGaussian(0.0, 1.0), StudentT(0.0, 1.0, 3.0), Gamma(2.0, 2.0),
                        ScalarInverseWishart(3.0, 5.0), Dirichlet([1.5, 2.5]), Categorical([0.3, 0.7])):
            a = [density.sample(RandomSource(1000)) for _ in range(1)]
            b = [density.sample(RandomSource(1000)) for _ in range(1)]
            assert repr(a) == repr(b)
