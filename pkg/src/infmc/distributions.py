"""Samplers and log-density evaluators for the distributions the experiments need.

Every density works in log space; ``log_density`` returns ``-inf`` outside the
support and never raises for out-of-support points.  Univariate families also
expose ``log_density_each`` which maps an array of points to an array of
per-point log densities (used by the vectorized inflation path).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .rng import RandomSource

__all__ = [
    "Density",
    "DiagGaussian",
    "StudentT",
    "ProductStudentT",
    "Dirichlet",
    "Categorical",
    "Gamma",
    "ScalarInverseWishart",
    "TupleDensity",
    "sample",
    "log_density",
]

LOG_TWO_PI = math.log(2.0 * math.pi)


class Density:
    """Base for a sampler / log-density pair."""

    def sample(self, rng: RandomSource):
        raise NotImplementedError

    def log_density(self, x) -> float:
        raise NotImplementedError

    def log_density_each(self, xs: np.ndarray) -> np.ndarray:
        """Per-point log densities for an array of univariate points."""
        raise NotImplementedError(f"{type(self).__name__} has no elementwise form")


def _positive(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be strictly positive and finite, got {value!r}")
    return arr


class DiagGaussian(Density):
    """Gaussian with independent coordinates; scalar parameters give a univariate."""

    def __init__(self, mean, var):
        self.mean = np.asarray(mean, dtype=float)
        self.var = _positive(var, "var")
        np.broadcast_shapes(self.mean.shape, self.var.shape)

    def sample(self, rng: RandomSource):
        shape = np.broadcast_shapes(self.mean.shape, self.var.shape)
        draw = self.mean + np.sqrt(self.var) * rng.generator.standard_normal(shape)
        return float(draw) if draw.ndim == 0 else draw

    def log_density(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != np.broadcast_shapes(x.shape, self.mean.shape, self.var.shape):
            raise ValueError(f"dimension mismatch: point {x.shape}, density {self.mean.shape}")
        terms = LOG_TWO_PI + np.log(self.var) + (x - self.mean) ** 2 / self.var
        return float(-0.5 * np.sum(terms))

    def log_density_each(self, xs: np.ndarray) -> np.ndarray:
        if self.mean.ndim != 0 or self.var.ndim != 0:
            raise NotImplementedError("elementwise form requires scalar parameters")
        xs = np.asarray(xs, dtype=float)
        return -0.5 * (LOG_TWO_PI + np.log(self.var) + (xs - self.mean) ** 2 / self.var)


def _student_t_logpdf(x, loc, scale, df):
    z = (x - loc) / scale
    return (
        gammaln((df + 1.0) / 2.0)
        - gammaln(df / 2.0)
        - 0.5 * np.log(df * np.pi)
        - np.log(scale)
        - (df + 1.0) / 2.0 * np.log1p(z * z / df)
    )


class StudentT(Density):
    """Univariate Student-t with location, scale and degrees of freedom."""

    def __init__(self, loc: float, scale: float, df: float):
        self.loc = float(loc)
        self.scale = float(_positive(scale, "scale"))
        self.df = float(_positive(df, "df"))

    def sample(self, rng: RandomSource) -> float:
        return self.loc + self.scale * float(rng.generator.standard_t(self.df))

    def log_density(self, x) -> float:
        return float(_student_t_logpdf(float(x), self.loc, self.scale, self.df))

    def log_density_each(self, xs: np.ndarray) -> np.ndarray:
        return _student_t_logpdf(np.asarray(xs, dtype=float), self.loc, self.scale, self.df)


class ProductStudentT(Density):
    """Independent Student-t coordinates (a product of univariate t densities).

    This factorizes per coordinate, unlike a genuinely multivariate t whose
    coordinates are dependent; per-block recombination requires the product
    form.
    """

    def __init__(self, loc, scale, df: float):
        self.loc = np.atleast_1d(np.asarray(loc, dtype=float))
        self.scale = np.atleast_1d(_positive(scale, "scale"))
        self.df = float(_positive(df, "df"))
        np.broadcast_shapes(self.loc.shape, self.scale.shape)

    def sample(self, rng: RandomSource) -> np.ndarray:
        shape = np.broadcast_shapes(self.loc.shape, self.scale.shape)
        return self.loc + self.scale * rng.generator.standard_t(self.df, size=shape)

    def sample_batch(self, count: int, rng: RandomSource) -> np.ndarray:
        shape = np.broadcast_shapes(self.loc.shape, self.scale.shape)
        return self.loc + self.scale * rng.generator.standard_t(self.df, size=(count,) + shape)

    def log_density(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != np.broadcast_shapes(x.shape, self.loc.shape, self.scale.shape):
            raise ValueError(f"dimension mismatch: point {x.shape}, density {self.loc.shape}")
        return float(np.sum(_student_t_logpdf(x, self.loc, self.scale, self.df)))


class Dirichlet(Density):
    """Dirichlet over the probability simplex."""

    def __init__(self, concentration):
        self.concentration = np.atleast_1d(_positive(concentration, "concentration"))
        if self.concentration.size < 2:
            raise ValueError("Dirichlet needs at least two components")

    def sample(self, rng: RandomSource) -> np.ndarray:
        draw = rng.generator.dirichlet(self.concentration)
        # pin the exact-sum invariant; the generator is only ulp-close
        draw[-1] = max(0.0, 1.0 - float(draw[:-1].sum()))
        return draw

    def log_density(self, x) -> float:
        x = np.asarray(x, dtype=float)
        a = self.concentration
        if x.shape != a.shape:
            raise ValueError(f"dimension mismatch: point {x.shape}, density {a.shape}")
        if np.any(x < 0.0) or abs(float(x.sum()) - 1.0) > 1e-9:
            return -np.inf
        nonunit = a != 1.0
        if np.any(nonunit & (x == 0.0)):
            return -np.inf  # simplex boundary: zero density (a>1) or excluded by convention (a<1)
        terms = np.sum((a[nonunit] - 1.0) * np.log(x[nonunit]))
        return float(terms + gammaln(a.sum()) - np.sum(gammaln(a)))


class Categorical(Density):
    """Finite distribution over indices ``0..K-1``."""

    def __init__(self, probs):
        probs = np.atleast_1d(np.asarray(probs, dtype=float))
        if np.any(probs < 0.0):
            raise ValueError("categorical probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError(f"categorical probabilities must sum to 1, got {probs.sum()!r}")
        self.probs = probs / probs.sum()

    def sample(self, rng: RandomSource) -> int:
        return int(rng.generator.choice(self.probs.size, p=self.probs))

    def sample_batch(self, count: int, rng: RandomSource) -> np.ndarray:
        return rng.generator.choice(self.probs.size, size=count, p=self.probs)

    def log_density(self, x) -> float:
        k = int(x)
        if k != x or not 0 <= k < self.probs.size or self.probs[k] == 0.0:
            return -np.inf
        return float(np.log(self.probs[k]))


class Gamma(Density):
    """Gamma in shape-scale parametrization (mean = shape * scale)."""

    def __init__(self, shape: float, scale: float):
        self.shape = float(_positive(shape, "shape"))
        self.scale = float(_positive(scale, "scale"))

    def sample(self, rng: RandomSource) -> float:
        return float(rng.generator.gamma(self.shape, self.scale))

    def log_density(self, x) -> float:
        return float(self.log_density_each(np.asarray(float(x))))

    def log_density_each(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        base = -gammaln(self.shape) - self.shape * np.log(self.scale)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = base + (self.shape - 1.0) * np.log(xs) - xs / self.scale
        out = np.where(xs > 0.0, out, -np.inf)
        if self.shape == 1.0:  # Exp(1/scale): the boundary x=0 has finite density
            out = np.where(xs == 0.0, base, out)
        return out


class ScalarInverseWishart(Density):
    """Inverse-Wishart on a 1x1 matrix, i.e. a scalar variance.

    The 1x1 reduction is an inverse-gamma with shape ``df/2`` and scale
    ``scale_sq/2``; only the scalar case is needed here.
    """

    def __init__(self, scale_sq: float, df: float):
        self.scale_sq = float(_positive(scale_sq, "scale_sq"))
        self.df = float(_positive(df, "df"))
        self._shape = self.df / 2.0
        self._rate = self.scale_sq / 2.0

    def sample(self, rng: RandomSource) -> float:
        return self._rate / float(rng.generator.gamma(self._shape, 1.0))

    def log_density(self, x) -> float:
        return float(self.log_density_each(np.asarray(float(x))))

    def log_density_each(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        base = self._shape * np.log(self._rate) - gammaln(self._shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = base - (self._shape + 1.0) * np.log(xs) - self._rate / xs
        return np.where(xs > 0.0, out, -np.inf)


class TupleDensity(Density):
    """Independent parts sampled and evaluated jointly as a tuple."""

    def __init__(self, parts):
        self.parts = tuple(parts)
        if not self.parts:
            raise ValueError("TupleDensity needs at least one part")

    def sample(self, rng: RandomSource) -> tuple:
        return tuple(part.sample(rng) for part in self.parts)

    def log_density(self, x) -> float:
        if len(x) != len(self.parts):
            raise ValueError(f"dimension mismatch: {len(x)} values for {len(self.parts)} parts")
        return float(sum(part.log_density(v) for part, v in zip(self.parts, x)))


def sample(spec: Density, rng: RandomSource):
    """Draw once from ``spec``, consuming ``rng`` deterministically."""
    return spec.sample(rng)


def log_density(spec: Density, x) -> float:
    """Natural-log density of ``spec`` at ``x``; ``-inf`` outside the support."""
    return spec.log_density(x)
