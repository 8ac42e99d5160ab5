"""Univariate distribution catalog used for feature laws and LLM style marginals.

All sampling goes through the quantile function, so two distributions fed the
same uniforms are monotonically coupled whenever one first-order dominates the
other.
"""

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import ConfigurationError, ParseError


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    return value


class Distribution:
    """Interface shared by the catalog members."""

    def ppf(self, u):
        raise NotImplementedError

    def cdf(self, t):
        """P(X <= t)."""
        raise NotImplementedError

    def cdf_strict(self, t):
        """P(X < t)."""
        return self.cdf(t)

    def sf(self, t):
        """P(X > t); accurate in the upper tail where ``1 - cdf`` rounds to zero."""
        return 1.0 - self.cdf(t)

    def affine(self, scale, shift):
        """Law of ``scale * X + shift`` for ``scale > 0``."""
        raise NotImplementedError

    def landmarks(self):
        """Points where CDF comparisons against other laws are informative."""
        raise NotImplementedError

    def sample(self, rng, size):
        return self.ppf(rng.random(size))

    def normalized(self):
        return self


@dataclass(frozen=True)
class PointMass(Distribution):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _finite("point mass", self.value))

    def ppf(self, u):
        return np.full(np.shape(u), self.value, dtype=float)

    def cdf(self, t):
        return np.where(np.asarray(t, dtype=float) >= self.value, 1.0, 0.0)

    def cdf_strict(self, t):
        return np.where(np.asarray(t, dtype=float) > self.value, 1.0, 0.0)

    @property
    def mean(self):
        return self.value

    @property
    def support(self):
        return (self.value, self.value)

    def affine(self, scale, shift):
        return PointMass(scale * self.value + shift)

    def landmarks(self):
        return [self.value]

    def __str__(self):
        return f"point({self.value:g})"


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float
    high: float

    def __post_init__(self):
        low = _finite("uniform low", self.low)
        high = _finite("uniform high", self.high)
        if not low < high:
            raise ConfigurationError(f"uniform needs low < high, got ({low}, {high})")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        # convex-combination form keeps quantiles monotone in (low, high) under rounding
        return np.clip((1.0 - u) * self.low + u * self.high, self.low, self.high)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip((t - self.low) / (self.high - self.low), 0.0, 1.0)

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    @property
    def support(self):
        return (self.low, self.high)

    def affine(self, scale, shift):
        return Uniform(scale * self.low + shift, scale * self.high + shift)

    def landmarks(self):
        return [self.high, self.low, self.mean]

    def __str__(self):
        return f"uniform({self.low:g}, {self.high:g})"


@dataclass(frozen=True)
class Gaussian(Distribution):
    mu: float
    sigma: float

    def __post_init__(self):
        mu = _finite("gaussian mean", self.mu)
        sigma = _finite("gaussian sigma", self.sigma)
        if sigma <= 0:
            raise ConfigurationError(f"gaussian sigma must be positive, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def ppf(self, u):
        return self.mu + self.sigma * special.ndtri(np.asarray(u, dtype=float))

    def cdf(self, t):
        return special.ndtr((np.asarray(t, dtype=float) - self.mu) / self.sigma)

    def sf(self, t):
        return special.ndtr((self.mu - np.asarray(t, dtype=float)) / self.sigma)

    @property
    def mean(self):
        return self.mu

    @property
    def support(self):
        return (-math.inf, math.inf)

    def affine(self, scale, shift):
        return Gaussian(scale * self.mu + shift, scale * self.sigma)

    def landmarks(self):
        return [self.mu + k * self.sigma for k in (3, 2, 1, 0, -1, -2, -3)]

    def __str__(self):
        return f"gaussian({self.mu:g}, {self.sigma:g})"


@dataclass(frozen=True)
class Shifted(Distribution):
    """``base + delta``; resolved to the base family for every computation."""

    base: Distribution
    delta: float

    def __post_init__(self):
        if not isinstance(self.base, Distribution):
            raise ConfigurationError("shifted() needs a catalog distribution as base")
        object.__setattr__(self, "delta", _finite("shift", self.delta))

    def normalized(self):
        return self.base.normalized().affine(1.0, self.delta)

    def ppf(self, u):
        return self.base.ppf(u) + self.delta

    def cdf(self, t):
        return self.normalized().cdf(t)

    def cdf_strict(self, t):
        return self.normalized().cdf_strict(t)

    def sf(self, t):
        return self.normalized().sf(t)

    @property
    def mean(self):
        return self.normalized().mean

    @property
    def support(self):
        return self.normalized().support

    def affine(self, scale, shift):
        return self.normalized().affine(scale, shift)

    def landmarks(self):
        return self.normalized().landmarks()

    def __str__(self):
        return f"shifted({self.base}, {self.delta:g})"


def fosd(a, b):
    """True when ``a`` first-order stochastically dominates ``b`` (F_a <= F_b).

    Exact for every pair in the catalog.
    """
    a, b = a.normalized(), b.normalized()
    if isinstance(a, Gaussian) or isinstance(b, Gaussian):
        if isinstance(a, Gaussian) and isinstance(b, Gaussian):
            return a.sigma == b.sigma and a.mu >= b.mu
        # an unbounded tail always crosses a bounded law
        return False
    a_lo, a_hi = a.support
    b_lo, b_hi = b.support
    return a_lo >= b_lo and a_hi >= b_hi


def cdf_witness(a, b):
    """A point t with F_a(t) > F_b(t), or None if ``a`` dominates ``b``.

    Landmarks are tried first, then a dense grid.
    """
    a, b = a.normalized(), b.normalized()
    if fosd(a, b):
        return None
    candidates = list(a.landmarks()) + list(b.landmarks())
    if isinstance(a, Gaussian) and isinstance(b, Gaussian) and a.sigma != b.sigma:
        # CDFs cross once; F_a > F_b above the crossing when a is narrower, below it otherwise
        cross = (a.mu * b.sigma - b.mu * a.sigma) / (b.sigma - a.sigma)
        step = max(a.sigma, b.sigma)
        candidates.insert(0, cross + step if a.sigma < b.sigma else cross - step)
    for t in candidates:
        # either test certifies F_a(t) > F_b(t); the survival form survives tail underflow
        if float(a.cdf(t)) > float(b.cdf(t)) or float(a.sf(t)) < float(b.sf(t)):
            return float(t)
    lo = min(min(a.landmarks()), min(b.landmarks())) - 10.0
    hi = max(max(a.landmarks()), max(b.landmarks())) + 10.0
    grid = np.linspace(lo, hi, 20001)
    gap = np.maximum(a.cdf(grid) - b.cdf(grid), b.sf(grid) - a.sf(grid))
    i = int(np.argmax(gap))
    return float(grid[i]) if gap[i] > 0 else None


_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$", re.S)


def _split_args(text):
    args, depth, current = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            args.append("".join(current).strip())
            current = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        current.append(ch)
    tail = "".join(current).strip()
    if tail:
        args.append(tail)
    return args


def parse_distribution(text):
    """Parse ``point(c)``, ``uniform(a,b)``, ``gaussian(mu,sigma)`` or ``shifted(dist, delta)``."""
    if isinstance(text, Distribution):
        return text
    if isinstance(text, (int, float)):
        return PointMass(float(text))
    m = _CALL.match(str(text))
    if not m:
        raise ParseError(f"cannot parse distribution {text!r}")
    name, args = m.group(1).lower(), _split_args(m.group(2))
    try:
        if name in ("point", "pointmass", "const"):
            (c,) = args
            return PointMass(float(c))
        if name == "uniform":
            a, b = args
            return Uniform(float(a), float(b))
        if name in ("gaussian", "normal"):
            mu, sigma = args
            return Gaussian(float(mu), float(sigma))
        if name == "shifted":
            base, delta = args
            return Shifted(parse_distribution(base), float(delta))
    except ValueError as exc:
        if isinstance(exc, (ConfigurationError, ParseError)):
            raise
        raise ParseError(f"bad arguments in {text!r}") from exc
    raise ParseError(f"unknown distribution {name!r} in {text!r}")
