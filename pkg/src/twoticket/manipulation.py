"""LLM manipulations: stochastic maps that overwrite the style block of a resume.

The fundamental block is always passed through untouched, and the new style
block is drawn from the model's own law regardless of the input style. Applying
a model twice therefore has the same output law as applying it once.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .distributions import cdf_witness, fosd, parse_distribution
from .exceptions import ConfigurationError, ContractError, DiagnosticError, ParseError
from .population import FeatureVector
from .rng import as_generator


class _NullOutput:
    """Output of the null LLM. Scores as minus infinity and never wins an argmax."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NULL_OUTPUT"

    def __reduce__(self):
        return (_NullOutput, ())


NULL_OUTPUT = _NullOutput()


@dataclass(frozen=True)
class ManipulationModel:
    """A parametric LLM manipulation, or the null LLM when ``style_marginals`` is None.

    ``joint_sampler(generator, n) -> (n, d2)`` replaces the independent marginals
    when style coordinates should be dependent; such models are excluded from the
    analytic dominance order.
    """

    style_marginals: Optional[tuple] = None
    joint_sampler: Optional[Callable] = field(default=None, compare=False)
    joint_d2: Optional[int] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.style_marginals is not None:
            margs = tuple(parse_distribution(d) for d in self.style_marginals)
            if not margs:
                raise ConfigurationError("a parametric manipulation needs at least one style marginal")
            object.__setattr__(self, "style_marginals", margs)
        if self.joint_sampler is not None and self.joint_d2 is None:
            raise ConfigurationError("joint sampler models must declare joint_d2")

    @classmethod
    def null(cls):
        return cls(name="null")

    @classmethod
    def parametric(cls, marginals, name=""):
        return cls(style_marginals=tuple(marginals), name=name)

    @classmethod
    def from_joint(cls, sampler, d2, name=""):
        return cls(joint_sampler=sampler, joint_d2=int(d2), name=name)

    @property
    def is_null(self):
        return self.style_marginals is None and self.joint_sampler is None

    @property
    def d2(self):
        if self.style_marginals is not None:
            return len(self.style_marginals)
        return self.joint_d2

    def check_dims(self, d2):
        if not self.is_null and self.d2 != d2:
            raise ConfigurationError(f"manipulation has {self.d2} style dims, input has {d2}")

    def style_from_uniforms(self, u):
        """Style block from ``(n, d2)`` uniforms via the marginal quantile functions."""
        u = np.atleast_2d(u)
        if self.style_marginals is None:
            raise ContractError("quantile sampling needs independent marginals")
        return np.column_stack([m.ppf(u[:, j]) for j, m in enumerate(self.style_marginals)])

    def sample_style(self, n, rng):
        if self.is_null:
            raise ContractError("the null LLM has no style law")
        rng = as_generator(rng)
        if self.joint_sampler is not None:
            out = np.asarray(self.joint_sampler(rng, n), dtype=float)
            if out.shape != (n, self.d2):
                raise ConfigurationError("joint sampler returned the wrong shape")
            return out
        return self.style_from_uniforms(rng.random((n, self.d2)))

    def apply(self, x, rng):
        return apply(self, x, rng)

    def __str__(self):
        if self.is_null:
            return "null"
        if self.style_marginals is None:
            return self.name or "joint"
        return "; ".join(str(m) for m in self.style_marginals)


NULL_LLM = ManipulationModel.null()


def parse_manipulation(spec, name=""):
    """``"null"``, a single distribution string, a ``;``-separated list, or a list."""
    if isinstance(spec, ManipulationModel):
        return spec
    if spec is None or (isinstance(spec, str) and spec.strip().lower() in ("null", "none", "")):
        return ManipulationModel(name=name or "null")
    if isinstance(spec, str):
        parts = [p for p in spec.split(";") if p.strip()]
    elif isinstance(spec, (list, tuple)):
        parts = list(spec)
    else:
        raise ParseError(f"cannot parse manipulation spec {spec!r}")
    return ManipulationModel(style_marginals=tuple(parse_distribution(p) for p in parts), name=name)


def apply(model, x, rng):
    """One draw of ``model`` on feature vector ``x``.

    Returns a new :class:`FeatureVector` with the same fundamental block, or
    ``NULL_OUTPUT`` for the null LLM.
    """
    if model.is_null:
        return NULL_OUTPUT
    model.check_dims(x.d2)
    style = model.sample_style(1, rng)[0]
    return FeatureVector(x.fundamental, tuple(style))


class Relation(str, Enum):
    DOMINATES = "Dominates"
    DOMINATED_BY = "DominatedBy"
    EQUIVALENT = "Equivalent"
    INCOMPARABLE = "Incomparable"
    UNKNOWN = "Unknown"


class Method(str, Enum):
    ANALYTIC = "Analytic"
    EMPIRICAL = "EmpiricalCDF"


@dataclass(frozen=True)
class DominanceVerdict:
    relation: Relation
    method: Method
    witness: Optional[float] = None
    witness_dim: Optional[int] = None
    tolerance: Optional[float] = None
    n_samples: Optional[tuple] = None

    @property
    def a_dominates_b(self):
        """``a`` is at least as good as ``b`` (dominates or equivalent)."""
        return self.relation in (Relation.DOMINATES, Relation.EQUIVALENT)

    def __str__(self):
        text = f"{self.relation.value} ({self.method.value})"
        if self.witness is not None:
            text += f", witness a={self.witness:g}"
            if self.witness_dim is not None:
                text += f" in style dim {self.witness_dim}"
        return text


def _combine(forward, backward):
    if forward and backward:
        return Relation.EQUIVALENT
    if forward:
        return Relation.DOMINATES
    if backward:
        return Relation.DOMINATED_BY
    return Relation.INCOMPARABLE


def dominates_analytic(a, b):
    """Exact dominance verdict between two manipulation models.

    With independent style marginals, ``a`` dominates ``b`` iff every marginal of
    ``a`` first-order dominates the matching marginal of ``b``: quantile coupling
    then orders the outputs componentwise, and projecting onto a coordinate shows
    the condition is also necessary.
    """
    if a.is_null or b.is_null:
        if a.is_null and b.is_null:
            return DominanceVerdict(Relation.EQUIVALENT, Method.ANALYTIC)
        return DominanceVerdict(Relation.DOMINATED_BY if a.is_null else Relation.DOMINATES, Method.ANALYTIC)
    if a.style_marginals is None or b.style_marginals is None:
        return DominanceVerdict(Relation.UNKNOWN, Method.ANALYTIC)
    if a.d2 != b.d2:
        raise ConfigurationError(f"models disagree on style dimension ({a.d2} vs {b.d2})")
    fwd = [fosd(x, y) for x, y in zip(a.style_marginals, b.style_marginals)]
    bwd = [fosd(y, x) for x, y in zip(a.style_marginals, b.style_marginals)]
    relation = _combine(all(fwd), all(bwd))
    witness = dim = None
    if not all(fwd):
        dim = fwd.index(False)
        witness = cdf_witness(a.style_marginals[dim], b.style_marginals[dim])
    return DominanceVerdict(relation, Method.ANALYTIC, witness, dim if a.d2 > 1 else None)


def dominates_empirical(a_samples, b_samples, tolerance=0.01):
    """Compare two empirical CDFs over the merged support.

    ``a`` dominates when ``F_a <= F_b + tolerance`` everywhere.
    """
    a = np.sort(np.asarray(a_samples, dtype=float).ravel())
    b = np.sort(np.asarray(b_samples, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise DiagnosticError("empirical dominance needs non-empty samples")
    if tolerance < 0:
        raise ConfigurationError("tolerance must be non-negative")
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    gap = fa - fb
    forward = bool(np.all(gap <= tolerance))
    backward = bool(np.all(-gap <= tolerance))
    witness = None if forward else float(grid[int(np.argmax(gap))])
    return DominanceVerdict(_combine(forward, backward), Method.EMPIRICAL, witness,
                            tolerance=float(tolerance), n_samples=(a.size, b.size))


@dataclass(frozen=True)
class UtilityCheckReport:
    passed: bool
    gaps: np.ndarray
    sigmas: np.ndarray
    violations: tuple


def random_monotone_utilities(count, d2, lo, hi, rng, max_steps=4):
    """Random non-decreasing step functions on the style block.

    Each utility is a positive combination of indicators ``1[z_S >= t]`` of upper
    orthants over random coordinate subsets ``S``.
    """
    rng = as_generator(rng)
    utilities = []
    for _ in range(count):
        steps = []
        for _ in range(int(rng.integers(1, max_steps + 1))):
            dims = np.flatnonzero(rng.random(d2) < 0.5)
            if dims.size == 0:
                dims = np.array([int(rng.integers(d2))])
            t = lo[dims] + rng.random(dims.size) * (hi[dims] - lo[dims])
            steps.append((dims, t, float(rng.exponential())))
        utilities.append(steps)

    def evaluate(steps, Z):
        out = np.zeros(len(Z))
        for dims, t, w in steps:
            out += w * np.all(Z[:, dims] >= t, axis=1)
        return out

    return [lambda Z, s=s: evaluate(s, Z) for s in utilities]


def utility_dominance_check(a, b, x, trials, utilities, rng, coupled=True, n_sigma=3.0):
    """Monte Carlo check that ``E[u(a(x))] >= E[u(b(x))]`` for random monotone ``u``.

    ``coupled`` feeds both models the same uniforms (a monotone coupling) and uses
    the standard error of the paired differences; otherwise draws are independent.
    """
    verdict = dominates_analytic(a, b)
    if not verdict.a_dominates_b:
        raise ContractError(f"utility check needs a to dominate b, got {verdict}")
    if a.is_null or b.is_null:
        raise ContractError("the null LLM has no output law to integrate over")
    rng = as_generator(rng)
    a.check_dims(x.d2)
    b.check_dims(x.d2)
    if coupled:
        u = rng.random((trials, x.d2))
        Za, Zb = a.style_from_uniforms(u), b.style_from_uniforms(u)
    else:
        Za, Zb = a.sample_style(trials, rng), b.sample_style(trials, rng)
    pooled = np.vstack([Za, Zb])
    lo, hi = np.quantile(pooled, 0.01, axis=0), np.quantile(pooled, 0.99, axis=0)
    us = random_monotone_utilities(utilities, x.d2, lo, hi, rng)
    gaps, sigmas, bad = [], [], []
    for i, u_fn in enumerate(us):
        ua, ub = u_fn(Za), u_fn(Zb)
        gap = ua.mean() - ub.mean()
        if coupled:
            sigma = (ua - ub).std(ddof=1) / np.sqrt(trials)
        else:
            sigma = np.sqrt(ua.var(ddof=1) / trials + ub.var(ddof=1) / trials)
        gaps.append(gap)
        sigmas.append(sigma)
        if gap < -n_sigma * sigma:
            bad.append(i)
    return UtilityCheckReport(not bad, np.array(gaps), np.array(sigmas), tuple(bad))
