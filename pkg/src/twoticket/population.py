"""Candidates, feature vectors and the candidate population law."""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .distributions import parse_distribution
from .exceptions import ConfigurationError, DiagnosticError
from .rng import as_streams


class Group(str, Enum):
    P = "P"
    U = "U"


@dataclass(frozen=True)
class FeatureVector:
    """A resume as ``fundamental`` (kept by every LLM) and ``style`` (overwritten) blocks."""

    fundamental: tuple = ()
    style: tuple = ()

    def __post_init__(self):
        fund = tuple(float(v) for v in self.fundamental)
        sty = tuple(float(v) for v in self.style)
        if not fund and not sty:
            raise ConfigurationError("a feature vector needs at least one entry")
        if not all(math.isfinite(v) for v in fund + sty):
            raise ConfigurationError("feature vector entries must be finite")
        object.__setattr__(self, "fundamental", fund)
        object.__setattr__(self, "style", sty)

    @property
    def d1(self):
        return len(self.fundamental)

    @property
    def d2(self):
        return len(self.style)

    def to_array(self):
        return np.array(self.fundamental + self.style, dtype=float)

    @classmethod
    def from_array(cls, values, d1):
        values = np.asarray(values, dtype=float).ravel()
        return cls(tuple(values[:d1]), tuple(values[d1:]))


@dataclass(frozen=True)
class Candidate:
    features: FeatureVector
    group: Group
    label: int

    def __post_init__(self):
        object.__setattr__(self, "group", Group(self.group))
        if self.label not in (0, 1):
            raise ConfigurationError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


# -- label rules: callables from a feature matrix to P(Y = 1 | X) -----------------


@dataclass(frozen=True)
class ScoreThresholdLabel:
    """Deterministic label ``1[s(x) >= cutoff]``."""

    scorer: object
    cutoff: float

    def __call__(self, X):
        return (self.scorer.score_batch(X) >= self.cutoff).astype(float)


@dataclass(frozen=True)
class BernoulliLabel:
    """Label independent of the features, qualified with probability ``p``."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("bernoulli label probability must lie in [0, 1]")

    def __call__(self, X):
        return np.full(len(X), float(self.p))


@dataclass(frozen=True)
class LogisticLabel:
    scorer: object
    center: float
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("logistic label scale must be positive")

    def __call__(self, X):
        z = (self.scorer.score_batch(X) - self.center) / self.scale
        return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class PopulationSpec:
    """Law of ``(X, G, Y)``.

    Groups are drawn independently of the features and the label rule only sees
    the feature matrix, so ``X`` is independent of ``G`` and ``Y`` is independent of
    ``G`` given ``X`` by construction.
    """

    fundamental_law: tuple
    style_law: tuple
    label_rule: Callable
    p_privileged: float = 0.5
    joint_sampler: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        fund = tuple(parse_distribution(d) for d in self.fundamental_law)
        sty = tuple(parse_distribution(d) for d in self.style_law)
        object.__setattr__(self, "fundamental_law", fund)
        object.__setattr__(self, "style_law", sty)
        if len(fund) + len(sty) < 1:
            raise ConfigurationError("population needs at least one feature dimension")
        p = float(self.p_privileged)
        if not 0.0 < p < 1.0:
            raise ConfigurationError(
                f"both groups need positive probability; P(G=P)={p} leaves a group empty")
        object.__setattr__(self, "p_privileged", p)
        if not callable(self.label_rule):
            raise ConfigurationError("label_rule must be callable on a feature matrix")

    @property
    def d1(self):
        return len(self.fundamental_law)

    @property
    def d2(self):
        return len(self.style_law)

    @property
    def group_fractions(self):
        return {Group.P: self.p_privileged, Group.U: 1.0 - self.p_privileged}

    @property
    def laws(self):
        return self.fundamental_law + self.style_law

    def quantile_panel(self, points):
        """``points`` feature vectors at matched quantile levels of each marginal."""
        levels = (np.arange(points) + 0.5) / points
        cols = [law.ppf(levels) for law in self.laws]
        return np.column_stack(cols)


class Population(Sequence):
    """Batch of sampled candidates stored column-wise.

    Behaves as a read-only sequence of :class:`Candidate`.
    """

    def __init__(self, X, group, label, d1):
        self.X = np.asarray(X, dtype=float)
        self.group = np.asarray(group, dtype="<U1")
        self.label = np.asarray(label, dtype=np.int8)
        self.d1 = int(d1)
        n = len(self.X)
        if self.X.ndim != 2 or len(self.group) != n or len(self.label) != n:
            raise ConfigurationError("population columns have inconsistent shapes")

    @classmethod
    def from_candidates(cls, candidates):
        candidates = list(candidates)
        if not candidates:
            raise DiagnosticError("empty candidate list")
        d1 = candidates[0].features.d1
        X = np.array([c.features.to_array() for c in candidates])
        return cls(X, [c.group.value for c in candidates], [c.label for c in candidates], d1)

    @property
    def d2(self):
        return self.X.shape[1] - self.d1

    @property
    def fundamental(self):
        return self.X[:, : self.d1]

    @property
    def style(self):
        return self.X[:, self.d1:]

    def __len__(self):
        return len(self.X)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        return Candidate(FeatureVector.from_array(self.X[i], self.d1), Group(self.group[i]), int(self.label[i]))

    def subset(self, idx):
        return Population(self.X[idx], self.group[idx], self.label[idx], self.d1)


def sample_population(spec, count, rng_stream):
    """Draw ``count`` candidates from ``spec``; reproducible bit-for-bit for a given stream."""
    if int(count) < 1:
        raise ConfigurationError("count must be at least 1")
    count = int(count)
    streams = as_streams(rng_stream)
    laws = spec.laws
    if spec.joint_sampler is not None:
        X = streams.chunked("features", count, lambda g, n: np.asarray(spec.joint_sampler(g, n), float))
        if X.shape != (count, len(laws)):
            raise ConfigurationError("joint sampler returned the wrong shape")
    else:
        U = streams.uniforms("features", count, len(laws))
        X = np.column_stack([law.ppf(U[:, j]) for j, law in enumerate(laws)]) if laws else U
    is_p = streams.chunked("groups", count, lambda g, n: g.random(n)) < spec.p_privileged
    prob = np.asarray(spec.label_rule(X), dtype=float)
    if prob.shape != (count,) or np.any((prob < 0) | (prob > 1)):
        raise ConfigurationError("label rule must return one probability in [0, 1] per row")
    label = streams.chunked("labels", count, lambda g, n: g.random(n)) < prob
    return Population(X, np.where(is_p, "P", "U"), label.astype(np.int8), spec.d1)


@dataclass(frozen=True)
class IndependenceTest:
    name: str
    statistic: float
    dof: int
    pvalue: float


@dataclass(frozen=True)
class IndependenceReport:
    tests: tuple
    alpha: float
    passed: bool

    def failures(self):
        threshold = self.alpha / max(len(self.tests), 1)
        return [t for t in self.tests if t.pvalue < threshold]


def _bin(column, bins):
    edges = np.unique(np.quantile(column, np.linspace(0, 1, bins + 1)[1:-1]))
    return np.searchsorted(edges, column, side="right")


def _chi2(table):
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0, 0
    stat, _, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), int(dof)


def chi_square_independence_check(candidates, bins=10, alpha=0.001):
    """Chi-square diagnostics for ``X independent of G`` and ``Y independent of G given X``.

    Feature independence is tested per dimension on quantile bins. Label
    independence is tested unconditionally and stratified on each binned
    dimension (valid because the joint assumption implies ``Y`` is independent of
    ``G`` given any single coordinate). Bonferroni-corrected at ``alpha``.
    """
    if not isinstance(candidates, Population):
        candidates = Population.from_candidates(candidates)
    if len(candidates) == 0:
        raise DiagnosticError("empty candidate list")
    is_p = candidates.group == "P"
    if is_p.all() or not is_p.any():
        raise DiagnosticError("both groups must be present")
    g = is_p.astype(int)
    y = candidates.label.astype(int)
    tests = []

    stat, dof = _chi2(np.histogram2d(y, g, bins=[2, 2])[0])
    tests.append(IndependenceTest("label~group", stat, dof, stats.chi2.sf(stat, dof) if dof else 1.0))
    for j in range(candidates.X.shape[1]):
        b = _bin(candidates.X[:, j], bins)
        if np.unique(b).size < 2:
            continue
        table = np.zeros((b.max() + 1, 2))
        np.add.at(table, (b, g), 1)
        stat, dof = _chi2(table)
        tests.append(IndependenceTest(f"feature[{j}]~group", stat, dof,
                                      stats.chi2.sf(stat, dof) if dof else 1.0))
        total, total_dof = 0.0, 0
        for k in np.unique(b):
            mask = b == k
            t = np.zeros((2, 2))
            np.add.at(t, (y[mask], g[mask]), 1)
            s, d = _chi2(t)
            total += s
            total_dof += d
        tests.append(IndependenceTest(f"label~group|feature[{j}]", total, total_dof,
                                      stats.chi2.sf(total, total_dof) if total_dof else 1.0))
    threshold = alpha / len(tests)
    return IndependenceReport(tuple(tests), alpha, all(t.pvalue >= threshold for t in tests))
