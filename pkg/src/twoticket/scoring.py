"""Monotone resume scorers, the threshold classifier and score laws under a manipulation."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import PointMass
from .exceptions import ConfigurationError
from .manipulation import NULL_OUTPUT
from .population import FeatureVector
from .rng import as_generator


def _check_clip(clip):
    if clip is None:
        return None
    lo, hi = (float(v) for v in clip)
    if not lo <= hi:
        raise ConfigurationError("clip needs lo <= hi")
    return (lo, hi)


class Scorer:
    """Monotone non-decreasing map from feature vectors to reals."""

    def score_batch(self, X):
        raise NotImplementedError

    @property
    def dim(self):
        raise NotImplementedError

    def score(self, x):
        """Score one input. ``NULL_OUTPUT`` scores minus infinity."""
        if x is NULL_OUTPUT:
            return -math.inf
        if isinstance(x, FeatureVector):
            x = x.to_array()
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return float(self.score_batch(X)[0])

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ConfigurationError(f"scorer expects {self.dim} features, got shape {X.shape}")
        return X

    def _clip(self, s):
        if self.clip is not None:
            s = np.clip(s, *self.clip)
        return s


@dataclass(frozen=True)
class LinearScorer(Scorer):
    """``w . x + offset`` with non-negative weights, optionally clipped to ``[lo, hi]``."""

    weights: tuple
    offset: float = 0.0
    clip: Optional[tuple] = None

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise ConfigurationError("scorer needs at least one weight")
        if any(v < 0 or not math.isfinite(v) for v in w):
            raise ConfigurationError("scorer weights must be finite and non-negative (monotonicity)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "clip", _check_clip(self.clip))

    @property
    def dim(self):
        return len(self.weights)

    def score_batch(self, X):
        X = self._check(X)
        return self._clip(X @ np.asarray(self.weights) + self.offset)


@dataclass(frozen=True)
class MonotoneTableScorer(Scorer):
    """Per-dimension non-decreasing piecewise-linear links fed to a linear scorer.

    ``links[j]`` is ``(knots_x, knots_y)``; values outside the knots are held flat.
    """

    links: tuple
    weights: tuple
    offset: float = 0.0
    clip: Optional[tuple] = None

    def __post_init__(self):
        links = []
        for xs, ys in self.links:
            xs, ys = np.asarray(xs, float), np.asarray(ys, float)
            if xs.shape != ys.shape or xs.size < 2:
                raise ConfigurationError("each link needs matching knot arrays of length >= 2")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) < 0):
                raise ConfigurationError("link knots must be increasing with non-decreasing values")
            links.append((tuple(xs), tuple(ys)))
        object.__setattr__(self, "links", tuple(links))
        linear = LinearScorer(self.weights, self.offset)
        if linear.dim != len(links):
            raise ConfigurationError("one link per weight is required")
        object.__setattr__(self, "weights", linear.weights)
        object.__setattr__(self, "offset", linear.offset)
        object.__setattr__(self, "clip", _check_clip(self.clip))

    @property
    def dim(self):
        return len(self.weights)

    def score_batch(self, X):
        X = self._check(X)
        mapped = np.column_stack([np.interp(X[:, j], xs, ys) for j, (xs, ys) in enumerate(self.links)])
        return self._clip(mapped @ np.asarray(self.weights) + self.offset)


@dataclass(frozen=True)
class ThresholdClassifier:
    scorer: Scorer
    tau: float

    def classify(self, x):
        """1 iff ``s(x) >= tau``; the boundary is accepted."""
        return int(self.scorer.score(x) >= self.tau)

    def decide(self, scores):
        return (np.asarray(scores, dtype=float) >= self.tau).astype(np.int8)


def score(scorer, x):
    return scorer.score(x)


def classify(clf, x):
    return clf.classify(x)


# -- score laws ------------------------------------------------------------------


EXACT = "exact"
MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class ScoreLaw:
    """``prob = P(s(L(x)) < tau)``."""

    prob: float
    method: str
    n_samples: int = 0
    stderr: float = 0.0

    @property
    def exact(self):
        return self.method == EXACT


def _exact_parts(scorer, model, d1):
    """``(varying_law, constant)`` so that ``s(L(x)) = varying + w_f . fund(x) + constant``.

    ``varying_law`` is None when the output is deterministic. Returns None when no
    closed form is available.
    """
    if not isinstance(scorer, LinearScorer) or scorer.clip is not None:
        return None
    if model.style_marginals is None:
        return None
    w_style = np.asarray(scorer.weights[d1:])
    constant = scorer.offset
    varying = None
    for w, law in zip(w_style, model.style_marginals):
        law = law.normalized()
        if isinstance(law, PointMass) or w == 0.0:
            constant += w * (law.value if isinstance(law, PointMass) else 0.0)
            continue
        if varying is not None:
            return None
        varying = law.affine(w, 0.0)
    return varying, constant


def has_closed_form(scorer, model, d1):
    """Whether :func:`score_law` is exact for ``model`` under ``scorer``."""
    return model.is_null or _exact_parts(scorer, model, d1) is not None


def score_distribution(scorer, model, x):
    """Exact law of ``s(L(x))`` when it is an affine image of one catalog marginal."""
    d1 = x.d1
    parts = _exact_parts(scorer, model, d1)
    if parts is None:
        return None
    varying, constant = parts
    shift = constant + float(np.dot(scorer.weights[:d1], x.fundamental))
    return PointMass(shift) if varying is None else varying.affine(1.0, shift)


def score_law(scorer, model, x, tau, n_samples=20000, rng=None):
    """``P(s(L(x)) < tau)``, exact where a closed form exists, else Monte Carlo."""
    if model.is_null:
        return ScoreLaw(1.0, EXACT)
    model.check_dims(x.d2)
    law = score_distribution(scorer, model, x)
    if law is not None:
        return ScoreLaw(float(law.cdf_strict(tau)), EXACT)
    probs, stderr = score_law_batch(scorer, model, x.to_array()[None, :], x.d1, tau, n_samples, rng)
    return ScoreLaw(float(probs[0]), MONTE_CARLO, n_samples, float(stderr[0]))


def score_law_batch(scorer, model, X, d1, tau, n_samples=20000, rng=None):
    """Vectorised ``P(s(L(x)) < tau)`` for every row of ``X``; returns ``(probs, stderr)``.

    ``tau`` may be a scalar or one threshold per row.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(X),))
    if model.is_null:
        return np.ones(len(X)), np.zeros(len(X))
    parts = _exact_parts(scorer, model, d1)
    if parts is not None:
        varying, constant = parts
        shift = constant + X[:, :d1] @ np.asarray(scorer.weights[:d1])
        if varying is None:
            probs = (shift < tau).astype(float)
        else:
            probs = np.asarray(varying.cdf_strict(tau - shift), dtype=float)
        return probs, np.zeros(len(X))
    if rng is None:
        raise ValueError("Monte Carlo score law needs an rng")
    rng = as_generator(rng)
    probs = np.empty(len(X))
    for i, row in enumerate(X):
        style = model.sample_style(n_samples, rng)
        full = np.column_stack([np.broadcast_to(row[:d1], (n_samples, d1)), style])
        probs[i] = np.mean(scorer.score_batch(full) < tau[i])
    return probs, np.sqrt(probs * (1 - probs) / n_samples)


def draw_scores(scorer, model, fundamental, uniforms=None, rng=None):
    """Scores of one manipulation draw per row; minus infinity for the null LLM.

    Parametric models consume ``uniforms`` (``(n, d2)``) so callers can couple
    models; joint-sampler models draw from ``rng``.
    """
    n = len(fundamental)
    if model.is_null:
        return np.full(n, -np.inf)
    if model.style_marginals is not None and uniforms is not None:
        style = model.style_from_uniforms(uniforms)
    else:
        style = model.sample_style(n, rng)
    return scorer.score_batch(np.column_stack([fundamental, style]))
