"""No-false-positive threshold selection and the threshold consistency check."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, LemmaViolation
from .manipulation import NULL_LLM, dominates_analytic
from .population import Population
from .rng import as_streams
from .scoring import score_distribution
from .schemes import realize_scores
from ._validation import check_scores_labels

DEFAULT_EPSILON = 1e-9


class VacuousThresholdWarning(UserWarning):
    """No negatives were present, so every threshold has zero false positives."""


@dataclass(frozen=True)
class ThresholdDerivation:
    tau_star: float
    max_negative_score: float
    epsilon: float
    n_negatives: int
    n_positives: int
    tpr: float
    fpr: float
    target_fpr: float = 0.0
    vacuous: bool = False
    components: dict = field(default_factory=dict)


def _bump(value, epsilon):
    out = value + epsilon
    return out if out > value else float(np.nextafter(value, math.inf))


def learn_threshold(scores, labels=None, epsilon=DEFAULT_EPSILON, target_fpr=0.0):
    """Smallest threshold whose training FPR does not exceed ``target_fpr``.

    With the default ``target_fpr=0`` this is ``max negative score + epsilon``:
    acceptance is ``score >= tau``, so the top negative itself must fall below
    the threshold. ``scores`` is either an array (with ``labels``) or a list of
    ``(score, label)`` pairs.
    """
    if labels is None:
        pairs = list(scores)
        if not pairs:
            raise ConfigurationError("threshold learning needs at least one scored example")
        scores, labels = zip(*pairs)
    scores, labels = check_scores_labels(scores, labels)
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    if not 0.0 <= target_fpr < 1.0:
        raise ConfigurationError("target_fpr must lie in [0, 1)")
    neg = np.sort(scores[labels == 0])[::-1]
    pos = scores[labels == 1]
    if neg.size == 0:
        warnings.warn("no negatives in training data; threshold accepts everyone",
                      VacuousThresholdWarning, stacklevel=2)
        return ThresholdDerivation(-math.inf, -math.inf, epsilon, 0, int(pos.size),
                                   1.0 if pos.size else math.nan, math.nan, target_fpr, True)
    allowed = int(math.floor(target_fpr * neg.size + 1e-12))
    if allowed >= neg.size:
        allowed = neg.size - 1
    tau = _bump(float(neg[allowed]), epsilon)
    tpr = float(np.mean(pos >= tau)) if pos.size else math.nan
    fpr = float(np.mean(neg >= tau))
    return ThresholdDerivation(tau, float(neg[0]), epsilon, int(neg.size), int(pos.size),
                               tpr, fpr, target_fpr)


def max_order_quantile(law, m, level):
    """Quantile at ``level`` of the maximum of ``m`` i.i.d. draws from ``law``."""
    if m < 1:
        return -math.inf
    return float(law.ppf(math.exp(math.log(level) / m)))


def max_order_tolerance(privileged_law, hirer_law, n_privileged, n_hirer, alpha=1e-3):
    """Sampling tolerance for ``max(hirer draws) - max(privileged draws)``.

    Bounds the gap by the upper ``alpha/2`` quantile of the hirer maximum minus
    the lower ``alpha/2`` quantile of the privileged maximum, both computed from
    exact order-statistic laws. Zero when the privileged support sits strictly
    above the hirer's.
    """
    hi = max_order_quantile(hirer_law, n_hirer, 1 - alpha / 2)
    lo = max_order_quantile(privileged_law, n_privileged, alpha / 2)
    return max(0.0, hi - lo)


@dataclass(frozen=True)
class ConsistencyReport:
    M: float
    M_P: float
    M_U: float
    M_H: tuple
    tau_star: tuple
    max_abs_diff: float
    precondition: tuple
    violations: tuple
    tolerance: float

    @property
    def consistent(self):
        return not self.violations


def check_threshold_consistency(scorer, population, L_P, L_U, hirer_models, rng_stream,
                                epsilon=DEFAULT_EPSILON, tolerance=0.0, raise_on_violation=False):
    """Estimate the per-channel negative maxima and the threshold under each hirer model.

    The threshold for hirer ``k`` is ``max(M, M_P, M_U, M_H[k]) + epsilon``. When
    the privileged LLM analytically dominates hirer ``k`` the check asserts
    ``M_P >= M_H[k] - tolerance`` and records a violation otherwise.
    """
    if not isinstance(population, Population):
        population = Population.from_candidates(population)
    streams = as_streams(rng_stream)
    neg = population.subset(np.flatnonzero(population.label == 0))
    if len(neg) == 0:
        raise ConfigurationError("consistency check needs negatives")
    hirer_models = list(hirer_models)
    base = realize_scores(neg, scorer, {"P": L_P, "U": L_U}, NULL_LLM, 0, streams)

    def _max(values):
        return float(values.max()) if values.size else -math.inf

    M = _max(base.original)
    M_P = _max(base.candidate[neg.group == "P"])
    M_U = _max(base.candidate[neg.group == "U"])
    traditional = max(M, M_P, M_U)
    m_h, taus, pre, bad = [], [], [], []
    for k, H in enumerate(hirer_models):
        r = realize_scores(neg, scorer, {"P": L_P, "U": L_U}, H, 1, streams.spawn("hirer", k))
        mh = _max(r.hirer[:, 0])
        m_h.append(mh)
        taus.append(_bump(max(traditional, mh), epsilon))
        holds = dominates_analytic(L_P, H).a_dominates_b
        pre.append(holds)
        if holds and mh > M_P + tolerance:
            bad.append(k)
    diff = float(max(taus) - min(taus)) if taus else 0.0
    report = ConsistencyReport(M, M_P, M_U, tuple(m_h), tuple(taus), diff, tuple(pre), tuple(bad), tolerance)
    if bad and raise_on_violation:
        raise LemmaViolation(f"hirer maxima exceed the privileged maximum for models {bad}")
    return report


def threshold_gap_tolerance(scorer, x, L_P, hirer_model, n_privileged, n_hirer, alpha=1e-3):
    """:func:`max_order_tolerance` for resumes sharing feature vector ``x``."""
    p_law = score_distribution(scorer, L_P, x)
    h_law = score_distribution(scorer, hirer_model, x)
    if p_law is None or h_law is None:
        raise ConfigurationError("threshold gap tolerance needs closed-form score laws")
    return max_order_tolerance(p_law, h_law, n_privileged, n_hirer, alpha)
