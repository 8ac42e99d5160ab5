"""Disparity and performance metrics, confidence intervals over repeated splits."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from ._validation import check_groups, check_labels
from .exceptions import ConfigurationError, DegenerateSplitError
from .population import Candidate, Group
from .rng import as_streams
from .schemes import acceptance_probability_mc
from .scoring import EXACT, MONTE_CARLO, score_law


@dataclass(frozen=True)
class MetricsReport:
    """Empirical rates; a field is None when its denominator is empty."""

    tpr: Optional[float]
    fpr: Optional[float]
    accuracy: float
    tpr_P: Optional[float]
    tpr_U: Optional[float]
    tpr_disparity: Optional[float]
    counts: dict = field(default_factory=dict)

    @property
    def undefined(self):
        return tuple(k for k in ("tpr", "fpr", "tpr_P", "tpr_U", "tpr_disparity") if getattr(self, k) is None)

    def as_dict(self):
        out = asdict(self)
        out.pop("counts")
        return out


def _rate(hits, total):
    return float(hits) / total if total else None


def evaluate(decisions, labels, groups):
    """TPR, FPR, accuracy and TPR disparity from exact counts."""
    d = np.asarray(decisions).astype(bool)
    y = check_labels(labels).astype(bool)
    g = check_groups(groups)
    if d.size == 0:
        raise ConfigurationError("nothing to evaluate")
    if not (d.size == y.size == g.size):
        raise ConfigurationError("decisions, labels and groups differ in length")
    is_p = g == "P"
    counts = {
        "n": int(d.size),
        "positives": int(y.sum()),
        "negatives": int((~y).sum()),
        "tp": int((d & y).sum()),
        "fp": int((d & ~y).sum()),
        "positives_P": int((y & is_p).sum()),
        "positives_U": int((y & ~is_p).sum()),
        "tp_P": int((d & y & is_p).sum()),
        "tp_U": int((d & y & ~is_p).sum()),
    }
    tpr_p = _rate(counts["tp_P"], counts["positives_P"])
    tpr_u = _rate(counts["tp_U"], counts["positives_U"])
    return MetricsReport(
        tpr=_rate(counts["tp"], counts["positives"]),
        fpr=_rate(counts["fp"], counts["negatives"]),
        accuracy=float(np.mean(d == y)),
        tpr_P=tpr_p,
        tpr_U=tpr_u,
        tpr_disparity=None if tpr_p is None or tpr_u is None else tpr_p - tpr_u,
        counts=counts,
    )


def evaluate_records(records, candidates):
    """:func:`evaluate` on play records joined with their candidates' group and label."""
    records = list(records)
    candidates = list(candidates)
    return evaluate([r.decision for r in records],
                    [candidates[r.candidate_id].label for r in records],
                    [candidates[r.candidate_id].group.value for r in records])


@dataclass(frozen=True)
class Disparity:
    delta: float
    stderr: float
    method: str


def resume_outcome_disparity(x, spec, scorer, mode="analytic", replications=10000, rng=None,
                             n_samples=20000):
    """Acceptance probability of resume ``x`` in group P minus in group U.

    Analytic mode uses the factorised form ``1[s(x) < tau] q_H^n (q_U - q_P)``,
    which keeps sign and ordering comparisons exact in floating point.
    """
    spec._require_threshold()
    tau = spec.threshold
    if mode == "analytic":
        if scorer.score(x) >= tau:
            return Disparity(0.0, 0.0, EXACT)
        laws = [score_law(scorer, m, x, tau, n_samples, rng)
                for m in (spec.hirer_model, spec.candidate_models[Group.U], spec.candidate_models[Group.P])]
        q_h, q_u, q_p = laws
        method = EXACT if all(l.exact for l in laws) else MONTE_CARLO
        return Disparity(q_h.prob ** spec.tickets * (q_u.prob - q_p.prob), 0.0, method)
    if mode == "mc":
        p, se_p = acceptance_probability_mc(spec, Candidate(x, Group.P, 1), scorer, replications, rng)
        u, se_u = acceptance_probability_mc(spec, Candidate(x, Group.U, 1), scorer, replications, rng)
        return Disparity(p - u, math.hypot(se_p, se_u), MONTE_CARLO)
    raise ConfigurationError(f"unknown disparity mode {mode!r}")


# -- repeated-split confidence intervals -----------------------------------------


@dataclass(frozen=True)
class Interval:
    mean: Optional[float]
    half_width: Optional[float]
    sd: Optional[float]
    n: int

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BootstrapResult:
    intervals: dict
    splits_used: int
    splits_skipped: int
    confidence: float
    per_split: list

    def __getitem__(self, key):
        return self.intervals[key]


def make_split(n_items, train_fraction, generator, resample=False):
    """Random train/test partition, or a bootstrap resample with out-of-bag test set."""
    if resample:
        train = generator.integers(0, n_items, n_items)
        test = np.setdiff1d(np.arange(n_items), train)
        return np.sort(train), test
    perm = generator.permutation(n_items)
    n_train = int(round(train_fraction * n_items))
    n_train = min(max(n_train, 1), n_items - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def interval(values, confidence):
    """Normal-approximation interval ``mean +/- z sd / sqrt(n)`` over split values."""
    vals = np.array([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return Interval(None, None, None, 0)
    mean = float(vals.mean())
    if vals.size < 2:
        return Interval(mean, None, None, 1)
    sd = float(vals.std(ddof=1))
    z = stats.norm.ppf(0.5 + confidence / 2)
    return Interval(mean, float(z * sd / math.sqrt(vals.size)), sd, int(vals.size))


def bootstrap_ci(experiment, n_items, splits, confidence, rng_stream, train_fraction=0.7,
                 resample=False, jobs=1):
    """Run ``experiment(train_idx, test_idx) -> {metric: value}`` on repeated splits.

    Splits raising :class:`DegenerateSplitError` are skipped and counted. Each
    split draws from its own keyed stream, so results do not depend on ``jobs``.
    """
    if int(splits) < 2:
        raise ConfigurationError("need at least 2 splits for an interval")
    if not 0.0 < confidence < 1.0:
        raise ConfigurationError("confidence must lie in (0, 1)")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError("train fraction must lie in (0, 1)")
    streams = as_streams(rng_stream)

    def one(i):
        train, test = make_split(n_items, train_fraction, streams.generator("split", i), resample)
        try:
            return experiment(train, test)
        except DegenerateSplitError:
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(int(splits))))
    else:
        results = [one(i) for i in range(int(splits))]
    used = [r for r in results if r is not None]
    keys = []
    for r in used:
        keys.extend(k for k in r if k not in keys)
    intervals = {k: interval([r.get(k) for r in used], confidence) for k in keys}
    return BootstrapResult(intervals, len(used), len(results) - len(used), confidence, used)


# -- n-ticket decay ----------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    rate: Optional[float]
    r2: Optional[float]
    slope: Optional[float]
    intercept: Optional[float]
    converged: bool
    n_points: int


def fit_geometric_decay(sequence, floor=0.0):
    """Least-squares fit of ``log|value|`` against ``n``; ``rate = exp(slope)``.

    Sequences with fewer than three values above ``floor`` are flagged as
    already converged.
    """
    pts = [(float(n), abs(float(v))) for n, v in sequence]
    pts = [(n, v) for n, v in pts if v > floor]
    if len(pts) < 3:
        return DecayFit(None, None, None, None, True, len(pts))
    n = np.array([p[0] for p in pts])
    logv = np.log([p[1] for p in pts])
    res = stats.linregress(n, logv)
    return DecayFit(float(math.exp(res.slope)), float(res.rvalue ** 2), float(res.slope),
                    float(res.intercept), False, len(pts))
