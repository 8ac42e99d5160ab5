"""Hiring games: candidate best response, Traditional / Two-Ticket / n-Ticket play.

A scheme with ``n`` hirer tickets considers the best of the submitted resume and
``n`` independent hirer manipulations of it. Overwrite semantics make every hirer
draw depend on the fundamental block only, so the draws are i.i.d. given the
original resume.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ConfigurationError
from .manipulation import NULL_LLM, ManipulationModel
from .population import Candidate, FeatureVector, Group, Population
from .rng import as_generator, as_streams
from .scoring import EXACT, MONTE_CARLO, draw_scores, score_law


class SchemeKind(str, Enum):
    TRADITIONAL = "traditional"
    TWO_TICKET = "two_ticket"
    N_TICKET = "n_ticket"


@dataclass(frozen=True)
class SchemeSpec:
    kind: SchemeKind
    candidate_models: dict
    hirer_model: ManipulationModel = NULL_LLM
    threshold: float = math.nan
    n: int = 0

    def __post_init__(self):
        kind = SchemeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        models = {Group(g): m for g, m in dict(self.candidate_models).items()}
        if set(models) != {Group.P, Group.U}:
            raise ConfigurationError("candidate_models needs an entry for both P and U")
        object.__setattr__(self, "candidate_models", models)
        if kind is SchemeKind.TRADITIONAL:
            if not self.hirer_model.is_null:
                raise ConfigurationError("the Traditional scheme uses the null hirer LLM")
            object.__setattr__(self, "n", 0)
        else:
            if self.hirer_model.is_null:
                raise ConfigurationError(f"{kind.value} needs a non-null hirer LLM")
            if kind is SchemeKind.TWO_TICKET:
                object.__setattr__(self, "n", 1)
            elif int(self.n) < 1:
                raise ConfigurationError("n-ticket needs n >= 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "threshold", float(self.threshold))

    @classmethod
    def traditional(cls, candidate_models, threshold=math.nan):
        return cls(SchemeKind.TRADITIONAL, candidate_models, NULL_LLM, threshold)

    @classmethod
    def two_ticket(cls, candidate_models, hirer_model, threshold=math.nan):
        return cls(SchemeKind.TWO_TICKET, candidate_models, hirer_model, threshold, 1)

    @classmethod
    def n_ticket(cls, n, candidate_models, hirer_model, threshold=math.nan):
        return cls(SchemeKind.N_TICKET, candidate_models, hirer_model, threshold, n)

    @property
    def tickets(self):
        """Number of hirer manipulations after submission."""
        return self.n

    @property
    def label(self):
        if self.kind is SchemeKind.N_TICKET:
            return f"n_ticket_{self.n}"
        return self.kind.value

    def with_threshold(self, tau):
        return SchemeSpec(self.kind, self.candidate_models, self.hirer_model, tau, self.n)

    def _require_threshold(self):
        if not math.isfinite(self.threshold):
            raise ConfigurationError("scheme threshold must be finite to play")


@dataclass(frozen=True)
class PlayRecord:
    candidate_id: int
    submitted_score: float
    considered_score: float
    decision: int
    draws_used: int


# -- vectorised realisation ------------------------------------------------------


@dataclass
class RealizedScores:
    """Every score a game needs, drawn once so several schemes can share them.

    ``candidate`` holds one draw of each candidate's own LLM (minus infinity when
    the group has none); ``hirer[:, j]`` is hirer ticket ``j``.
    """

    original: np.ndarray
    candidate: np.ndarray
    hirer: np.ndarray
    group: np.ndarray
    label: np.ndarray
    ids: list = field(default=None)

    def __post_init__(self):
        self.original = np.asarray(self.original, dtype=float)
        self.candidate = np.asarray(self.candidate, dtype=float)
        self.hirer = np.asarray(self.hirer, dtype=float).reshape(len(self.original), -1)
        self.group = np.asarray(self.group, dtype="<U1")
        self.label = np.asarray(self.label, dtype=np.int8)
        if self.ids is None:
            self.ids = [str(i) for i in range(len(self.original))]

    def __len__(self):
        return len(self.original)

    @property
    def max_tickets(self):
        return self.hirer.shape[1]

    @property
    def submitted(self):
        """Best response: the higher of the original and the one LLM draw, ties to the original."""
        return np.maximum(self.original, self.candidate)

    def considered(self, tickets):
        if tickets > self.max_tickets:
            raise ConfigurationError(f"{tickets} hirer tickets requested, only {self.max_tickets} drawn")
        out = self.submitted
        if tickets:
            out = np.maximum(out, self.hirer[:, :tickets].max(axis=1))
        return out

    def subset(self, idx):
        return RealizedScores(self.original[idx], self.candidate[idx], self.hirer[idx],
                              self.group[idx], self.label[idx], [self.ids[i] for i in idx])


def realize_scores(population, scorer, candidate_models, hirer_model, tickets, rng_stream):
    """Draw the candidate LLM outputs and ``tickets`` hirer outputs for every candidate.

    Streams are keyed by role and ticket index, so ticket ``j`` is the same draw
    whatever the total number of tickets, and two hirer models given the same
    stream are quantile-coupled.
    """
    streams = as_streams(rng_stream)
    if not isinstance(population, Population):
        population = Population.from_candidates(population)
    models = {Group(g): m for g, m in candidate_models.items()}
    n, d2 = len(population), population.d2
    fund = population.fundamental
    for m in list(models.values()) + [hirer_model]:
        m.check_dims(d2)
    original = scorer.score_batch(population.X)
    candidate = np.full(n, -np.inf)
    u = streams.uniforms("candidate_llm", n, d2)
    for g, model in models.items():
        mask = population.group == g.value
        if mask.any() and not model.is_null:
            candidate[mask] = draw_scores(scorer, model, fund[mask], u[mask],
                                          streams.generator("candidate_llm_joint", g.value))
    hirer = np.full((n, tickets), -np.inf)
    for j in range(tickets):
        hirer[:, j] = hirer_ticket_scores(population, scorer, hirer_model, j, streams)
    return RealizedScores(original, candidate, hirer, population.group, population.label)


def hirer_ticket_scores(population, scorer, hirer_model, ticket, rng_stream):
    """Scores of hirer ticket ``ticket`` (0-based) for every candidate, as drawn by :func:`realize_scores`."""
    streams = as_streams(rng_stream)
    n = len(population)
    if hirer_model.is_null:
        return np.full(n, -np.inf)
    hirer_model.check_dims(population.d2)
    u = streams.uniforms(("hirer_llm", ticket), n, population.d2)
    return draw_scores(scorer, hirer_model, population.fundamental, u,
                       streams.generator("hirer_llm_joint", ticket))


# -- single-candidate operations -------------------------------------------------


def best_response(candidate, model, scorer, rng_stream):
    """Submit the higher scoring of the original and one draw of the group's LLM."""
    x = candidate.features if isinstance(candidate, Candidate) else candidate
    original = scorer.score(x)
    if model.is_null:
        return x, original
    manipulated = model.apply(x, as_generator(rng_stream))
    s = scorer.score(manipulated)
    if s > original:
        return manipulated, s
    return x, original


def play(spec, candidates, scorer, rng_stream):
    """Play ``spec`` on every candidate and return one :class:`PlayRecord` each."""
    spec._require_threshold()
    if not isinstance(candidates, Population):
        candidates = Population.from_candidates(candidates)
    realized = realize_scores(candidates, scorer, spec.candidate_models, spec.hirer_model,
                              spec.tickets, rng_stream)
    submitted = realized.submitted
    considered = realized.considered(spec.tickets)
    decision = considered >= spec.threshold
    llm_used = np.isfinite(realized.candidate).astype(int)
    return [PlayRecord(i, float(submitted[i]), float(considered[i]), int(decision[i]),
                       int(llm_used[i]) + spec.tickets)
            for i in range(len(candidates))]


def _candidate_model(spec, candidate):
    return spec.candidate_models[Group(candidate.group)]


def acceptance_probability_mc(spec, candidate, scorer, replications, rng_stream):
    """Fraction of ``replications`` independent full games that accept ``candidate``.

    Returns ``(p_hat, stderr)`` with ``stderr = sqrt(p_hat (1 - p_hat) / replications)``.
    """
    spec._require_threshold()
    if replications < 1:
        raise ConfigurationError("replications must be at least 1")
    rng = as_generator(rng_stream)
    x = candidate.features
    fund = np.broadcast_to(np.asarray(x.fundamental, float), (replications, x.d1))
    original = scorer.score(x)
    cand = draw_scores(scorer, _candidate_model(spec, candidate), fund,
                       rng.random((replications, x.d2)), rng)
    considered = np.maximum(original, cand)
    for _ in range(spec.tickets):
        hirer = draw_scores(scorer, spec.hirer_model, fund, rng.random((replications, x.d2)), rng)
        considered = np.maximum(considered, hirer)
    p = float(np.mean(considered >= spec.threshold))
    return p, math.sqrt(p * (1 - p) / replications)


@dataclass(frozen=True)
class AcceptanceProbability:
    prob: float
    method: str
    q_candidate: float
    q_hirer: float
    original_passes: bool


def acceptance_probability_analytic(spec, candidate, scorer, n_samples=20000, rng=None):
    """``1 - 1[s(x) < tau] * q_g * q_H ** n`` with ``q_M = P(s(M(x)) < tau)``."""
    spec._require_threshold()
    x = candidate.features
    tau = spec.threshold
    passes = scorer.score(x) >= tau
    qg = score_law(scorer, _candidate_model(spec, candidate), x, tau, n_samples, rng)
    qh = score_law(scorer, spec.hirer_model, x, tau, n_samples, rng)
    method = EXACT if qg.exact and qh.exact else MONTE_CARLO
    reject = 0.0 if passes else qg.prob * qh.prob ** spec.tickets
    return AcceptanceProbability(1.0 - reject, method, qg.prob, qh.prob, bool(passes))


@dataclass(frozen=True)
class NTicketDynamics:
    """Per-ticket acceptance update ``T(z) = z + h (1 - z)`` for one resume.

    ``baseline`` is the raw group baseline ``P(s(L_g(x)) >= tau)``;
    ``best_response_baseline`` also counts the original resume.
    """

    h: float
    baseline: float
    best_response_baseline: float
    original_passes: bool

    @property
    def k(self):
        return 1.0 - self.h

    @property
    def outcome_limit(self):
        return 1 if (self.h > 0 or self.original_passes) else 0

    def step(self, z):
        return z + self.h * (1.0 - z)

    def iterate(self, n, z=None):
        z = self.baseline if z is None else z
        for _ in range(n):
            z = self.step(z)
        return z

    def closed_form(self, n, z=None):
        z = self.baseline if z is None else z
        return 1.0 - (1.0 - self.h) ** n * (1.0 - z)

    def trajectory(self, n, z=None):
        z = self.baseline if z is None else z
        out = []
        for _ in range(n):
            z = self.step(z)
            out.append(z)
        return out

    def bound(self, n, z=None):
        """``|T^n(z) - outcome_limit| <= k^n (1 - z)`` when ``h > 0``."""
        z = self.baseline if z is None else z
        return self.k ** n * (1.0 - z)


def nticket_dynamics(candidate, group_model, hirer_model, scorer, tau, n_samples=20000, rng=None):
    x = candidate.features if isinstance(candidate, Candidate) else candidate
    passes = scorer.score(x) >= tau
    qh = score_law(scorer, hirer_model, x, tau, n_samples, rng).prob
    qg = score_law(scorer, group_model, x, tau, n_samples, rng).prob
    return NTicketDynamics(h=1.0 - qh, baseline=1.0 - qg,
                           best_response_baseline=1.0 if passes else 1.0 - qg,
                           original_passes=bool(passes))


def probe_candidate(x, group, label=1):
    if not isinstance(x, FeatureVector):
        raise TypeError("probe expects a FeatureVector")
    return Candidate(x, Group(group), label)
