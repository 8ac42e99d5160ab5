"""scikit-learn estimators wrapping threshold learning and ticket-scheme play."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_groups, check_labels, check_scores
from .manipulation import NULL_LLM
from .population import Population
from .rng import Streams
from .schemes import realize_scores
from .scoring import score_law_batch
from .threshold import DEFAULT_EPSILON, learn_threshold


class NoFalsePositiveThreshold(ClassifierMixin, BaseEstimator):
    """Threshold classifier on scores, fitted under the no-false-positive objective.

    ``fit`` takes considered scores (1-D, or 2-D with one column per resume
    version, reduced by row max) and binary labels.

    >>> clf = NoFalsePositiveThreshold().fit([3.2, 6.0, 4.5, 5.5, 7.0], [0, 0, 0, 1, 1])
    >>> clf.predict([6.0, 7.0]).tolist()
    [0, 1]
    """

    def __init__(self, epsilon=DEFAULT_EPSILON, target_fpr=0.0):
        self.epsilon = epsilon
        self.target_fpr = target_fpr

    def fit(self, scores, y):
        self.derivation_ = learn_threshold(scores, y, epsilon=self.epsilon, target_fpr=self.target_fpr)
        self.threshold_ = self.derivation_.tau_star
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, scores):
        check_is_fitted(self, "threshold_")
        return check_scores(scores) - self.threshold_

    def predict(self, scores):
        check_is_fitted(self, "threshold_")
        return (check_scores(scores) >= self.threshold_).astype(int)


class TicketHiringClassifier(ClassifierMixin, BaseEstimator):
    """Hirer that learns its threshold from a simulated game and then plays it.

    ``n_tickets=0`` is the Traditional scheme, ``1`` the Two-Ticket scheme and
    ``n`` the n-Ticket scheme. ``X`` holds unmanipulated resumes, fundamental
    columns first; group membership is passed separately because the hirer
    never sees it, only the candidates' LLM access depends on it.
    """

    def __init__(self, scorer, privileged_model, unprivileged_model, hirer_model=None,
                 n_tickets=0, n_fundamental=0, epsilon=DEFAULT_EPSILON, target_fpr=0.0,
                 random_state=0):
        self.scorer = scorer
        self.privileged_model = privileged_model
        self.unprivileged_model = unprivileged_model
        self.hirer_model = hirer_model
        self.n_tickets = n_tickets
        self.n_fundamental = n_fundamental
        self.epsilon = epsilon
        self.target_fpr = target_fpr
        self.random_state = random_state

    def _hirer(self):
        return NULL_LLM if self.hirer_model is None else self.hirer_model

    def _realize(self, X, groups, labels, stream):
        X = check_features(X, self.scorer.dim)
        groups = check_groups(groups)
        pop = Population(X, groups, labels if labels is not None else np.zeros(len(X)), self.n_fundamental)
        models = {"P": self.privileged_model, "U": self.unprivileged_model}
        return realize_scores(pop, self.scorer, models, self._hirer(), self.n_tickets,
                              Streams(self.random_state).spawn(stream))

    def fit(self, X, y, groups):
        y = check_labels(y)
        realized = self._realize(X, groups, y, "fit")
        self.threshold_model_ = NoFalsePositiveThreshold(self.epsilon, self.target_fpr).fit(
            realized.considered(self.n_tickets), y)
        self.threshold_ = self.threshold_model_.threshold_
        self.classes_ = np.array([0, 1])
        return self

    def considered_scores(self, X, groups):
        return self._realize(X, groups, None, "predict").considered(self.n_tickets)

    def predict(self, X, groups):
        check_is_fitted(self, "threshold_")
        return (self.considered_scores(X, groups) >= self.threshold_).astype(int)

    def predict_proba(self, X, groups):
        """Closed-form acceptance probability per row (rejection factorises over tickets)."""
        check_is_fitted(self, "threshold_")
        X = check_features(X, self.scorer.dim)
        groups = check_groups(groups)
        rng = Streams(self.random_state).generator("predict_proba")
        d1, tau = self.n_fundamental, self.threshold_
        q_h, _ = score_law_batch(self.scorer, self._hirer(), X, d1, tau, rng=rng)
        q_g = np.ones(len(X))
        for g, model in (("P", self.privileged_model), ("U", self.unprivileged_model)):
            mask = groups == g
            if mask.any():
                q_g[mask], _ = score_law_batch(self.scorer, model, X[mask], d1, tau, rng=rng)
        below = self.scorer.score_batch(X) < tau
        accept = 1.0 - below * q_g * q_h ** self.n_tickets
        return np.column_stack([1.0 - accept, accept])

    def score(self, X, y, groups):
        return float(np.mean(self.predict(X, groups) == check_labels(y)))
