"""Input validation helpers built on scikit-learn's checks."""

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d

from .exceptions import ConfigurationError


def check_scores(scores, allow_2d=True):
    """Scores as float array; ``-inf`` (null LLM output) is allowed, NaN and ``+inf`` are not.

    A 2-D input holds one column per considered resume version and is reduced by
    its row maximum.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim == 2 and allow_2d:
        if arr.shape[1] == 0:
            raise ConfigurationError("need at least one score column")
        arr = arr.max(axis=1)
    else:
        arr = column_or_1d(arr)
    if np.isnan(arr).any() or np.isposinf(arr).any():
        raise ConfigurationError("scores must not contain NaN or +inf")
    return arr


def check_labels(labels):
    y = column_or_1d(np.asarray(labels))
    if not np.isin(y, (0, 1)).all():
        raise ConfigurationError("labels must be 0 or 1")
    return y.astype(np.int8)


def check_groups(groups):
    g = column_or_1d(np.asarray(groups, dtype=str))
    if not np.isin(g, ("P", "U")).all():
        raise ConfigurationError("groups must be 'P' or 'U'")
    return g.astype("<U1")


def check_scores_labels(scores, labels):
    s = check_scores(scores)
    y = check_labels(labels)
    check_consistent_length(s, y)
    if s.size == 0:
        raise ConfigurationError("need at least one scored example")
    return s, y


def check_features(X, d):
    X = check_array(X, dtype=float)
    if X.shape[1] != d:
        raise ConfigurationError(f"expected {d} feature columns, got {X.shape[1]}")
    return X
