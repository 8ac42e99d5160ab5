"""Strategic hiring games under stochastic LLM resume manipulation.

Candidates may rewrite the style block of their resume with an LLM; the hirer
thresholds a monotone score. The package simulates the Traditional scheme
(hirer scores the submission), the Two-Ticket scheme (hirer also scores its own
LLM rewrite) and the n-Ticket generalisation, and checks the resulting
disparity orderings against closed forms.
"""

from ._version import __version__
from .distributions import Gaussian, PointMass, Shifted, Uniform, fosd, parse_distribution
from .estimators import NoFalsePositiveThreshold, TicketHiringClassifier
from .exceptions import (ConfigurationError, ContractError, DegenerateSplitError, DiagnosticError,
                         LemmaViolation, ParseError, PropertyViolation, TwoTicketError)
from .manipulation import (NULL_LLM, NULL_OUTPUT, DominanceVerdict, ManipulationModel, Relation,
                           apply, dominates_analytic, dominates_empirical, parse_manipulation,
                           utility_dominance_check)
from .metrics import (MetricsReport, bootstrap_ci, evaluate, evaluate_records, fit_geometric_decay,
                      resume_outcome_disparity)
from .population import (BernoulliLabel, Candidate, FeatureVector, Group, LogisticLabel, Population,
                         PopulationSpec, ScoreThresholdLabel, chi_square_independence_check,
                         sample_population)
from .rng import Streams
from .schemes import (NTicketDynamics, PlayRecord, SchemeKind, SchemeSpec, acceptance_probability_analytic,
                      acceptance_probability_mc, best_response, nticket_dynamics, play, realize_scores)
from .scoring import (LinearScorer, MonotoneTableScorer, ThresholdClassifier, classify, score,
                      score_distribution, score_law)
from .threshold import ThresholdDerivation, check_threshold_consistency, learn_threshold

__all__ = [
    "__version__",
    "BernoulliLabel", "Candidate", "ConfigurationError", "ContractError", "DegenerateSplitError",
    "DiagnosticError", "DominanceVerdict", "FeatureVector", "Gaussian", "Group", "LemmaViolation",
    "LinearScorer", "LogisticLabel", "ManipulationModel", "MetricsReport", "MonotoneTableScorer",
    "NTicketDynamics", "NULL_LLM", "NULL_OUTPUT", "NoFalsePositiveThreshold", "ParseError",
    "PlayRecord", "PointMass", "Population", "PopulationSpec", "PropertyViolation", "Relation",
    "SchemeKind", "SchemeSpec", "ScoreThresholdLabel", "Shifted", "Streams", "ThresholdClassifier",
    "ThresholdDerivation", "TicketHiringClassifier", "TwoTicketError", "Uniform",
    "acceptance_probability_analytic", "acceptance_probability_mc", "apply", "best_response",
    "bootstrap_ci", "check_threshold_consistency", "chi_square_independence_check", "classify",
    "dominates_analytic", "dominates_empirical", "evaluate", "evaluate_records", "fit_geometric_decay",
    "fosd", "learn_threshold", "nticket_dynamics", "parse_distribution", "parse_manipulation", "play",
    "realize_scores", "resume_outcome_disparity", "sample_population", "score", "score_distribution",
    "score_law", "utility_dominance_check",
]
