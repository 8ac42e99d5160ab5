import numpy as np
import pytest

from twoticket import (FeatureVector, LinearScorer, ManipulationModel, PopulationSpec,
                       ScoreThresholdLabel)

# criterion -> list of (passed, detail); filled by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def plus_one_shift():
    """Fundamental score uniform on [0, 10], style fixed at 0, label 1[score >= 5]."""
    scorer = LinearScorer((1.0, 1.0))
    spec = PopulationSpec(("uniform(0, 10)",), ("point(0)",), ScoreThresholdLabel(scorer, 5.0))
    plus_one = ManipulationModel.parametric(["point(1)"])
    return spec, scorer, plus_one


def fv(fund=(), style=()):
    return FeatureVector(tuple(fund), tuple(style))
