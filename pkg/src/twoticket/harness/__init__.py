"""Config-driven experiment runner, score-table replay and report persistence."""

from .config import ExperimentConfig, build_config, load_config, loads_config
from .runner import (ExperimentReport, dump_score_table, nticket_curve, replay, run_experiment,
                     theorem_checks, write_report)
from .scoretable import ScoreTable, parse_score_table, read_score_table

__all__ = [
    "ExperimentConfig", "ExperimentReport", "ScoreTable", "build_config", "dump_score_table",
    "load_config", "loads_config", "nticket_curve", "parse_score_table", "read_score_table",
    "replay", "run_experiment", "theorem_checks", "write_report",
]
