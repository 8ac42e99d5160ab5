import filecmp
import io
import json
import math
import os

import numpy as np
import pytest

from twoticket.exceptions import ConfigurationError, DegenerateSplitError, ParseError
from twoticket.harness import (ScoreTable, load_config, loads_config, parse_score_table,
                               read_score_table, replay, run_experiment, write_report)
from twoticket.harness.runner import in_sample_metrics, nticket_curve, realize

HERE = os.path.dirname(__file__)
CONFIGS = os.path.join(HERE, os.pardir, "configs")
HAND = os.path.join(HERE, "data", "hand8.csv")

MINIMAL = """
seed = 1
[population]
size = 400
fundamental = ["uniform(0, 10)"]
style = ["uniform(0, 1)"]
[population.label]
cutoff = 6.0
[scorer]
weights = [1.0, 1.0]
[manipulation]
privileged = ["uniform(0.5, 1.5)"]
hirer = ["uniform(0, 1.5)"]
[evaluation]
splits = 5
"""


def test_minimal_config_defaults():
    cfg = loads_config(MINIMAL)
    assert cfg.evaluation["train_fraction"] == 0.7
    assert cfg.scheme_tickets() == [("traditional", 0), ("two_ticket", 1)]
    assert cfg.digest() == loads_config(MINIMAL).digest()
    assert cfg.with_seed(2).digest() != cfg.digest()


def test_errors_report_every_field_path():
    bad = MINIMAL.replace("size = 400", "size = 1\ncolour = 3").replace("splits = 5", "splits = 1")
    bad += "\n[mystery]\nx = 1\n"
    with pytest.raises(ConfigurationError) as exc:
        loads_config(bad)
    paths = {p for p, _ in exc.value.errors}
    assert {"population.size", "population.colour", "evaluation.splits", "mystery"} <= paths
    assert "population.colour" in str(exc.value)


def test_cross_field_errors():
    with pytest.raises(ConfigurationError) as exc:
        loads_config(MINIMAL.replace("weights = [1.0, 1.0]", "weights = [1.0]"))
    assert exc.value.errors[0][0] == "scorer.weights"
    with pytest.raises(ConfigurationError) as exc:
        loads_config(MINIMAL.replace('hirer = ["uniform(0, 1.5)"]', ""))
    assert exc.value.errors[0][0] == "manipulation.hirer"
    with pytest.raises(ConfigurationError) as exc:
        loads_config(MINIMAL.replace("seed = 1", ""))
    assert ("seed", "required") in exc.value.errors
    with pytest.raises(ConfigurationError) as exc:
        loads_config(MINIMAL.replace("cutoff = 6.0", 'kind = "bernoulli"'))
    assert exc.value.errors[0][0] == "population.label.p"


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.toml")
    p = tmp_path / "bad.toml"
    p.write_text("seed = = 1")
    with pytest.raises(ConfigurationError):
        load_config(p)


@pytest.mark.parametrize("name", ["plus_one_shift.toml", "nticket_half.toml", "nticket_converged.toml",
                                  "synthetic_roles.toml"])
def test_shipped_configs_validate(name):
    load_config(os.path.join(CONFIGS, name))


# -- score tables -------------------------------------------------------------------


def test_hand_fixture_parses():
    t = read_score_table(HAND)
    assert len(t) == 8 and t.hirer_draws == 1
    assert t.candidate[3] == -math.inf and t.candidate[0] == 7.0


def test_hand_fixture_counts():
    r = read_score_table(HAND).to_realized()
    out = in_sample_metrics(r, [("traditional", 0), ("two_ticket", 1)])
    trad, two = out["traditional"], out["two_ticket"]
    assert trad["tau"] == 5.5 + 1e-9
    assert (trad["tpr"], trad["fpr"], trad["accuracy"]) == (0.75, 0.0, 0.875)
    assert (trad["tpr_P"], trad["tpr_U"], trad["tpr_disparity"]) == (1.0, 0.5, 0.5)
    assert two["tau"] == 5.5 + 1e-9
    assert (two["tpr"], two["fpr"], two["accuracy"]) == (1.0, 0.0, 1.0)
    assert (two["tpr_P"], two["tpr_U"], two["tpr_disparity"]) == (1.0, 1.0, 0.0)


def test_dominated_llm_scores_leave_traditional_unchanged():
    t = read_score_table(HAND)
    no_llm = ScoreTable(t.ids, t.group, t.label, t.original, np.full(8, -np.inf), t.hirer)
    low_llm = ScoreTable(t.ids, t.group, t.label, t.original, t.original - 1.0, t.hirer)
    a = replay(no_llm, ["traditional"], seed=1, splits=10)
    b = replay(low_llm, ["traditional"], seed=1, splits=10)
    assert a.schemes == b.schemes and a.in_sample == b.in_sample


@pytest.mark.parametrize("body,line,needle", [
    ("a,P,1,5.0,,x\n", 2, "non-numeric"),
    ("a,P,1,5.0,,1\nb,Q,1,1,,1\n", 3, "group"),
    ("a,P,1,5.0,,1\na,P,1,1,,1\n", 3, "duplicate"),
    ("a,P,2,5.0,,1\n", 2, "label"),
    ("a,P,1,inf,,1\n", 2, "finite"),
    ("a,P,1,5.0\n", 2, "fields"),
    ("a,P,1,,,1\n", 2, "missing"),
])
def test_parse_errors_carry_line_numbers(body, line, needle):
    text = "candidate_id,group,label,score_original,score_candidate_llm,hirer_draw_1\n" + body
    with pytest.raises(ParseError) as exc:
        parse_score_table(io.StringIO(text))
    assert exc.value.line == line and needle in str(exc.value)
    assert str(exc.value).startswith(f"line {line}:")


def test_bad_header():
    with pytest.raises(ParseError) as exc:
        parse_score_table(io.StringIO("id,group\n"))
    assert exc.value.line == 1
    with pytest.raises(ParseError):
        parse_score_table(io.StringIO(
            "candidate_id,group,label,score_original,score_candidate_llm,hirer_draw_2\n"))


def test_two_ticket_without_hirer_column():
    text = "candidate_id,group,label,score_original,score_candidate_llm\na,P,1,5,\nb,U,0,4,\n"
    t = parse_score_table(io.StringIO(text))
    with pytest.raises(ConfigurationError, match="hirer_draw_1"):
        replay(t, ["two_ticket"], splits=2)
    with pytest.raises(DegenerateSplitError):
        replay(t, ["traditional"], splits=2)


def test_write_read_bit_exact(tmp_path):
    cfg = loads_config(MINIMAL)
    _, r = realize(cfg)
    t = ScoreTable.from_realized(r)
    p = tmp_path / "t.csv"
    t.write_csv(p)
    back = read_score_table(p)
    for col in ("original", "candidate", "hirer", "label"):
        assert np.array_equal(getattr(back, col), getattr(t, col))
    assert list(back.group) == list(t.group)


# -- runs and persistence -----------------------------------------------------------------


def test_run_is_deterministic_and_worker_invariant(tmp_path):
    cfg = loads_config(MINIMAL)
    a = run_experiment(cfg, jobs=1)
    b = run_experiment(cfg, jobs=3)
    write_report(a, tmp_path / "a")
    write_report(b, tmp_path / "b")
    for name in ("report.json", "metrics.csv", "run_meta.json"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)
    meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
    assert meta["seed"] == 1 and meta["config_digest"] == cfg.digest()
    assert "time" not in json.dumps(meta)


def test_formats(tmp_path):
    rep = run_experiment(loads_config(MINIMAL))
    assert {os.path.basename(p) for p in write_report(rep, tmp_path / "j", "json")} == {"run_meta.json", "report.json"}
    assert {os.path.basename(p) for p in write_report(rep, tmp_path / "c", "csv")} == {"run_meta.json", "metrics.csv"}
    with pytest.raises(ConfigurationError):
        write_report(rep, tmp_path / "x", "xml")


def test_report_json_is_strict(tmp_path):
    rep = run_experiment(loads_config(MINIMAL))
    write_report(rep, tmp_path)
    text = (tmp_path / "report.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    data = json.loads(text)
    assert set(data["schemes"]) == {"traditional", "two_ticket"}
    assert data["splits"]["used"] + data["splits"]["skipped"] == 5


def test_plus_one_shift_run_matches_worked_values():
    cfg = load_config(os.path.join(CONFIGS, "plus_one_shift.toml"))
    rep = run_experiment(cfg)
    trad = rep.schemes["traditional"]["metrics"]
    two = rep.schemes["two_ticket"]["metrics"]
    assert abs(trad["tau"]["mean"] - 6.0) < 0.01
    assert abs(trad["tpr_U"]["mean"] - 0.8) < 0.02 and trad["tpr_P"]["mean"] == 1.0
    assert two["tpr_P"]["mean"] == 1.0 and two["tpr_U"]["mean"] == 1.0
    assert not rep.violations


def test_nticket_curve_converged_config(tmp_path):
    cfg = load_config(os.path.join(CONFIGS, "nticket_converged.toml"))
    rep = nticket_curve(cfg, 5)
    assert [r["delta_tpr_abs"] for r in rep.curve][1:] == [0.0] * 5
    assert rep.fit["converged"]
    write_report(rep, tmp_path)
    header = (tmp_path / "disparity_curve.csv").read_text().splitlines()[0]
    assert header == "n,delta_tpr_abs,analytic_envelope"


def test_nticket_needs_two_points():
    cfg = load_config(os.path.join(CONFIGS, "nticket_converged.toml"))
    with pytest.raises(ConfigurationError):
        nticket_curve(cfg.with_overrides(nticket={"n_max": 2}), 1)
