"""Experiment runner: simulate, replay, n-ticket curves, theorem checks and persistence."""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .._version import __version__
from ..exceptions import ConfigurationError, DegenerateSplitError, PropertyViolation
from ..manipulation import NULL_LLM, dominates_analytic
from ..metrics import bootstrap_ci, evaluate, fit_geometric_decay
from ..population import FeatureVector, sample_population
from ..rng import Streams
from ..schemes import hirer_ticket_scores, realize_scores
from ..scoring import has_closed_form, score_law, score_law_batch
from ..threshold import learn_threshold
from .scoretable import ScoreTable

OUTPUT_ENV = "TWOTICKET_OUTPUT_DIR"
DEFAULT_OUTPUT = "twoticket-runs"

SCHEME_METRICS = ("tau", "train_tpr", "train_fpr", "tpr", "fpr", "accuracy",
                  "tpr_P", "tpr_U", "tpr_disparity", "abs_tpr_disparity")
CONTRAST_METRICS = ("tpr", "abs_tpr_disparity", "accuracy")


@dataclass
class ExperimentReport:
    """Everything a run produces; ``to_dict`` is the ``report.json`` payload."""

    kind: str
    meta: dict
    schemes: dict = field(default_factory=dict)
    contrasts: dict = field(default_factory=dict)
    splits: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    curve: list = field(default_factory=list)
    fit: dict = field(default_factory=dict)
    in_sample: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def violations(self):
        return [c for c in self.checks if c["precondition"] and c["violations"]]

    def to_dict(self):
        out = {"kind": self.kind, "meta": self.meta}
        for key in ("schemes", "contrasts", "splits", "in_sample", "checks", "curve", "fit", "notes"):
            value = getattr(self, key)
            if value:
                out[key] = value
        return out


# -- shared split pipeline -------------------------------------------------------


def _has_both_labels(label):
    return 0 < int(label.sum()) < label.size


def split_metrics(realized, schemes, train, test, epsilon=1e-9, target_fpr=0.0):
    """Learn each scheme's threshold on ``train`` and score it on ``test``.

    ``schemes`` is a list of ``(name, tickets)``. Returns a flat dict keyed
    ``"<scheme>/<metric>"`` plus ``"<scheme>-traditional/<metric>"`` paired
    differences when a Traditional scheme is present.
    """
    tr, te = realized.subset(train), realized.subset(test)
    if not _has_both_labels(tr.label):
        raise DegenerateSplitError("training split lacks a label")
    if not _has_both_labels(te.label):
        raise DegenerateSplitError("test split lacks a label")
    out = {}
    for name, tickets in schemes:
        d = learn_threshold(tr.considered(tickets), tr.label, epsilon=epsilon, target_fpr=target_fpr)
        rep = evaluate(te.considered(tickets) >= d.tau_star, te.label, te.group)
        values = {"tau": d.tau_star, "train_tpr": d.tpr, "train_fpr": d.fpr, **rep.as_dict()}
        values["abs_tpr_disparity"] = None if rep.tpr_disparity is None else abs(rep.tpr_disparity)
        for m in SCHEME_METRICS:
            out[f"{name}/{m}"] = values[m]
    names = [n for n, _ in schemes]
    if "traditional" in names:
        for name in names:
            if name == "traditional":
                continue
            for m in CONTRAST_METRICS:
                a, b = out[f"{name}/{m}"], out[f"traditional/{m}"]
                out[f"{name}-traditional/{m}"] = None if a is None or b is None else a - b
    return out


def in_sample_metrics(realized, schemes, epsilon=1e-9, target_fpr=0.0):
    """Thresholds learned and scored on every row; ``{}`` when a label is missing."""
    everything = np.arange(len(realized))
    try:
        flat = split_metrics(realized, schemes, everything, everything, epsilon, target_fpr)
    except DegenerateSplitError:
        return {}
    out = {}
    for key, value in flat.items():
        owner, metric = key.split("/")
        out.setdefault(owner, {})[metric] = value
    return out


def evaluate_schemes(realized, schemes, seed, splits, confidence=0.95, train_fraction=0.7,
                     epsilon=1e-9, target_fpr=0.0, resample=False, jobs=1):
    """Repeated-split evaluation shared by simulate and replay.

    Returns ``(schemes, contrasts, split_counts)`` sections of a report.
    """
    def experiment(train, test):
        return split_metrics(realized, schemes, train, test, epsilon, target_fpr)

    res = bootstrap_ci(experiment, len(realized), splits, confidence, Streams(seed).spawn("splits"),
                       train_fraction=train_fraction, resample=resample, jobs=jobs)
    if res.splits_used == 0:
        raise DegenerateSplitError("every split was degenerate")
    by_scheme, contrasts = {}, {}
    for key, iv in res.intervals.items():
        owner, metric = key.split("/")
        target = contrasts if "-" in owner else by_scheme
        target.setdefault(owner, {})[metric] = iv.as_dict()
    tickets = dict(schemes)
    schemes_out = {name: {"tickets": tickets[name], "metrics": by_scheme.get(name, {})} for name, _ in schemes}
    counts = {"requested": int(splits), "used": res.splits_used, "skipped": res.splits_skipped,
              "confidence": confidence, "train_fraction": train_fraction, "resample": bool(resample)}
    return schemes_out, contrasts, counts


# -- simulate --------------------------------------------------------------------


def realize(cfg, size=None, tickets=None):
    """Sample the configured population and draw every score the run needs."""
    streams = Streams(cfg.seed)
    size = int(size or cfg.tree["population"]["size"])
    pop = sample_population(cfg.population, size, streams.spawn("population"))
    tickets = cfg.max_tickets if tickets is None else tickets
    realized = realize_scores(pop, cfg.scorer, cfg.candidate_models, cfg.hirer_model, tickets,
                              streams.spawn("game"))
    return pop, realized


def run_meta(cfg, kind):
    return {"kind": kind, "name": cfg.name, "seed": cfg.seed, "config_digest": cfg.digest(),
            "source": os.path.basename(cfg.source), "version": __version__}


def run_experiment(cfg, jobs=None):
    """Simulate the configured game, evaluate every scheme over repeated splits, check theorems."""
    ev = cfg.evaluation
    schemes = cfg.scheme_tickets()
    pop, realized = realize(cfg)
    scheme_out, contrasts, counts = evaluate_schemes(
        realized, schemes, cfg.seed, ev["splits"], ev["confidence"], ev["train_fraction"],
        ev["epsilon"], ev["target_fpr"], ev["resample"], jobs or ev["jobs"])
    report = ExperimentReport("simulate", run_meta(cfg, "simulate"), scheme_out, contrasts, counts)
    report.in_sample = in_sample_metrics(realized, schemes, ev["epsilon"], ev["target_fpr"])
    ref = "traditional" if "traditional" in scheme_out else schemes[0][0]
    tau = scheme_out[ref]["metrics"]["tau"]["mean"]
    if tau is not None and math.isfinite(tau):
        report.checks = theorem_checks(cfg, tau, sorted({t for _, t in schemes} | {0}),
                                       n_samples=ev["replications"])
    else:
        report.notes.append("theorem checks skipped: no finite reference threshold")
    return report


def dump_score_table(cfg, path=None):
    """Realized scores of a simulation as a :class:`ScoreTable` (optionally written to ``path``)."""
    _, realized = realize(cfg)
    table = ScoreTable.from_realized(realized)
    if path is not None:
        table.write_csv(path)
    return table


# -- replay ----------------------------------------------------------------------


def replay(table, schemes=("traditional", "two_ticket"), seed=0, splits=100, confidence=0.95,
           train_fraction=0.7, epsilon=1e-9, target_fpr=0.0, resample=False, jobs=1, source=""):
    """Re-run the split pipeline on externally produced scores.

    ``schemes`` names may be ``traditional``, ``two_ticket`` or ``n_ticket_<k>``.
    """
    pairs = []
    for name in schemes:
        if name == "traditional":
            pairs.append((name, 0))
        elif name == "two_ticket":
            pairs.append((name, 1))
        elif name.startswith("n_ticket_") and name[9:].isdigit() and int(name[9:]) >= 1:
            pairs.append((name, int(name[9:])))
        else:
            raise ConfigurationError(f"unknown replay scheme {name!r}")
    for _, t in pairs:
        table.require_hirer_draws(t)
    if not _has_both_labels(np.asarray(table.label)):
        raise ConfigurationError("score table needs both labels")
    scheme_out, contrasts, counts = evaluate_schemes(
        table.to_realized(), pairs, seed, splits, confidence, train_fraction, epsilon, target_fpr,
        resample, jobs)
    meta = {"kind": "replay", "seed": int(seed), "source": os.path.basename(str(source)),
            "rows": len(table), "version": __version__}
    report = ExperimentReport("replay", meta, scheme_out, contrasts, counts)
    report.in_sample = in_sample_metrics(table.to_realized(), pairs, epsilon, target_fpr)
    return report


# -- theorem checks on a probe panel -----------------------------------------------


def _check(name, precondition, points, gaps, tol):
    bad = [i for i, g in enumerate(gaps) if g < -tol]
    return {"name": name, "precondition": bool(precondition), "points": points,
            "violations": len(bad), "worst_gap": float(min(gaps)) if gaps else None,
            "tolerance": tol}


def theorem_checks(cfg, tau, ticket_counts, n_samples=20000):
    """Check disparity ordering on the quantile probe panel at a shared threshold.

    With ``q_M = P(s(M(x)) < tau)`` and ``x`` rejected unmanipulated, the disparity
    under ``t`` tickets is ``q_H^t (q_U - q_P)``. The checks are that it is
    non-negative (privileged LLM dominating) and non-increasing in ``t``.
    """
    panel = cfg.population.quantile_panel(cfg.evaluation["probe_points"])
    d1 = cfg.population.d1
    rng = Streams(cfg.seed).generator("probes")
    pre = dominates_analytic(cfg.privileged_model, cfg.unprivileged_model).a_dominates_b
    deltas, tol = [], 0.0
    for row in panel:
        x = FeatureVector.from_array(row, d1)
        if cfg.scorer.score(x) >= tau:
            deltas.append([0.0] * len(ticket_counts))
            continue
        laws = [score_law(cfg.scorer, m, x, tau, n_samples, rng)
                for m in (cfg.privileged_model, cfg.unprivileged_model, cfg.hirer_model)]
        q_p, q_u, q_h = (l.prob for l in laws)
        if not (laws[0].exact and laws[1].exact):
            tol = max(tol, 4.0 * math.hypot(laws[0].stderr, laws[1].stderr))
        deltas.append([q_h ** t * (q_u - q_p) for t in ticket_counts])
    deltas = np.array(deltas)
    checks = [_check("disparity_nonnegative", pre, len(panel), list(deltas[:, 0]), tol)]
    for j in range(1, len(ticket_counts)):
        gaps = list(deltas[:, j - 1] - deltas[:, j])
        checks.append(_check(f"disparity_nonincreasing_{ticket_counts[j - 1]}_to_{ticket_counts[j]}",
                             pre, len(panel), gaps, 0.0))
    return checks


# -- n-ticket disparity curve -----------------------------------------------------


def _tpr_by_group(decision, label, group):
    pos = label == 1
    out = {}
    for g in ("P", "U"):
        m = pos & (group == g)
        out[g] = float(decision[m].mean()) if m.any() else None
    return out


def contraction_envelope_rate(cfg, realized, tau, X, d1, max_rows=200, n_samples=20000):
    """Largest per-ticket rejection probability ``q_H(x)`` over positives rejected at zero tickets."""
    rows = np.flatnonzero((realized.label == 1) & (realized.submitted < tau))
    if rows.size == 0:
        return 0.0
    if not has_closed_form(cfg.scorer, cfg.hirer_model, d1):
        rows = rows[np.linspace(0, rows.size - 1, min(max_rows, rows.size)).astype(int)]
    q, _ = score_law_batch(cfg.scorer, cfg.hirer_model, X[rows], d1, tau, n_samples,
                           Streams(cfg.seed).generator("envelope"))
    return float(q.max())


def nticket_curve(cfg, n_max=None):
    """TPR disparity after ``n = 0..n_max`` hirer tickets at one fixed threshold.

    Tickets are drawn one at a time from the same keyed streams a full
    realization would use, so ticket ``n`` extends the game of ticket ``n - 1``
    and memory stays linear in the population size.
    """
    nt = cfg.nticket
    n_max = int(n_max or nt["n_max"])
    if n_max < 2:
        raise ConfigurationError("n_max must be at least 2")
    if cfg.hirer_model.is_null:
        raise ConfigurationError("n-ticket curve needs a non-null hirer LLM")
    streams = Streams(cfg.seed)
    size = nt["size"] or cfg.tree["population"]["size"]
    pop = sample_population(cfg.population, size, streams.spawn("population"))
    game = streams.spawn("game")
    base = realize_scores(pop, cfg.scorer, cfg.candidate_models, NULL_LLM, 0, game)
    notes = []
    if nt["threshold"] is not None:
        tau = float(nt["threshold"])
    else:
        d = learn_threshold(base.submitted, base.label, epsilon=cfg.evaluation["epsilon"],
                            target_fpr=cfg.evaluation["target_fpr"])
        tau = d.tau_star
        notes.append("threshold learned once under the Traditional scheme on the full sample")
    label, group = base.label, base.group
    considered = base.submitted.copy()
    k = contraction_envelope_rate(cfg, base, tau, pop.X, pop.d1)
    rows = []
    for n in range(n_max + 1):
        if n > 0:
            np.maximum(considered, hirer_ticket_scores(pop, cfg.scorer, cfg.hirer_model, n - 1, game),
                       out=considered)
        decision = considered >= tau
        tpr = _tpr_by_group(decision, label, group)
        delta = None if None in tpr.values() else tpr["P"] - tpr["U"]
        rows.append({"n": n, "tpr_P": tpr["P"], "tpr_U": tpr["U"],
                     "tpr": float(decision[label == 1].mean()) if (label == 1).any() else None,
                     "delta_tpr": delta, "delta_tpr_abs": None if delta is None else abs(delta)})
    d0 = rows[0]["delta_tpr_abs"] or 0.0
    for r in rows:
        r["analytic_envelope"] = k ** r["n"] * d0
    npos = [int(((label == 1) & (group == g)).sum()) for g in ("P", "U")]
    floor = 10.0 / max(min(npos), 1)
    fit = fit_geometric_decay([(r["n"], r["delta_tpr_abs"]) for r in rows if r["delta_tpr_abs"] is not None],
                              floor=floor)
    fit_out = {"rate": fit.rate, "r2": fit.r2, "slope": fit.slope, "intercept": fit.intercept,
               "converged": fit.converged, "n_points": fit.n_points, "noise_floor": floor,
               "envelope_rate": k, "threshold": tau}
    if fit.converged:
        notes.append("converged: fewer than three disparities above the noise floor")
    meta = run_meta(cfg, "nticket")
    meta["size"] = int(size)
    return ExperimentReport("nticket", meta, curve=rows, fit=fit_out, notes=notes)


# -- persistence -----------------------------------------------------------------


def _clean(value):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python ones."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def metrics_rows(report):
    """Flat rows: one per scheme for simulate/replay, one per ticket count for n-ticket curves."""
    if report.kind == "nticket":
        cols = ["n", "tpr", "tpr_P", "tpr_U", "delta_tpr", "delta_tpr_abs", "analytic_envelope"]
        return cols, [[r[c] for c in cols] for r in report.curve]
    cols = ["scheme", "tickets", "splits_used", "splits_skipped"]
    for m in SCHEME_METRICS:
        cols += [m, f"{m}_half_width"]
    rows = []
    for name, entry in report.schemes.items():
        row = [name, entry["tickets"], report.splits["used"], report.splits["skipped"]]
        for m in SCHEME_METRICS:
            iv = entry["metrics"].get(m, {})
            row += [iv.get("mean"), iv.get("half_width")]
        rows.append(row)
    return cols, rows


def _write_csv(path, cols, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def resolve_output_dir(cli_value=None, cfg=None):
    """``--output`` beats the config's ``output.dir``, which beats the environment default."""
    if cli_value:
        return cli_value
    if cfg is not None and cfg.output["dir"]:
        return cfg.output["dir"]
    return os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def write_report(report, outdir, fmt="both"):
    """Persist a report; returns the list of files written. ``run_meta.json`` is always written."""
    if fmt not in ("json", "csv", "both"):
        raise ConfigurationError(f"unknown format {fmt!r}")
    os.makedirs(outdir, exist_ok=True)
    written = []

    def path(name):
        p = os.path.join(outdir, name)
        written.append(p)
        return p

    _dump_json(report.meta, path("run_meta.json"))
    if fmt in ("json", "both"):
        _dump_json(report.to_dict(), path("report.json"))
    if fmt in ("csv", "both"):
        cols, rows = metrics_rows(report)
        _write_csv(path("metrics.csv"), cols, rows)
        if report.curve:
            _write_csv(path("disparity_curve.csv"), ["n", "delta_tpr_abs", "analytic_envelope"],
                       [[r["n"], r["delta_tpr_abs"], r["analytic_envelope"]] for r in report.curve])
    return written


def raise_on_violations(report):
    bad = report.violations
    if bad:
        names = ", ".join(f"{c['name']} ({c['violations']} of {c['points']})" for c in bad)
        raise PropertyViolation(f"property checks failed: {names}")
