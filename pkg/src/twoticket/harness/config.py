"""Experiment configuration: a TOML key-value tree validated field by field.

Every problem found is reported with its dotted field path, and unknown keys
are errors. The normalized tree (defaults filled in) is hashed into a digest
that identifies the run.
"""

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..distributions import parse_distribution
from ..exceptions import ConfigurationError
from ..manipulation import dominates_analytic, parse_manipulation
from ..population import BernoulliLabel, LogisticLabel, PopulationSpec, ScoreThresholdLabel
from ..scoring import LinearScorer, MonotoneTableScorer

SCHEME_NAMES = ("traditional", "two_ticket", "n_ticket")
FORMATS = ("json", "csv", "both")
LABEL_KINDS = ("score_threshold", "bernoulli", "logistic")
SCORER_KINDS = ("linear", "monotone_table")

_REQUIRED = object()


def _int(lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return "expected an integer"
        if lo is not None and v < lo:
            return f"must be >= {lo}"
        return None
    return check


def _real(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "expected a number"
        if not math.isfinite(v):
            return "must be finite"
        if lo is not None and (v < lo or (lo_open and v == lo)):
            return f"must be {'>' if lo_open else '>='} {lo}"
        if hi is not None and (v > hi or (hi_open and v == hi)):
            return f"must be {'<' if hi_open else '<='} {hi}"
        return None
    return check


def _choice(options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(options)}"
    return check


def _string(v):
    return None if isinstance(v, str) else "expected a string"


def _boolean(v):
    return None if isinstance(v, bool) else "expected true or false"


def _real_list(v):
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        return "expected a list of numbers"
    return None


def _dist_list(v):
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        return "expected a list of distribution strings"
    for x in v:
        try:
            parse_distribution(x)
        except ValueError as exc:
            return str(exc)
    return None


def _manipulation(v):
    try:
        parse_manipulation(v)
    except (ValueError, TypeError) as exc:
        return str(exc)
    return None


SCHEMA = {
    "seed": (_int(0), _REQUIRED),
    "name": (_string, "experiment"),
    "population": {
        "size": (_int(2), _REQUIRED),
        "p_privileged": (_real(0, 1, True, True), 0.5),
        "fundamental": (_dist_list, []),
        "style": (_dist_list, []),
        "label": {
            "kind": (_choice(LABEL_KINDS), "score_threshold"),
            "cutoff": (_real(), None),
            "p": (_real(0, 1), None),
            "center": (_real(), None),
            "scale": (_real(0, lo_open=True), 1.0),
        },
    },
    "scorer": {
        "kind": (_choice(SCORER_KINDS), "linear"),
        "weights": (_real_list, _REQUIRED),
        "offset": (_real(), 0.0),
        "clip": (_real_list, None),
        "links": (lambda v: None if isinstance(v, list) else "expected a list of [knots_x, knots_y] pairs", None),
    },
    "manipulation": {
        "privileged": (_manipulation, "null"),
        "unprivileged": (_manipulation, "null"),
        "hirer": (_manipulation, "null"),
    },
    "schemes": {
        "run": (lambda v: None if isinstance(v, list) and v and all(s in SCHEME_NAMES for s in v)
                else f"expected a non-empty list drawn from {', '.join(SCHEME_NAMES)}",
                ["traditional", "two_ticket"]),
        "n_ticket": (lambda v: None if isinstance(v, list) and len(v) == 2
                     and all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in v)
                     and v[0] <= v[1] else "expected [lo, hi] with 1 <= lo <= hi", [1, 10]),
    },
    "evaluation": {
        "train_fraction": (_real(0, 1, True, True), 0.7),
        "splits": (_int(2), 100),
        "confidence": (_real(0, 1, True, True), 0.95),
        "replications": (_int(1), 10000),
        "epsilon": (_real(0, lo_open=True), 1e-9),
        "target_fpr": (_real(0, 1, hi_open=True), 0.0),
        "probe_points": (_int(1), 50),
        "resample": (_boolean, False),
        "jobs": (_int(1), 1),
    },
    "nticket": {
        "n_max": (_int(2), 10),
        "threshold": (_real(), None),
        "size": (_int(2), None),
    },
    "output": {
        "dir": (_string, None),
        "format": (_choice(FORMATS), "both"),
    },
}


def _walk(schema, tree, path, errors):
    """Check ``tree`` against ``schema`` and return it with defaults filled in."""
    out = {}
    if not isinstance(tree, dict):
        errors.append((path or "<root>", "expected a table"))
        tree = {}
    for key in tree:
        if key not in schema:
            errors.append((f"{path}.{key}" if path else key, "unknown key"))
    for key, rule in schema.items():
        where = f"{path}.{key}" if path else key
        if isinstance(rule, dict):
            out[key] = _walk(rule, tree.get(key, {}), where, errors)
            continue
        check, default = rule
        # TOML has no null, so None only arrives from round-tripped trees and means unset
        if tree.get(key) is None:
            if default is _REQUIRED:
                errors.append((where, "required"))
                out[key] = None
            else:
                out[key] = default
            continue
        problem = check(tree[key])
        if problem:
            errors.append((where, problem))
        out[key] = tree[key]
    return out


def _build_scorer(sc):
    if sc["kind"] == "linear":
        return LinearScorer(tuple(sc["weights"]), sc["offset"], sc["clip"])
    return MonotoneTableScorer(tuple(tuple(link) for link in sc["links"] or ()), tuple(sc["weights"]),
                               sc["offset"], sc["clip"])


def _label_rule(lab, scorer, errors):
    kind = lab["kind"]
    need = {"score_threshold": ("cutoff",), "bernoulli": ("p",), "logistic": ("center",)}[kind]
    for key in need:
        if lab[key] is None:
            errors.append((f"population.label.{key}", f"required for kind {kind!r}"))
    if any(lab[k] is None for k in need):
        return None
    if kind == "score_threshold":
        return ScoreThresholdLabel(scorer, float(lab["cutoff"]))
    if kind == "bernoulli":
        return BernoulliLabel(float(lab["p"]))
    return LogisticLabel(scorer, float(lab["center"]), float(lab["scale"]))


@dataclass
class ExperimentConfig:
    """Validated experiment: the normalized tree plus the model objects built from it."""

    tree: dict
    population: PopulationSpec
    scorer: object
    privileged_model: object
    unprivileged_model: object
    hirer_model: object
    source: str = field(default="<memory>", compare=False)

    @property
    def evaluation(self):
        return self.tree["evaluation"]

    @property
    def nticket(self):
        return self.tree["nticket"]

    @property
    def output(self):
        return self.tree["output"]

    @property
    def seed(self):
        return self.tree["seed"]

    @property
    def name(self):
        return self.tree["name"]

    @property
    def candidate_models(self):
        return {"P": self.privileged_model, "U": self.unprivileged_model}

    def scheme_tickets(self):
        """``(label, tickets)`` for every scheme to run, in a fixed order."""
        out = []
        run = self.tree["schemes"]["run"]
        if "traditional" in run:
            out.append(("traditional", 0))
        if "two_ticket" in run:
            out.append(("two_ticket", 1))
        if "n_ticket" in run:
            lo, hi = self.tree["schemes"]["n_ticket"]
            out.extend((f"n_ticket_{k}", k) for k in range(lo, hi + 1))
        return out

    @property
    def max_tickets(self):
        return max(t for _, t in self.scheme_tickets())

    def digest(self):
        return config_digest(self.tree)

    def with_seed(self, seed):
        tree = json.loads(json.dumps(self.tree))
        tree["seed"] = int(seed)
        return build_config(tree, self.source)

    def with_overrides(self, **sections):
        """Copy with ``section={key: value}`` entries replaced, then re-validated."""
        tree = json.loads(json.dumps(self.tree))
        for section, values in sections.items():
            tree[section].update(values)
        return build_config(tree, self.source)


def config_digest(tree):
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_config(raw, source="<memory>"):
    """Validate a raw tree; raises :class:`ConfigurationError` listing every bad field."""
    errors = []
    tree = _walk(SCHEMA, raw, "", errors)
    if errors:
        raise ConfigurationError(f"invalid config {source}", errors)

    pop = tree["population"]
    d1, d2 = len(pop["fundamental"]), len(pop["style"])
    if d1 + d2 == 0:
        errors.append(("population", "needs at least one fundamental or style dimension"))
    sc = tree["scorer"]
    if len(sc["weights"]) != d1 + d2:
        errors.append(("scorer.weights", f"expected {d1 + d2} weights (fundamental + style), got {len(sc['weights'])}"))
    if sc["kind"] == "monotone_table" and sc["links"] is None:
        errors.append(("scorer.links", "required for kind 'monotone_table'"))
    if sc["clip"] is not None and len(sc["clip"]) != 2:
        errors.append(("scorer.clip", "expected [lo, hi]"))
    scorer = None
    if not errors:
        try:
            scorer = _build_scorer(sc)
        except (ConfigurationError, ValueError, TypeError) as exc:
            errors.append(("scorer", str(exc)))

    models = {}
    for role in ("privileged", "unprivileged", "hirer"):
        m = parse_manipulation(tree["manipulation"][role], name=role)
        if not m.is_null and m.d2 != d2:
            errors.append((f"manipulation.{role}", f"has {m.d2} style marginals, population has {d2}"))
        models[role] = m
    run = tree["schemes"]["run"]
    if len(set(run)) != len(run):
        errors.append(("schemes.run", "duplicate scheme"))
    if models["hirer"].is_null and any(s != "traditional" for s in run):
        errors.append(("manipulation.hirer", "ticket schemes need a non-null hirer LLM"))

    label_rule = _label_rule(pop["label"], scorer, errors) if scorer is not None else None
    spec = None
    if not errors:
        try:
            spec = PopulationSpec(tuple(pop["fundamental"]), tuple(pop["style"]), label_rule,
                                  pop["p_privileged"])
        except ConfigurationError as exc:
            errors.append(("population", str(exc)))
    if errors:
        raise ConfigurationError(f"invalid config {source}", errors)
    return ExperimentConfig(tree, spec, scorer, models["privileged"], models["unprivileged"],
                            models["hirer"], source)


def load_config(path):
    """Read and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid TOML: {exc}") from None
    return build_config(raw, str(path))


def loads_config(text, source="<string>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config {source} is not valid TOML: {exc}") from None
    return build_config(raw, source)


def preconditions(cfg):
    """Analytic dominance facts the theorem checks rely on."""
    return {
        "privileged_dominates_unprivileged":
            dominates_analytic(cfg.privileged_model, cfg.unprivileged_model).a_dominates_b,
        "privileged_dominates_hirer":
            dominates_analytic(cfg.privileged_model, cfg.hirer_model).a_dominates_b,
    }
