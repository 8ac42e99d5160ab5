"""Command-line front end.

Exit codes: 0 success, 1 invalid input or config, 2 runtime failure,
3 a property or lemma check failed.
"""

import argparse
import logging
import math
import sys


from ._version import __version__
from .exceptions import ConfigurationError, ParseError, PropertyViolation, TwoTicketError
from .harness import config as config_mod
from .harness import runner
from .harness.scoretable import read_score_table
from .manipulation import dominates_analytic, dominates_empirical, parse_manipulation
from .rng import Streams
from .threshold import check_threshold_consistency, learn_threshold

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_PROPERTY = 0, 1, 2, 3

log = logging.getLogger("twoticket")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="experiment config (TOML)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--output", help=f"output directory (default: config output.dir, then ${runner.OUTPUT_ENV})")
    p.add_argument("--format", choices=config_mod.FORMATS, help="artifact format")
    p.add_argument("--replications", type=int, help="Monte Carlo samples per probability estimate")
    p.add_argument("--jobs", type=int, help="worker threads for split evaluation")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="twoticket", description="Hiring games under LLM resume manipulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run the configured experiment")
    p.add_argument("--dump-scores", metavar="CSV", help="also write the realized scores as a score table")

    p = sub.add_parser("replay", parents=[common], help="evaluate a score table")
    p.add_argument("--table", required=True, help="score table CSV")
    p.add_argument("--schemes", default="traditional,two_ticket",
                   help="comma-separated: traditional, two_ticket, n_ticket_<k>")
    p.add_argument("--splits", type=int, help="train/test splits (default: config or 100)")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--epsilon", type=float)

    p = sub.add_parser("nticket", parents=[common], help="TPR disparity against the number of hirer tickets")
    p.add_argument("--n-max", type=int, help="largest ticket count (>= 2)")

    p = sub.add_parser("dominance", parents=[common], help="compare two manipulation models")
    p.add_argument("--a", required=True, help="model spec, e.g. 'uniform(1,3)' or 'null'")
    p.add_argument("--b", required=True)
    p.add_argument("--empirical", action="store_true", help="also run the empirical CDF comparison")
    p.add_argument("--tolerance", type=float, default=0.01)

    p = sub.add_parser("threshold", parents=[common], help="learn thresholds and check their consistency")
    p.add_argument("--table", help="learn from a score table instead of a simulation")
    p.add_argument("--assert-consistency", action="store_true",
                   help="exit 3 when the privileged LLM dominates the hirer but the hirer maximum is larger")
    p.add_argument("--tolerance", type=float, default=0.0)

    sub.add_parser("validate-config", parents=[common], help="validate a config and print its digest")
    return parser


def _load(args):
    if not args.config:
        raise ConfigurationError("--config is required")
    cfg = config_mod.load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        cfg = cfg.with_overrides(evaluation=overrides)
    return cfg


def _fmt(iv):
    if not iv or iv.get("mean") is None:
        return "n/a"
    mean = iv["mean"]
    if isinstance(mean, float) and math.isinf(mean):
        return "-inf" if mean < 0 else "inf"
    hw = iv.get("half_width")
    return f"{mean:.4f}" if hw is None else f"{mean:.4f} ± {hw:.4f}"


def summary_table(report):
    rows = [("scheme", "TPR", "ΔTPR", "accuracy", "tau*")]
    for name, entry in report.schemes.items():
        m = entry["metrics"]
        rows.append((name, _fmt(m.get("tpr")), _fmt(m.get("tpr_disparity")), _fmt(m.get("accuracy")),
                     _fmt(m.get("tau"))))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _persist(report, args, cfg=None):
    outdir = runner.resolve_output_dir(args.output, cfg)
    fmt = args.format or (cfg.output["format"] if cfg is not None else "both")
    for path in runner.write_report(report, outdir, fmt):
        log.info("wrote %s", path)
    print(f"artifacts: {outdir}")


def cmd_simulate(args):
    cfg = _load(args)
    report = runner.run_experiment(cfg)
    if args.dump_scores:
        runner.dump_score_table(cfg, args.dump_scores)
    _persist(report, args, cfg)
    s = report.splits
    print(f"{cfg.name}: seed {cfg.seed}, {s['used']} splits used, {s['skipped']} skipped")
    print(summary_table(report))
    for c in report.checks:
        status = "skip" if not c["precondition"] else ("FAIL" if c["violations"] else "ok")
        print(f"check {c['name']}: {status}")
    runner.raise_on_violations(report)
    return EXIT_OK


def cmd_replay(args):
    table = read_score_table(args.table)
    ev = {"splits": 100, "train_fraction": 0.7, "epsilon": 1e-9, "confidence": 0.95,
          "target_fpr": 0.0, "resample": False, "jobs": 1}
    seed = 0
    cfg = None
    if args.config:
        cfg = _load(args)
        ev.update({k: cfg.evaluation[k] for k in ev})
        seed = cfg.seed
    if args.seed is not None:
        seed = args.seed
    for key, flag in (("splits", args.splits), ("train_fraction", args.train_fraction),
                      ("epsilon", args.epsilon), ("jobs", args.jobs)):
        if flag is not None:
            ev[key] = flag
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    report = runner.replay(table, schemes, seed=seed, source=args.table, **ev)
    _persist(report, args, cfg)
    print(f"replay of {len(table)} rows: seed {seed}, {report.splits['used']} splits used, "
          f"{report.splits['skipped']} skipped")
    print(summary_table(report))
    return EXIT_OK


def cmd_nticket(args):
    cfg = _load(args)
    n_max = args.n_max if args.n_max is not None else cfg.nticket["n_max"]
    if n_max < 2:
        raise ConfigurationError("--n-max must be at least 2")
    report = runner.nticket_curve(cfg, n_max)
    _persist(report, args, cfg)
    print(f"{'n':>3}  {'|ΔTPR|':>8}  {'envelope':>8}")
    for r in report.curve:
        d = "n/a" if r["delta_tpr_abs"] is None else f"{r['delta_tpr_abs']:.4f}"
        print(f"{r['n']:>3}  {d:>8}  {r['analytic_envelope']:>8.4f}")
    fit = report.fit
    if fit["converged"]:
        print("converged: disparity already at the noise floor")
    else:
        print(f"fitted k = {fit['rate']:.4f} (r2 {fit['r2']:.4f}), envelope k = {fit['envelope_rate']:.4f}")
    return EXIT_OK


def cmd_dominance(args):
    a = parse_manipulation(args.a, "a")
    b = parse_manipulation(args.b, "b")
    verdict = dominates_analytic(a, b)
    print(verdict)
    if args.empirical and not (a.is_null or b.is_null):
        if a.d2 != 1:
            raise ConfigurationError("empirical comparison supports one style dimension")
        n = args.replications or 100000
        streams = Streams(args.seed or 0)
        xa = a.sample_style(n, streams.generator("a"))[:, 0]
        xb = b.sample_style(n, streams.generator("b"))[:, 0]
        print(dominates_empirical(xa, xb, args.tolerance))
    return EXIT_OK


def cmd_threshold(args):
    if args.table:
        table = read_score_table(args.table)
        realized = table.to_realized()
        for name, t in (("traditional", 0), ("two_ticket", 1)):
            if t > table.hirer_draws:
                continue
            d = learn_threshold(realized.considered(t), realized.label)
            print(f"{name}: tau* = {d.tau_star:.4f}, max negative {d.max_negative_score:.4f}, "
                  f"train TPR {d.tpr:.4f}")
        return EXIT_OK
    cfg = _load(args)
    pop, _ = runner.realize(cfg, tickets=0)
    hirers = [cfg.hirer_model] if not cfg.hirer_model.is_null else []
    rep = check_threshold_consistency(cfg.scorer, pop, cfg.privileged_model, cfg.unprivileged_model,
                                      hirers, Streams(cfg.seed).spawn("consistency"),
                                      epsilon=cfg.evaluation["epsilon"], tolerance=args.tolerance,
                                      raise_on_violation=args.assert_consistency)
    traditional = max(rep.M, rep.M_P, rep.M_U)
    print(f"M = {rep.M:.4f}, M_P = {rep.M_P:.4f}, M_U = {rep.M_U:.4f}")
    print(f"traditional tau* = {traditional + cfg.evaluation['epsilon']:.4f}")
    for k, (mh, tau, pre) in enumerate(zip(rep.M_H, rep.tau_star, rep.precondition)):
        print(f"hirer {k}: M_H = {mh:.4f}, tau* = {tau:.4f}, privileged dominates hirer: {pre}")
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args)
    cfg.population.quantile_panel(1)
    print(f"{cfg.source}: ok")
    print(f"digest {cfg.digest()}")
    print("schemes " + ", ".join(n for n, _ in cfg.scheme_tickets()))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "replay": cmd_replay,
    "nticket": cmd_nticket,
    "dominance": cmd_dominance,
    "threshold": cmd_threshold,
    "validate-config": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (ConfigurationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TwoTicketError, OSError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
