"""Command-line entry point: ``heavytail <subcommand> [--config PATH] [--seed N] [--out DIR] [--assert]``.

Each subcommand runs one experiment, writes ``<subcommand>.csv`` in the
long result format plus ``<subcommand>.manifest.json``, and prints a short
summary. Exit codes: 0 success, 1 usage error, 2 invalid input or
configuration, 3 a verdict failed while ``--assert`` was given.
"""
import argparse
import logging
import math
import os
import sys

import numpy as np
from scipy.stats import kendalltau

from . import copula as _copula
from . import dist, fit, io, portfolio, risk, utility
from . import rng as _rng
from .exceptions import DataDomainError, FitConvergenceError, HeavyTailError

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_ASSERT = 0, 1, 2, 3

log = logging.getLogger("heavytail")


class _Outcome:
    def __init__(self, experiment):
        self.experiment = experiment
        self.rows = []
        self.failures = []

    def add(self, series, parameter, value, metric, estimate, ci_low=math.nan, ci_high=math.nan, verdict=""):
        self.rows.append(io.ResultRow(self.experiment, series, parameter, value, metric,
                                      float(estimate), float(ci_low), float(ci_high), verdict))

    def require(self, ok, message):
        if not ok:
            self.failures.append(message)


def _family_name(spec):
    return type(spec).__name__.lower()


def _losses(cfg, out_dir):
    if cfg.data_path:
        return io.load_losses(cfg.data_path).amounts()
    path = os.path.join(out_dir, "synthetic_losses.csv")
    return io.synth_dataset(cfg.dist, cfg.synth_count, cfg.seed, path).amounts()


def _trend(counts, values):
    diffs = np.diff(values)
    tau = float(kendalltau(counts, values)[0]) if len(values) > 1 else math.nan
    if diffs.size and np.all(diffs < 0):
        label = "strictly-decreasing"
    elif diffs.size and np.all(diffs > 0):
        label = "strictly-increasing"
    elif tau > 0:
        label = "increasing-trend"
    elif tau < 0:
        label = "decreasing-trend"
    else:
        label = "no-trend"
    return tau, label


def _check_trend(out, label, expect, where):
    if expect is None:
        out.require(label != "no-trend", f"{where}: no trend")
        return
    wanted = {
        "decreasing": {"strictly-decreasing"},
        "increasing": {"strictly-increasing", "increasing-trend"},
    }.get(expect, {expect})
    out.require(label in wanted, f"{where}: trend {label}, expected {expect}")


def run_fit(cfg, out_dir):
    out = _Outcome("fit")
    x = _losses(cfg, out_dir)
    reports = []
    for family in cfg.families:
        try:
            reports.append(fit.fit_mle(family, x))
        except (DataDomainError, FitConvergenceError) as exc:
            out.add(family, "rank", -1, "error", math.nan, verdict=f"failed: {exc}")
    ranked = fit.select_model(reports)
    for rank, rep in enumerate(ranked, start=1):
        for metric in ("log_likelihood", "aic", "bic", "ks_statistic", "ad_statistic"):
            out.add(rep.family, "rank", rank, metric, getattr(rep, metric))
        for name, value in rep.params.items():
            out.add(rep.family, "rank", rank, f"param:{name}", value)
    try:
        hill = fit.hill_tail_index(x, cfg.hill_fraction)
        half = 1.959963984540054 * hill.stderr
        out.add("hill", "top_fraction", cfg.hill_fraction, "tail_index", hill.tail_index,
                hill.tail_index - half, hill.tail_index + half)
    except HeavyTailError as exc:
        out.add("hill", "top_fraction", cfg.hill_fraction, "tail_index", math.nan, verdict=f"failed: {exc}")
    best = ranked[0].family if ranked else "none"
    out.add("ranking", "sample_size", len(x), "best_family", math.nan, verdict=best)
    if cfg.expect_best:
        out.require(best == cfg.expect_best, f"best family {best}, expected {cfg.expect_best}")
    return out


def _sweep_spec(cfg, out_dir):
    if cfg.sweep_fit:
        return fit.fit_mle(cfg.sweep_fit, _losses(cfg, out_dir)).spec
    return cfg.dist


def run_var_sweep(cfg, out_dir):
    out = _Outcome("var-sweep")
    spec = _sweep_spec(cfg, out_dir)
    series = _family_name(spec)
    reports = risk.mc_var_sweep(spec, cfg.n_sweep, cfg.levels, cfg.mc_count, cfg.seed, measures=("VaR", "CVaR"))
    for rep in reports:
        out.add(series, "n", rep.aggregation_count, f"{rep.measure}@{rep.level!r}",
                rep.point_estimate, rep.ci_low, rep.ci_high)
    for level in cfg.levels:
        for measure in ("VaR", "CVaR"):
            picked = [r for r in reports if r.level == level and r.measure == measure]
            tau, label = _trend([r.aggregation_count for r in picked], [r.point_estimate for r in picked])
            metric = f"{measure}@{level!r}"
            out.add(series, "kendall_tau", "n", f"trend:{metric}", tau, verdict=label)
            if measure == "VaR":
                _check_trend(out, label, cfg.expect_trend, metric)
    return out


def run_bootstrap(cfg, out_dir):
    out = _Outcome("bootstrap")
    x = _losses(cfg, out_dir)
    level = cfg.levels[0]
    reports = risk.bootstrap_var_sweep(x, cfg.n_sweep, level, cfg.inner_reps, cfg.outer_reps, cfg.seed, cfg.ci_level)
    for rep in reports:
        out.add("data", "n", rep.aggregation_count, f"VaR@{level!r}", rep.point_estimate, rep.ci_low, rep.ci_high)
    tau, label = _trend([r.aggregation_count for r in reports], [r.point_estimate for r in reports])
    out.add("data", "kendall_tau", "n", f"trend:VaR@{level!r}", tau, verdict=label)
    _check_trend(out, label, cfg.expect_trend, f"VaR@{level!r}")
    return out


def run_schur_scan(cfg, out_dir):
    out = _Outcome("schur-scan")
    chain = portfolio.majorization_chain(cfg.scan_n, cfg.scan_steps)
    level = cfg.levels[0]
    result = portfolio.schur_scan(cfg.dist, chain, level, cfg.mc_count, cfg.seed)
    series = _family_name(cfg.dist)
    steps = len(chain)
    for j, rep in enumerate(result.reports):
        t = j / (steps - 1) if steps > 1 else 0.0
        out.add(series, "t", t, f"VaR@{level!r}", rep.var_estimate, rep.ci_low, rep.ci_high)
    for j, gap in enumerate(result.gaps):
        out.add(series, "gap", j, "var_gap_toward_equal", gap.estimate, gap.ci_low, gap.ci_high)
    out.add(series, "chain_length", steps, "verdict", math.nan, verdict=result.verdict)
    if cfg.expect_verdict:
        out.require(result.verdict == cfg.expect_verdict, f"verdict {result.verdict}, expected {cfg.expect_verdict}")
    else:
        out.require(result.verdict != portfolio.VERDICT_INCONCLUSIVE, "verdict inconclusive")
    return out


def run_trunc_scan(cfg, out_dir):
    out = _Outcome("trunc-scan")
    spec = cfg.dist
    if cfg.trunc_variant == "equal-weight-Fn":
        w = portfolio.WeightVector.equal(cfg.trunc_n)
    else:
        w = portfolio.WeightVector(cfg.trunc_weights)
    bound = portfolio.support_bound(spec, w, cfg.trunc_z, cfg.trunc_r, cfg.trunc_n, cfg.trunc_variant,
                                    cfg.mc_count, _rng.child(cfg.seed, 0))
    series = f"{_family_name(spec)}:{cfg.trunc_variant}"
    m = bound.moment
    lo, hi = m.ci()
    out.add(series, "r", cfg.trunc_r, "abs_moment", m.estimate, lo, hi)
    out.add(series, "z", cfg.trunc_z, "divisor", bound.divisor.estimate, bound.divisor.ci_low, bound.divisor.ci_high)
    out.add(series, "z", cfg.trunc_z, "support_bound", bound.support)
    order = portfolio.verify_truncated_ordering(spec, w, cfg.trunc_z, portfolio.TruncationSpec(bound.support, cfg.trunc_mode),
                                                cfg.mc_count, _rng.child(cfg.seed, 1))
    out.add(series, "z", cfg.trunc_z, "p_aggregate", order.aggregate_probability)
    out.add(series, "z", cfg.trunc_z, "p_single", order.single_probability)
    d = order.difference
    verdict = "holds" if order.verdict else "not-resolved"
    out.add(series, "z", cfg.trunc_z, "p_difference", d.estimate, d.ci_low, d.ci_high, verdict)
    out.require(order.verdict, "truncated ordering not resolved")
    return out


def run_copula_check(cfg, out_dir):
    out = _Outcome("copula-check")
    cs = cfg.copula
    dim = _copula._poly(cs).n
    name = "efgm" if isinstance(cs, _copula.EFGM) else "power-type"
    for i, alpha in enumerate(cfg.copula_alphas):
        series = f"{name}:alpha={alpha!r}"
        gaps = []
        for j, level in enumerate(cfg.tail_levels):
            z = _copula.independent_mean_quantile(alpha, dim, level, cfg.mc_count, _rng.child(cfg.seed, i, j, 0))
            ratio = _copula.tail_equivalence_ratio(cs, alpha, dim, z, cfg.mc_count, _rng.child(cfg.seed, i, j, 1))
            out.add(series, "level", level, "tail_ratio", ratio.ratio, ratio.ci_low, ratio.ci_high)
            gaps.append(abs(ratio.ratio - 1.0))
        converging = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
        verdict = "converging" if converging else "not-converging"
        out.add(series, "levels", len(gaps), "tail_ratio_trend", math.nan, verdict=verdict)
        out.require(converging, f"{series}: tail ratio not converging")
        if isinstance(cs, _copula.EFGM) and dim == 2 and alpha != 1.0:
            cmp_ = _copula.var_compare_dependent(alpha, cs.dependence, cfg.copula_var_level, cfg.mc_count,
                                                 _rng.child(cfg.seed, i, 99))
            lvl = cfg.copula_var_level
            out.add(series, "level", lvl, "var_mean_pair", cmp_.aggregate_var)
            out.add(series, "level", lvl, "var_single", cmp_.single_var)
            out.add(series, "level", lvl, "var_gap", cmp_.gap, cmp_.gap_ci_low, cmp_.gap_ci_high, cmp_.verdict)
            expected = "aggregate-smaller" if alpha > 1.0 else "aggregate-greater"
            out.require(cmp_.verdict == expected, f"{series}: VaR verdict {cmp_.verdict}, expected {expected}")
    return out


def run_eu_sweep(cfg, out_dir):
    out = _Outcome("eu-sweep")
    for i, alpha in enumerate(cfg.tail_indices):
        series = f"powerlaw:tail_index={alpha!r}"
        grid = utility.pooled_eu_sweep(dist.PowerLaw(alpha), cfg.n_sweep, cfg.m_sweep, cfg.liability,
                                       cfg.mc_count, _rng.child(cfg.seed, i), cfg.curtailment)
        for a, n in enumerate(grid.counts):
            for b, m in enumerate(grid.pools):
                out.add(series, "n", n, f"EU@m={m}", grid.estimates[a, b], grid.ci_low[a, b], grid.ci_high[a, b])
        for b, m in enumerate(grid.pools):
            shape = utility.ushape_detect(grid.curve(b)) if len(grid.counts) >= 5 else None
            verdict = shape.verdict if shape else "inconclusive"
            argmin = shape.argmin if shape and shape.argmin is not None else math.nan
            out.add(series, "m", m, "shape", argmin, verdict=verdict)
            out.require(verdict != "inconclusive", f"{series} m={m}: shape inconclusive")
    return out


COMMANDS = {
    "fit": run_fit,
    "var-sweep": run_var_sweep,
    "bootstrap": run_bootstrap,
    "schur-scan": run_schur_scan,
    "trunc-scan": run_trunc_scan,
    "copula-check": run_copula_check,
    "eu-sweep": run_eu_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="heavytail", description="Heavy-tailed risk aggregation experiments.")
    sub = parser.add_subparsers(dest="command", title="subcommands", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config and HEAVYTAIL_SEED)")
        p.add_argument("--out", help="output directory (default: output.dir from config)")
        p.add_argument("--assert", dest="assert_verdicts", action="store_true",
                       help="exit with status 3 when a verdict fails")
    return parser


def dispatch(command, cfg, out_dir=None, assert_verdicts=False):
    """Run one experiment and write its files; returns (exit code, outcome)."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    outcome = COMMANDS[command](cfg, out_dir)
    csv_path = os.path.join(out_dir, f"{command}.csv")
    io.write_results(outcome.rows, csv_path)
    code = EXIT_ASSERT if assert_verdicts and outcome.failures else EXIT_OK
    io.write_manifest(cfg, command, os.path.join(out_dir, f"{command}.manifest.json"), [csv_path], code)
    return code, outcome


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = io.load_config(args.config, seed=args.seed)
        code, outcome = dispatch(args.command, cfg, args.out, args.assert_verdicts)
    except (HeavyTailError, OSError) as exc:
        print(f"heavytail {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for row in outcome.rows:
        if row.verdict:
            print(f"{row.series} {row.metric} [{row.parameter}={row.value}]: {row.verdict}")
    for message in outcome.failures:
        print(f"check failed: {message}", file=sys.stderr if code else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
