"""Command-line interface: ``ngpsd {generate,discriminate,evaluate,antinoise}``.

Exit codes: 0 success, 1 every selected method failed, 2 usage or I/O error.
Every flag may also come from a JSON file given with ``--config``; keys are
the flag names with dashes replaced by underscores, and explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import classic, neural
from .antinoise import NoiseSweep, run_sweep
from .errors import PsdError
from .evaluation import MethodReport, evaluate_method, write_report_csv, write_report_json
from .ga import GaConfig, decode, ga_optimize, load_chromosome, save_chromosome, tuning_subset
from .methods import DEFAULT_PARAMS, METHOD_NAMES, LgSettings, MethodSpec, PcnnSettings, compute_factors
from .pulses import PulseSet, SynthParams, load_pulses, save_pulses, subtract_baseline, synth_set
from .svg import histogram_svg, sweep_svg

log = logging.getLogger("ngpsd")

EXIT_OK, EXIT_ALL_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _csv_floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="pulse file (text matrix, or CSV with s0,s1,... header)")
    p.add_argument("--format", choices=("auto", "text-matrix", "csv"), default="auto")
    p.add_argument("--dt-ns", type=float, default=1.0, help="sampling interval in ns (default 1)")
    p.add_argument("--no-baseline", action="store_true", help="skip pre-trigger baseline subtraction")
    p.add_argument("--methods", default=",".join(METHOD_NAMES), help="comma-separated subset of " + ",".join(METHOD_NAMES))
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    g = p.add_argument_group("method parameters")
    g.add_argument("--zc-tau-ns", type=float, default=DEFAULT_PARAMS["zc"].tau * 1e9)
    g.add_argument("--zc-as-printed", action="store_true")
    g.add_argument("--cc-slow-offset-ns", type=float, default=DEFAULT_PARAMS["cc"].slow_start_offset)
    g.add_argument("--cc-total-end-ns", type=float, default=None)
    g.add_argument("--feps-ut", type=float, default=DEFAULT_PARAMS["feps"].ut_fraction)
    g.add_argument("--feps-as-printed", action="store_true")
    g.add_argument("--fga-bin", type=int, default=DEFAULT_PARAMS["fga"].f_bin)
    g.add_argument("--pcnn-iter", type=int, default=DEFAULT_PARAMS["pcnn"].params.n_iter)
    g.add_argument("--lg-m", type=int, default=DEFAULT_PARAMS["lg"].lg.m)
    g.add_argument("--hqcscm-params", default=None, help="JSON chromosome from a previous --ga-tune run")
    g.add_argument("--ga-tune", action="store_true", help="tune HQC-SCM with the genetic algorithm first")
    g.add_argument("--ga-population", type=int, default=20)
    g.add_argument("--ga-generations", type=int, default=50)
    g.add_argument("--ga-subset", type=int, default=1000, help="pulses used for GA fitness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ngpsd", description="Neutron/gamma pulse shape discrimination")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    gen = sub.add_parser("generate", help="write a labelled synthetic pulse set")
    gen.add_argument("--n", type=int, default=500, help="pulses per class")
    gen.add_argument("--gamma-slow", type=float, default=0.15)
    gen.add_argument("--neutron-slow", type=float, default=0.35)
    gen.add_argument("--slow-jitter", type=float, default=0.025)
    gen.add_argument("--noise-sigma", type=float, default=0.01)
    gen.add_argument("--fast-decay", type=float, default=8.0)
    gen.add_argument("--slow-decay", type=float, default=80.0)
    gen.add_argument("--rise-time", type=float, default=4.0)
    gen.add_argument("--samples", type=int, default=280)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="pulses.csv")
    gen.add_argument("--config")
    parser.subcommands["generate"] = gen

    for name, help_ in (
        ("discriminate", "factors, fits and 0/1 labels per method"),
        ("evaluate", "histograms, SVG plots and the FOM table"),
        ("antinoise", "Monte-Carlo FOM sweep over added noise variance"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_input_args(p)
        p.add_argument("--config")
        parser.subcommands[name] = p
        if name == "antinoise":
            p.add_argument("--variances", default=",".join(repr(v) for v in NoiseSweep().variances))
            p.add_argument("--reps", type=int, default=100)
            p.add_argument("--failure-threshold", type=int, default=10)
            p.add_argument("--workers", type=int, default=None)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            parser.exit(EXIT_USAGE, f"ngpsd: cannot read config {args.config}: {exc}\n")
        if isinstance(cfg.get("methods"), list):
            cfg["methods"] = ",".join(cfg["methods"])
        if isinstance(cfg.get("variances"), list):
            cfg["variances"] = ",".join(map(repr, cfg["variances"]))
        subparser = parser.subcommands[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.exit(EXIT_USAGE, f"ngpsd: unknown config keys: {', '.join(sorted(unknown))}\n")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------------ helpers


def _load(args) -> PulseSet:
    if not args.input:
        raise UsageError("--input is required")
    fmt = args.format
    if fmt == "auto":
        fmt = "csv" if str(args.input).lower().endswith(".csv") else "text-matrix"
    try:
        pulses = load_pulses(args.input, fmt, dt=args.dt_ns * 1e-9)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    except PsdError as exc:
        raise UsageError(f"{args.input}: {exc}") from None
    return pulses if args.no_baseline else subtract_baseline(pulses)


def _method_names(args) -> list[str]:
    names = [m.strip().lower() for m in str(args.methods).split(",") if m.strip()]
    if not names:
        raise UsageError("no methods selected")
    bad = [m for m in names if m not in METHOD_NAMES]
    if bad:
        raise UsageError(f"unknown methods: {', '.join(bad)}")
    return list(dict.fromkeys(names))


def _hqcscm_params(args, pulses: PulseSet, out: Path) -> neural.HqcScmParams:
    if args.ga_tune:
        subset = tuning_subset(pulses, args.ga_subset)
        cfg = GaConfig(population=args.ga_population, generations=args.ga_generations, seed=args.seed)
        split = neural.hqcscm_split_point(subset)
        result = ga_optimize(subset, cfg, args.bins)
        save_chromosome(out / "hqcscm_params.json", result.genes, result.fitness, split)
        log.info("GA best FOM %.4f", result.fitness)
        return decode(result.genes, None)
    if args.hqcscm_params:
        genes, _ = load_chromosome(args.hqcscm_params)
        return decode(genes, None)
    return DEFAULT_PARAMS["hqcscm"]


def _specs(args, pulses: PulseSet, out: Path) -> list[MethodSpec]:
    names = _method_names(args)
    specs = []
    for name in names:
        if name == "zc":
            params = classic.ZcParams(tau=args.zc_tau_ns * 1e-9, as_printed=args.zc_as_printed)
        elif name == "cc":
            params = classic.CcWindows(args.cc_slow_offset_ns, args.cc_total_end_ns)
        elif name == "feps":
            params = classic.FepsParams(ut_fraction=args.feps_ut, as_printed=args.feps_as_printed)
        elif name == "fga":
            params = classic.FgaParams(args.fga_bin)
        elif name == "pcnn":
            params = PcnnSettings(replace(DEFAULT_PARAMS["pcnn"].params, n_iter=args.pcnn_iter))
        elif name == "lg":
            params = LgSettings(lg=neural.LgParams(args.lg_m))
        else:
            params = _hqcscm_params(args, pulses, out)
        specs.append(MethodSpec(name, params))
    return specs


def _reports(args, pulses: PulseSet, out: Path) -> list[MethodReport]:
    reports = []
    for spec in _specs(args, pulses, out):
        log.info("running %s", spec.name)
        reports.append(evaluate_method(compute_factors(pulses, spec), args.bins, spec.name))
    return reports


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from None
    return out


# ----------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    try:
        base = SynthParams(fast_decay=args.fast_decay, slow_decay=args.slow_decay, rise_time=args.rise_time)
        for frac in (args.gamma_slow, args.neutron_slow):
            replace(base, slow_fraction=frac)
        pulses = synth_set(
            args.n,
            gamma_slow=args.gamma_slow,
            neutron_slow=args.neutron_slow,
            noise_sigma=args.noise_sigma,
            slow_jitter=args.slow_jitter,
            n_samples=args.samples,
            seed=args.seed,
            base=base,
        )
    except PsdError as exc:
        raise UsageError(str(exc)) from None
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_pulses(pulses, args.out, "csv")
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def cmd_discriminate(args) -> int:
    pulses = _load(args)
    out = _outdir(args)
    reports = _reports(args, pulses, out)
    for r in reports:
        write_report_csv(r, out / f"{r.method}_factors.csv")
        with (out / f"{r.method}_labels.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pulse_index", "label"])
            if r.classifications is not None:
                for i, (lab, failed) in enumerate(zip(r.classifications, r.pulse_failures)):
                    w.writerow([i, "NA" if failed else int(lab)])
        summary = r.summary()
        if pulses.labels is not None and r.classifications is not None:
            summary["agreement"] = float(np.mean(r.classifications == pulses.labels))
        (out / f"{r.method}_fit.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if any(not r.failure for r in reports) else EXIT_ALL_FAILED


def cmd_evaluate(args) -> int:
    pulses = _load(args)
    out = _outdir(args)
    reports = _reports(args, pulses, out)
    with (out / "fom_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "fom", "failure"])
        for r in reports:
            w.writerow([r.method, "NA" if r.failure else repr(float(r.fom)), str(r.failure).lower()])
    for r in reports:
        write_report_json(r, out / f"{r.method}_fit.json")
        if r.histogram is None:
            continue
        with (out / f"{r.method}_hist.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            e = r.histogram.bin_edges
            for lo, hi, c in zip(e[:-1], e[1:], r.histogram.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        title = f"{r.method.upper()}  FOM = {r.fom:.3f}" if not r.failure else f"{r.method.upper()}  fit failed"
        fit = None if r.failure else r.fit
        svg = histogram_svg(r.histogram, fit, None if r.failure else r.dividing_point, title)
        (out / f"{r.method}_hist.svg").write_text(svg)
    return EXIT_OK if any(not r.failure for r in reports) else EXIT_ALL_FAILED


def cmd_antinoise(args) -> int:
    pulses = _load(args)
    out = _outdir(args)
    try:
        sweep = NoiseSweep(
            variances=tuple(_csv_floats(args.variances)),
            repetitions=args.reps,
            failure_threshold=args.failure_threshold,
            base_seed=args.seed,
        )
    except (PsdError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    specs = _specs(args, pulses, out)
    result = run_sweep(pulses, specs, sweep, args.bins, args.workers)
    result.write_fom_csv(out / "sweep_fom.csv")
    result.write_summary_csv(out / "sweep_summary.csv")
    (out / "antinoise.svg").write_text(sweep_svg(result))
    ok = any(c.failure_count < sweep.repetitions for c in result.cells.values())
    return EXIT_OK if ok else EXIT_ALL_FAILED


COMMANDS = {
    "generate": cmd_generate,
    "discriminate": cmd_discriminate,
    "evaluate": cmd_evaluate,
    "antinoise": cmd_antinoise,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ngpsd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PsdError as exc:
        print(f"ngpsd: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
