"""Command line front end: ``stochfuzz [--config PATH] <command> ...``.

Every command prints a human-readable report and ends with a single JSON
summary line.  Exit status is 0 when the command's thresholds are met, 1
when they are not, 2 for configuration or usage errors and 3 when a
simulation accepted no samples.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis
from .config import CONFIG_ENV, ExperimentConfig, load_config
from .core import Universe, compose_fuzzy_inputs, exact_output
from .errors import ConfigError, NoCoincidenceError
from .hwsim import quantize, run, run_fuzzy_inputs
from .rng import (
    Lfsr,
    TriangularChannel,
    derived_seeds,
    is_maximal,
    lfsr_period,
    triangular_samples,
)

ERROR_FRACTION = 0.02
SLOPE_RANGE = (-0.6, -0.4)
GOF_PASS_FRACTION = 0.95
GOF_WIDTHS = (1, 2, 3)
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NO_COINCIDENCE = 0, 1, 2, 3


def _summary(command: str, passed: bool, **fields) -> None:
    fields = {k: (float(v) if isinstance(v, np.floating) else v) for k, v in fields.items()}
    print(json.dumps({"command": command, "pass": bool(passed), **fields}, sort_keys=True))


def _input_code(real: float | None, code: int | None, default: float, bits: int) -> int:
    if code is not None:
        return code
    return quantize(default if real is None else real, bits)


def gen_check(cfg: ExperimentConfig, args) -> int:
    gen = cfg.controller.generator
    exp = cfg.experiment
    trials = args.trials or exp.gof_trials
    samples = args.samples or exp.gof_samples
    rows = []

    reg = Lfsr(8, (8, 6, 5, 4), 1)
    seen = set()
    for _ in range(255):
        seen.add(reg.state)
        reg.step()
    rows.append(("lfsr width 8 visits 255 states", len(seen) == 255 and reg.state == 1, f"{len(seen)}"))

    if gen.width <= 20:
        period = lfsr_period(gen.width, gen.taps, gen.seed)
        ok = period == (1 << gen.width) - 1
        rows.append((f"lfsr width {gen.width} period", ok, f"{period}"))
    else:
        ok = is_maximal(gen.width, gen.taps)
        rows.append((f"lfsr width {gen.width} maximal (algebraic)", ok, str(ok)))

    gof_rows = []
    for k in GOF_WIDTHS:
        channel = TriangularChannel(k, 0, f"k{k}")
        universe = Universe(k + 1)
        law = channel.pdf(universe)
        kept = 0
        for t, seed in enumerate(derived_seeds(gen.width, exp.base_seed + k, trials)):
            draws = triangular_samples(Lfsr(gen.width, gen.taps, seed), channel, samples)
            result = analysis.chi_square_gof(np.bincount(draws, minlength=universe.size), law)
            kept += not result.reject
            if t == 0:
                gof_rows.append(result)
        ok = kept >= GOF_PASS_FRACTION * trials
        rows.append((f"triangle k={k} chi-square, {samples} samples", ok, f"{kept}/{trials} accepted"))

    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            for k, result in zip(GOF_WIDTHS, gof_rows):
                fh.write(f"# k={k}\n")
                analysis.write_gof_csv(result, fh)
    passed = all(r[1] for r in rows)
    _summary("gen-check", passed, checks=len(rows), failed=sum(not r[1] for r in rows))
    return EXIT_OK if passed else EXIT_FAIL


def simulate(cfg: ExperimentConfig, args) -> int:
    ctl = cfg.controller
    exp = cfg.experiment
    cycles = exp.cycles if args.cycles is None else args.cycles
    span = ctl.output_span()
    trace = open(args.trace, "w", newline="") if args.trace else None
    try:
        if ctl.input_mode == "stochastic_fuzzy":
            rb = ctl.rulebase
            a_ch, b_ch = cfg.fuzzy_input_channels()
            a_in, b_in = a_ch.pdf(rb.universe("a")), b_ch.pdf(rb.universe("b"))
            result = run_fuzzy_inputs(ctl, a_in, b_in, cycles, seed=args.seed, trace=trace)
            exact = compose_fuzzy_inputs(rb, a_in, b_in).mean()
            where = f"fuzzy inputs a={a_ch}, b={b_ch}"
            xa = xb = None
        else:
            xa = _input_code(args.xa, args.xa_code, exp.xa, ctl.quantizer_bits)
            xb = _input_code(args.xb, args.xb_code, exp.xb, ctl.quantizer_bits)
            # run first: a point where no rule fires surfaces as no-coincidence
            result = run(ctl, xa, xb, cycles, seed=args.seed, trace=trace)
            exact = exact_output(ctl.rulebase, xa, xb, "sum")
            where = f"xa={xa}, xb={xb}"
    finally:
        if trace:
            trace.close()
    error = result.estimate_mean - exact
    passed = abs(error) <= ERROR_FRACTION * span
    print(f"inputs          {where}")
    print(f"cycles          {result.total_cycles}")
    print(f"accepted        {result.accepted_count}")
    print(f"acceptance rate {result.acceptance_rate:.6g}")
    print(f"estimate (mean) {result.estimate_mean:.6f}")
    print(f"estimate (iir)  {result.estimate_filtered:.6f}")
    print(f"exact           {exact:.6f}")
    print(f"error           {error:+.6f} (limit {ERROR_FRACTION * span:.3f})")
    _summary("simulate", passed, xa=xa, xb=xb, estimate=result.estimate_mean, exact=exact,
             error=error, acceptance_rate=result.acceptance_rate, cycles=result.total_cycles)
    return EXIT_OK if passed else EXIT_FAIL


def surface(cfg: ExperimentConfig, args) -> int:
    exp = cfg.experiment
    step = args.step or exp.grid_step
    cycles = exp.cycles if args.cycles is None else args.cycles
    report = analysis.surface_compare(cfg.controller, step, cycles,
                                      base_seed=args.seed or exp.base_seed, workers=args.workers)
    analysis.write_surface_csv(report, args.out)
    z = report.rate_z_scores()
    live = ~np.isnan(report.exact)
    rate_ok = bool(np.all(np.abs(z[live]) <= 3))
    limit = ERROR_FRACTION * report.output_span
    error_ok = bool(report.max_abs_error <= limit)
    print(f"grid points     {len(report.grid)} (skipped {len(report.skipped)})")
    print(f"max abs error   {report.max_abs_error:.6f} (limit {limit:.3f})")
    print(f"rmse            {report.rmse:.6f}")
    print(f"max |rate z|    {np.abs(z[live]).max() if live.any() else float('nan'):.3f} (limit 3)")
    if args.out:
        print(f"wrote           {args.out}")
    passed = error_ok and rate_ok
    _summary("surface", passed, max_abs_error=report.max_abs_error, rmse=report.rmse,
             skipped=len(report.skipped), points=len(report.grid))
    return EXIT_OK if passed else EXIT_FAIL


def converge(cfg: ExperimentConfig, args) -> int:
    ctl = cfg.controller
    exp = cfg.experiment
    checkpoints = tuple(args.checkpoints) if args.checkpoints else exp.checkpoints
    replicas = args.replicas or exp.replicas
    if ctl.input_mode == "stochastic_fuzzy":
        xa = xb = None
        fuzzy = cfg.fuzzy_input_channels()
    else:
        xa = _input_code(args.xa, args.xa_code, exp.xa, ctl.quantizer_bits)
        xb = _input_code(args.xb, args.xb_code, exp.xb, ctl.quantizer_bits)
        fuzzy = None
    report = analysis.convergence_curve(ctl, xa, xb, checkpoints, replicas=replicas,
                                        base_seed=args.seed or exp.base_seed, fuzzy_inputs=fuzzy)
    analysis.write_convergence_csv(report, args.out)
    print(f"{'cycles':>10} {'n_accepted':>12} {'estimate':>10} {'stderr':>10}")
    for cycles, (n, est, se) in zip(report.cycles, report.checkpoints):
        print(f"{cycles:>10} {n:>12.1f} {est:>10.4f} {se:>10.5f}")
    lo, hi = SLOPE_RANGE
    passed = lo <= report.fitted_slope <= hi
    print(f"fitted slope {report.fitted_slope:.4f} (expected in [{lo}, {hi}])")
    _summary("converge", passed, slope=report.fitted_slope, replicas=replicas)
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochfuzz", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"config path or bundled name (default ${CONFIG_ENV} or eq7.json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-check", help="LFSR period and triangle goodness-of-fit suite")
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="write the first trial's binned counts per k as CSV")
    p.set_defaults(func=gen_check)

    def inputs(p):
        p.add_argument("--xa", type=float, help="analog input a in [0, 1]")
        p.add_argument("--xb", type=float, help="analog input b in [0, 1]")
        p.add_argument("--xa-code", type=int, help="raw code for input a, bypassing the A/D")
        p.add_argument("--xb-code", type=int, help="raw code for input b, bypassing the A/D")

    p = sub.add_parser("simulate", help="run the controller at one input point")
    inputs(p)
    p.add_argument("--cycles", type=int)
    p.add_argument("--seed", type=int, help="override the generator seed")
    p.add_argument("--trace", help="write per-cycle CSV trace here")
    p.set_defaults(func=simulate)

    p = sub.add_parser("surface", help="stochastic vs exact output over an input grid")
    p.add_argument("--step", type=int)
    p.add_argument("--cycles", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="base seed for per-point seeds")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=surface)

    p = sub.add_parser("converge", help="replica standard error vs accepted sample count")
    inputs(p)
    p.add_argument("--replicas", type=int)
    p.add_argument("--checkpoints", type=int, nargs="+")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="base seed for replica seeds")
    p.set_defaults(func=converge)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"stochfuzz: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(cfg, args)
    except NoCoincidenceError as exc:
        print(f"stochfuzz: {exc}", file=sys.stderr)
        _summary(args.command, False, error="no-coincidence", analytic_rate=exc.analytic_rate)
        return EXIT_NO_COINCIDENCE
    except ValueError as exc:
        print(f"stochfuzz: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
