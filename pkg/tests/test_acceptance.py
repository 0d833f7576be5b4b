"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines are collected into the terminal summary) or
directly with ``python tests/test_acceptance.py``.
"""

import itertools
import time

import numpy as np
import pytest

from stochfuzz.analysis import (
    chi_square_gof,
    coincidence_histogram,
    convergence_curve,
    surface_compare,
)
from stochfuzz.cli import main
from stochfuzz.config import load_config
from stochfuzz.core import Universe, exact_output, product_pdf
from stochfuzz.errors import NoRuleFiresError
from stochfuzz.hwsim import GeneratorConfig, quantize, run
from stochfuzz.rng import DEFAULT_TAPS, Lfsr, TriangularChannel, derived_seeds, triangular_samples

RESULTS: list[str] = []

WIDE = GeneratorConfig(width=32, taps=(32, 22, 2, 1), seed=1)
DEFAULT = GeneratorConfig()


def record(n, title, ok, detail, informational=False):
    tag = "INFO" if informational else ("PASS" if ok else "FAIL")
    line = f"[{tag}] criterion {n}: {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# -- 1 -----------------------------------------------------------------------

def test_criterion_1_lfsr_exactness():
    t0 = time.perf_counter()
    reg = Lfsr(8, (8, 6, 5, 4), 1)
    visits = np.zeros(256, dtype=int)
    for _ in range(255):
        visits[reg.state] += 1
        reg.step()
    all_once = visits[0] == 0 and np.all(visits[1:] == 1) and reg.state == 1

    reg16 = Lfsr(16, DEFAULT_TAPS, 0xACE1)
    steps = 0
    while True:
        reg16.step()
        steps += 1
        if reg16.state == 0xACE1:
            break
    elapsed = time.perf_counter() - t0
    ok = all_once and steps == 65535 and elapsed < 1.0
    record(1, "LFSR exactness", ok,
           f"width 8 visits each nonzero state once={all_once}, width 16 period={steps}, {elapsed:.3f}s (< 1s)")
    assert ok


# -- 2 -----------------------------------------------------------------------

def _gof_pass_count(gen, k, trials=100, samples=100_000, base=500):
    ch = TriangularChannel(k, 0)
    law = ch.pdf(Universe(k + 1))
    kept = 0
    for seed in derived_seeds(gen.width, base + k, trials):
        draws = triangular_samples(Lfsr(gen.width, gen.taps, seed), ch, samples)
        kept += not chi_square_gof(np.bincount(draws, minlength=law.mass.size), law).reject
    return kept


def test_criterion_2_triangle_law():
    counts = {k: _gof_pass_count(WIDE, k) for k in (1, 2, 3)}
    ok = all(c >= 95 for c in counts.values())
    record(2, "triangle law chi-square (32-bit register)", ok,
           ", ".join(f"k={k}: {c}/100" for k, c in counts.items()) + " (need >= 95/100 each)")
    narrow = {k: _gof_pass_count(DEFAULT, k) for k in (1, 2, 3)}
    record(2, "triangle law chi-square (16-bit default register)", None,
           ", ".join(f"k={k}: {c}/100" for k, c in narrow.items())
           + " (period 65535 < 2k*10^5 bits; samples are not independent)", informational=True)
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_3_coincidence_product():
    u = Universe(4)
    p, q = TriangularChannel(2, 0), TriangularChannel(2, 2)
    law, _ = product_pdf(p.pdf(u), q.pdf(u))
    law = law / law.sum()
    hist = coincidence_histogram(DEFAULT, p, q, u.size, 1_000_000)
    dist = float(np.abs(hist / hist.sum() - law).sum())
    ok = hist.sum() >= 100_000 and dist <= 0.02
    record(3, "coincidence product oracle (16-bit default register)", ok,
           f"L1={dist:.5f} at {hist.sum()} accepted (need <= 0.02 at >= 1e5)")
    assert ok


# -- 4 and 5 -----------------------------------------------------------------

def brute_exact(rb, xa, xb):
    """O(|U|^3) composition of point inputs through every rule, then COG."""
    u = rb.universe("y")
    num = den = 0.0
    for x1, x2, y in itertools.product(range(rb.universe("a").size), range(rb.universe("b").size), range(u.size)):
        if x1 != xa or x2 != xb:
            continue
        for r in rb.rules:
            m = rb.a_terms[r.a](x1) * rb.b_terms[r.b](x2) * rb.y_terms[r.y](y)
            num += m * y
            den += m
    return None if den == 0 else num / den


def _oracle_gap(rb):
    gap = 0.0
    for xa, xb in itertools.product(range(rb.universe("a").size), range(rb.universe("b").size)):
        brute = brute_exact(rb, xa, xb)
        try:
            fast = exact_output(rb, xa, xb, "sum")
        except NoRuleFiresError:
            assert brute is None
            continue
        gap = max(gap, abs(fast - brute))
    return gap


@pytest.fixture(scope="module")
def surface_3x3():
    cfg = load_config("rulebase3x3.json")
    return surface_compare(cfg.controller, 4, 1_000_000, base_seed=cfg.experiment.base_seed)


def test_criterion_4_controller_surface(surface_3x3):
    rep = surface_3x3
    limit = 0.02 * rep.output_span
    oracle = max(_oracle_gap(load_config(n).controller.rulebase) for n in ("rulebase3x3.json", "eq7.json"))
    ok = rep.max_abs_error <= limit and not rep.skipped and len(rep.grid) == 25 and oracle <= 1e-12
    record(4, "controller surface 5x5, 1e6 cycles/point (32-bit register)", ok,
           f"max|err|={rep.max_abs_error:.4f} (limit {limit:.2f}), rmse={rep.rmse:.4f}, "
           f"exact engine vs brute force at bits 4 and 5: {oracle:.1e} (limit 1e-12)")
    narrow = load_config("rulebase3x3_w16.json").controller
    rep16 = surface_compare(narrow, 4, 1_000_000, base_seed=1)
    record(4, "controller surface (16-bit default register)", None,
           f"max|err|={rep16.max_abs_error:.4f}, max|rate z|={np.abs(rep16.rate_z_scores()).max():.2f}",
           informational=True)
    assert ok


def test_criterion_5_acceptance_rate(surface_3x3):
    z = np.abs(surface_3x3.rate_z_scores())
    ok = bool(np.all(z <= 3))
    record(5, "acceptance-rate identity at every surface point (32-bit register)", ok,
           f"max |z|={z.max():.2f} over {z.size} points (limit 3)")
    assert ok


# -- 6 -----------------------------------------------------------------------

def test_criterion_6_convergence_rate():
    cfg = load_config("rulebase3x3.json")
    ctl, exp = cfg.controller, cfg.experiment
    xa, xb = quantize(exp.xa, ctl.quantizer_bits), quantize(exp.xb, ctl.quantizer_bits)
    rep = convergence_curve(ctl, xa, xb, exp.checkpoints, replicas=100, base_seed=exp.base_seed)
    ok = -0.6 <= rep.fitted_slope <= -0.4
    record(6, "convergence slope, 100 replicas (32-bit register)", ok,
           f"slope={rep.fitted_slope:.4f} over N_accepted {rep.checkpoints[0][0]:.0f}..{rep.checkpoints[-1][0]:.0f} "
           "(need [-0.6, -0.4])")
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_7_single_rule_end_to_end():
    cfg = load_config("eq7.json")
    ctl, exp = cfg.controller, cfg.experiment
    xa, xb = quantize(exp.xa, ctl.quantizer_bits), quantize(exp.xb, ctl.quantizer_bits)
    at_peaks = xa == xb == 3
    target = ctl.rulebase.y_terms["B"].mean()
    res = run(ctl, xa, xb, 1_000_000)
    limit = 0.02 * ctl.output_span()
    ok = at_peaks and abs(res.estimate_mean - target) <= limit
    record(7, "single-rule S,S -> B end to end (16-bit default register)", ok,
           f"inputs=({xa},{xb}), estimate={res.estimate_mean:.4f}, B centroid={target:.1f}, "
           f"|err|={abs(res.estimate_mean - target):.4f} (limit {limit:.2f})")
    assert ok


# -- 8 -----------------------------------------------------------------------

RERUNS = [
    ("surface", ["--config", "rulebase3x3.json", "surface", "--step", "4", "--cycles", "50000", "--seed", "3"]),
    ("converge", ["--config", "rulebase3x3.json", "converge", "--replicas", "10", "--seed", "3",
                  "--checkpoints", "4000", "8000", "16000"]),
    ("gen-check", ["--config", "eq7.json", "gen-check", "--trials", "5", "--samples", "10000"]),
    ("simulate", ["--config", "eq7.json", "simulate", "--cycles", "20000", "--seed", "7"]),
]


def test_criterion_8_determinism(tmp_path, capsys):
    same = {}
    for name, argv in RERUNS:
        blobs = []
        for i in range(2):
            path = tmp_path / f"{name}{i}.csv"
            flag = "--trace" if name == "simulate" else "--out"
            main([*argv, flag, str(path)])
            blobs.append(path.read_bytes())
        same[name] = blobs[0] == blobs[1] and len(blobs[0]) > 0
    capsys.readouterr()
    ok = all(same.values())
    record(8, "byte-identical CSV on rerun", ok, ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
