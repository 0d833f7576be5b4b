import io
import math

import numpy as np
import pytest

from stochfuzz.analysis import (
    CONVERGENCE_HEADER,
    GOF_HEADER,
    SURFACE_HEADER,
    chi_square_gof,
    coincidence_histogram,
    coincidence_law,
    convergence_curve,
    fit_loglog_slope,
    relation_output,
    relation_tensor,
    settling_time,
    surface_compare,
    surface_grid,
    write_convergence_csv,
    write_gof_csv,
    write_surface_csv,
)
from stochfuzz.core import Universe, compose_fuzzy_inputs, exact_output, make_point_pdf, product_pdf
from stochfuzz.errors import InsufficientSamplesError, NoCoincidenceError
from stochfuzz.hwsim import run
from stochfuzz.rng import Lfsr, SingletonChannel, TriangularChannel, derived_seeds, triangular_samples

from conftest import WIDE, controller

# -- goodness of fit ---------------------------------------------------------

TRI2 = TriangularChannel(2, 0).pdf(Universe(3))


def test_gof_exactly_proportional_histogram():
    hist = np.round(TRI2.mass * 16_000)
    res = chi_square_gof(hist, TRI2)
    assert res.statistic == 0.0
    assert not res.reject


def test_gof_uniform_vs_triangle_rejects():
    rng = np.random.default_rng(0)
    hist = np.bincount(rng.integers(0, 7, 100_000), minlength=8)
    assert chi_square_gof(hist, TRI2).reject


def test_gof_count_at_impossible_code_rejects():
    hist = np.round(TRI2.mass * 16_000)
    hist[7] = 1
    res = chi_square_gof(hist, TRI2)
    assert math.isinf(res.statistic) and res.reject


def test_gof_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        chi_square_gof(np.ones(8) * 9, TRI2)


def test_gof_merges_sparse_bins():
    law = TriangularChannel(3, 0).pdf(Universe(4))
    hist = np.round(law.mass * 160)  # tail codes expect 2.5 counts
    res = chi_square_gof(hist, law, min_bin=5)
    assert all(e >= 5 for e in res.expected)
    assert res.dof == len(res.bins) - 1
    assert res.bins[0][0] == 0 and res.bins[-1][1] == 15
    assert sum(b - a + 1 for a, b in res.bins) == 16


def test_gof_healthy_generator_calibration():
    kept = 0
    for seed in derived_seeds(32, 77, 100):
        draws = triangular_samples(Lfsr(32, WIDE.taps, seed), TriangularChannel(2, 0), 100_000)
        kept += not chi_square_gof(np.bincount(draws, minlength=8), TRI2).reject
    assert kept >= 95


# -- oracles -----------------------------------------------------------------

@pytest.mark.parametrize("p,q", [((2, 0), (2, 2)), ((3, 1), (1, 4)), ((2, 3), (2, 3))])
def test_coincidence_law_is_normalized_product(p, q):
    u = Universe(4)
    P, Q = TriangularChannel(*p).pdf(u), TriangularChannel(*q).pdf(u)
    prod, norm = product_pdf(P, Q)
    np.testing.assert_allclose(coincidence_law(P, Q), prod / norm, atol=1e-12)
    assert float(sum(coincidence_law(P, Q, exact=True))) == 1.0


def test_coincidence_histogram_matches_product_law():
    u = Universe(4)
    p, q = TriangularChannel(2, 0), TriangularChannel(2, 2)
    hist = coincidence_histogram(WIDE, p, q, u.size, 1_000_000)
    assert hist.sum() >= 100_000
    law = np.array(coincidence_law(p.pdf(u), q.pdf(u)))
    assert np.abs(hist / hist.sum() - law).sum() <= 0.02


@pytest.mark.parametrize("mode", ["sum", "max"])
def test_relation_tensor_agrees_with_factorized_composition(cfg3x3, mode):
    rb = cfg3x3.rulebase
    u = Universe(4)
    a_in, b_in = TriangularChannel(1, 3).pdf(u), TriangularChannel(2, 6).pdf(u)
    brute = relation_output(relation_tensor(rb, mode), a_in.mass, b_in.mass)
    fast = compose_fuzzy_inputs(rb, a_in, b_in, union_mode=mode)
    np.testing.assert_allclose(fast.mass, brute / brute.sum(), atol=1e-12)


def test_relation_tensor_with_point_inputs_is_exact_output(cfg3x3):
    rb = cfg3x3.rulebase
    u = Universe(4)
    R = relation_tensor(rb)
    for xa, xb in [(0, 0), (4, 7), (9, 12)]:
        out = relation_output(R, make_point_pdf(u, xa).mass, make_point_pdf(u, xb).mass)
        cog = np.dot(out, np.arange(u.size)) / out.sum()
        assert cog == pytest.approx(exact_output(rb, xa, xb), abs=1e-12)


# -- surface -----------------------------------------------------------------

@pytest.mark.parametrize("max_code,step,expected", [(15, 4, [0, 4, 8, 12, 15]), (15, 5, [0, 5, 10, 15]),
                                                     (31, 16, [0, 16, 31])])
def test_surface_grid(max_code, step, expected):
    assert surface_grid(max_code, step) == expected


def _gappy():
    lo, hi = TriangularChannel(1, 0, "L"), TriangularChannel(1, 10, "H")
    terms = {"a": {"L": lo, "H": hi}, "b": {"L": lo, "H": hi}, "y": {"L": lo, "H": hi}}
    return controller(terms, [("L", "L", "L"), ("H", "H", "H")])


def test_surface_skips_zero_overlap_region():
    report = surface_compare(_gappy(), 5, 20_000)
    assert (5, 5) in report.skipped and (15, 15) in report.skipped
    assert (0, 0) not in report.skipped and (10, 10) not in report.skipped
    idx = report.grid.index((5, 5))
    assert math.isnan(report.exact[idx]) and math.isnan(report.stochastic[idx])


def test_surface_skip_iff_no_rule_fires(cfg3x3):
    for cfg in (_gappy(), cfg3x3):
        report = surface_compare(cfg, 3, 2000)
        for point in report.grid:
            silent = cfg.rulebase.fire_strengths(*point).sum() == 0
            assert (point in report.skipped) == silent


def test_surface_universe_covering_rulebase_has_no_skips(cfg3x3):
    assert surface_compare(cfg3x3, 4, 5000).skipped == []


def test_surface_oracle_agreement(cfg3x3):
    report = surface_compare(cfg3x3, 4, 5000)
    for (a, b), e in zip(report.grid, report.exact):
        assert abs(e - exact_output(cfg3x3.rulebase, a, b, "sum")) <= 1e-12
    live = ~np.isnan(report.exact)
    assert report.max_abs_error == np.abs(report.exact - report.stochastic)[live].max()


def test_surface_single_peak_point_within_clt_bound(cfg3x3):
    res = run(cfg3x3, 3, 3, 1_000_000)
    h = res.accepted_histogram
    codes = np.arange(h.size)
    sd = math.sqrt(np.dot(h, (codes - res.estimate_mean) ** 2) / (h.sum() - 1))
    exact = exact_output(cfg3x3.rulebase, 3, 3)
    assert abs(res.estimate_mean - exact) <= 3 * sd / math.sqrt(h.sum())


def test_surface_parallel_matches_serial(cfg3x3):
    a = surface_compare(cfg3x3, 8, 20_000, base_seed=5)
    b = surface_compare(cfg3x3, 8, 20_000, base_seed=5, workers=2)
    np.testing.assert_array_equal(a.stochastic, b.stochastic)
    np.testing.assert_array_equal(a.accepted, b.accepted)


def test_surface_error_shrinks_with_cycles(cfg3x3):
    shrank = 0
    for trial in range(20):
        small = surface_compare(cfg3x3, 4, 10_000, base_seed=1 + trial)
        large = surface_compare(cfg3x3, 4, 40_000, base_seed=1001 + trial)
        shrank += large.max_abs_error <= small.max_abs_error
    assert shrank >= 18


# -- convergence -------------------------------------------------------------

def test_convergence_deterministic_config_has_zero_spread():
    p = {"P": SingletonChannel(6, "P")}
    cfg = controller({"a": p, "b": p, "y": p}, [("P", "P", "P")])
    report = convergence_curve(cfg, 6, 6, [100, 200, 400], replicas=5)
    assert [se for _, _, se in report.checkpoints] == [0.0, 0.0, 0.0]
    assert [est for _, est, _ in report.checkpoints] == [6.0, 6.0, 6.0]
    assert math.isnan(report.fitted_slope)


def test_convergence_variance_halves_when_cycles_double(point_config):
    # every cycle accepts here, so N_accepted equals the cycle count
    report = convergence_curve(point_config, 5, 9, [10_000, 20_000], replicas=1000)
    (n1, _, s1), (n2, _, s2) = report.checkpoints
    assert n1 == 10_000 and n2 == 20_000
    assert s1**2 / s2**2 == pytest.approx(2.0, rel=0.2)


def test_convergence_slope_near_half(cfg3x3):
    report = convergence_curve(cfg3x3, 4, 8, [4000, 8000, 16000, 32000, 64000], replicas=60)
    assert -0.6 <= report.fitted_slope <= -0.4
    ns = [n for n, _, _ in report.checkpoints]
    assert all(b > a for a, b in zip(ns, ns[1:]))


def test_convergence_no_coincidence_propagates(point_config):
    with pytest.raises(NoCoincidenceError):
        convergence_curve(point_config, 6, 9, [100, 200], replicas=3)


def test_convergence_rejects_unsorted_checkpoints(cfg3x3):
    with pytest.raises(ValueError):
        convergence_curve(cfg3x3, 4, 4, [200, 100], replicas=3)


@pytest.mark.parametrize("slope", [-0.5, -1.0, 0.25])
def test_fit_loglog_slope_recovers_power_law(slope):
    n = np.array([1e3, 4e3, 1.6e4, 6.4e4])
    assert fit_loglog_slope(n, 3.0 * n**slope) == pytest.approx(slope)


# -- settling ----------------------------------------------------------------

def test_settling_constant_at_target():
    assert settling_time([4.0] * 10, 4.0, 0.1) == 0


def test_settling_exit_at_last_sample():
    assert settling_time([4.0] * 9 + [5.0], 4.0, 0.1) is None


@pytest.mark.parametrize("seq,expected", [([0, 1, 2, 3.95, 4.05, 4.0], 3), ([float("nan"), 4.0], 1),
                                          ([4.0, 9.0, 4.0], 2), ([], None)])
def test_settling_examples(seq, expected):
    assert settling_time(seq, 4.0, 0.1) == expected


def test_settling_rejects_bad_band():
    with pytest.raises(ValueError):
        settling_time([1.0], 1.0, 0.0)


def test_settling_measured_on_single_rule(cfg_single_rule):
    ctl = cfg_single_rule.controller
    xa, xb = 3, 3
    target = exact_output(ctl.rulebase, xa, xb)
    band = 0.02 * ctl.output_span()
    times = []
    for seed in derived_seeds(ctl.generator.width, 31, 10):
        res = run(ctl, xa, xb, 100_000, seed=seed, record_filtered=True)
        times.append(settling_time(res.filtered_trace, target, band))
    assert None not in times
    times = np.array(times)
    # measured only: the spread across replicas bounds each replica
    assert np.all(np.abs(times - times.mean()) <= 4 * times.std(ddof=1) + 1)


# -- CSV ---------------------------------------------------------------------

def test_surface_csv(cfg3x3):
    report = surface_compare(_gappy(), 5, 5000)
    text = write_surface_csv(report)
    lines = text.splitlines()
    assert lines[0] == ",".join(SURFACE_HEADER) == "xa,xb,exact,stochastic,abs_error,skipped"
    assert len(lines) == 1 + len(report.grid)
    assert lines[1].startswith("0,0,") and lines[1].endswith(",0")
    assert any(ln.startswith("5,5,nan,nan,nan,1") for ln in lines)


def test_convergence_csv(point_config):
    report = convergence_curve(point_config, 5, 9, [100, 300], replicas=4)
    buf = io.StringIO()
    write_convergence_csv(report, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CONVERGENCE_HEADER) == "n_accepted,estimate,stderr"
    assert [float(v) for v in lines[1].split(",")] == list(report.checkpoints[0])


def test_gof_csv():
    law = TriangularChannel(3, 0).pdf(Universe(4))
    res = chi_square_gof(np.round(law.mass * 160), law)
    lines = write_gof_csv(res).splitlines()
    assert lines[0] == ",".join(GOF_HEADER) == "bin,observed,expected"
    assert lines[1].split(",")[0] == "0-1"
    assert len(lines) == 1 + len(res.bins)


def test_csv_written_to_path(tmp_path, point_config):
    report = convergence_curve(point_config, 5, 9, [100, 300], replicas=4)
    path = tmp_path / "c.csv"
    text = write_convergence_csv(report, path)
    assert path.read_text() == text
