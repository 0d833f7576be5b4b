"""Statistical checks of the stochastic controller against the exact engine.

Replica seeds and grid-point seeds are derived from a base seed and an
index, so every report is reproducible regardless of execution order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Sequence

import numpy as np
from scipy import stats

from .core import MembershipPdf, RuleBase, exact_output
from .errors import InsufficientSamplesError, NoCoincidenceError, NoRuleFiresError
from .hwsim import BLOCK_CYCLES, Controller, ControllerConfig, GeneratorConfig
from .rng import Channel, derived_seeds

GOF_SIGNIFICANCE = 0.01
SURFACE_HEADER = ("xa", "xb", "exact", "stochastic", "abs_error", "skipped")
CONVERGENCE_HEADER = ("n_accepted", "estimate", "stderr")
GOF_HEADER = ("bin", "observed", "expected")


# -- goodness of fit ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GofResult:
    statistic: float
    dof: int
    reject: bool
    critical: float
    bins: list[tuple[int, int]]
    observed: np.ndarray
    expected: np.ndarray


def _merge_bins(expected: np.ndarray, min_count: float) -> list[tuple[int, int]]:
    """Consecutive code ranges whose expected counts reach ``min_count``."""
    bins = []
    start, acc = 0, 0.0
    for code, e in enumerate(expected):
        acc += e
        if acc >= min_count:
            bins.append((start, code))
            start, acc = code + 1, 0.0
    if start < expected.size:
        if bins:
            bins[-1] = (bins[-1][0], expected.size - 1)
        else:
            bins.append((0, expected.size - 1))
    return bins


def chi_square_gof(
    samples: Sequence[int] | np.ndarray,
    expected: MembershipPdf | np.ndarray,
    min_bin: int = 5,
    significance: float = GOF_SIGNIFICANCE,
) -> GofResult:
    """Pearson chi-square test of a histogram against a code-indexed law.

    ``samples`` is a histogram of counts per code.  Adjacent codes are merged
    until every bin expects at least ``min_bin`` counts.  Any count at a code
    of zero probability rejects outright.
    """
    observed = np.asarray(samples, dtype=float)
    probs = expected.mass if isinstance(expected, MembershipPdf) else np.asarray(expected, float)
    if observed.shape != probs.shape:
        raise ValueError("histogram and expected law have different lengths")
    n = observed.sum()
    if n < 10 * probs.size:
        raise InsufficientSamplesError(f"{n:g} samples for {probs.size} codes; need at least {10 * probs.size}")
    exp_counts = n * probs
    bins = _merge_bins(exp_counts, min_bin)
    obs_b = np.array([observed[a : b + 1].sum() for a, b in bins])
    exp_b = np.array([exp_counts[a : b + 1].sum() for a, b in bins])
    dof = len(bins) - 1
    if np.any(observed[probs == 0] > 0):
        statistic = math.inf
    elif dof == 0:
        statistic = 0.0
    else:
        statistic = float(((obs_b - exp_b) ** 2 / exp_b).sum())
    critical = float(stats.chi2.ppf(1 - significance, dof)) if dof > 0 else math.inf
    reject = statistic > critical or (math.isinf(statistic) and dof == 0)
    return GofResult(statistic, dof, bool(reject), critical, bins, obs_b, exp_b)


# -- brute-force oracles -----------------------------------------------------

def coincidence_law(p: MembershipPdf, q: MembershipPdf, exact: bool = False) -> list:
    """Law of ``x`` given that independent draws ``x ~ p`` and ``x' ~ q`` coincide.

    Enumerates every code pair; with ``exact=True`` the arithmetic is done in
    fractions (masses are then converted from their float values).
    """
    num = Fraction if exact else float
    n = p.universe.size
    acc = [num(0)] * n
    total = num(0)
    for x in range(n):
        for x2 in range(n):
            w = num(p.mass[x]) * num(q.mass[x2])
            if w and x == x2:
                acc[x] += w
                total += w
    if total == 0:
        raise ValueError("no coincidences possible")
    return [a / total for a in acc]


def coincidence_histogram(
    generator: GeneratorConfig,
    p: Channel,
    q: Channel,
    size: int,
    cycles: int,
    seed: int | None = None,
) -> np.ndarray:
    """Histogram of ``x`` over cycles where the ``p`` and ``q`` channel draws coincide.

    This is the comparator on its own: both channels sample once per cycle
    from the configured generator and the sample passes only on equality.
    """
    bundle = generator.bundle(2, seed)
    hist = np.zeros(size, dtype=np.int64)
    widths = np.array([[p.bit_width, q.bit_width]])
    shifts = np.array([[p.shift, q.shift]])
    done = 0
    while done < cycles:
        b = min(BLOCK_CYCLES, cycles - done)
        draws = bundle.draw_block(widths.repeat(b, 0), shifts.repeat(b, 0))
        hit = draws[:, 0] == draws[:, 1]
        hist += np.bincount(draws[hit, 0], minlength=size)
        done += b
    return hist


def relation_tensor(rulebase: RuleBase, union_mode: str = "sum") -> np.ndarray:
    """The full relation ``R[x1, x2, y]`` aggregated over all rules."""
    A, B = rulebase.antecedent_masses()
    C = rulebase.consequent_masses()
    per_rule = np.einsum("ia,ib,iy->iaby", A, B, C)
    return per_rule.sum(axis=0) if union_mode == "sum" else per_rule.max(axis=0)


def relation_output(relation: np.ndarray, a_in: np.ndarray, b_in: np.ndarray) -> np.ndarray:
    """Unnormalized output mass for input densities, summed over all input pairs."""
    return np.einsum("a,b,aby->y", a_in, b_in, relation)


# -- surface -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SurfaceReport:
    grid: list[tuple[int, int]]
    exact: np.ndarray
    stochastic: np.ndarray
    abs_error: np.ndarray
    max_abs_error: float
    rmse: float
    skipped: list[tuple[int, int]]
    accepted: np.ndarray
    cycles: int
    analytic_rate: np.ndarray
    output_span: int = 0

    @property
    def empirical_rate(self) -> np.ndarray:
        return self.accepted / self.cycles

    def rate_z_scores(self) -> np.ndarray:
        """Binomial z-score of each point's empirical acceptance rate."""
        r = self.analytic_rate
        sd = np.sqrt(r * (1 - r) / self.cycles)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.empirical_rate - r) / sd
        return np.where(sd > 0, z, np.where(self.empirical_rate == r, 0.0, np.inf))


def surface_grid(max_code: int, step: int) -> list[int]:
    """Codes ``0, step, 2*step, ...`` plus ``max_code`` so the universe is spanned."""
    if step < 1:
        raise ValueError("grid step must be positive")
    codes = list(range(0, max_code + 1, step))
    if codes[-1] != max_code:
        codes.append(max_code)
    return codes


def _surface_point(args):
    config, xa, xb, cycles, seed = args
    ctl = Controller(config, seed)
    ctl.advance(cycles, xa, xb)
    mean = ctl.accepted_sum / ctl.accepted_count if ctl.accepted_count else math.nan
    return mean, ctl.accepted_count


def surface_compare(
    config: ControllerConfig,
    grid_step: int,
    cycles_per_point: int,
    *,
    base_seed: int | None = None,
    workers: int = 1,
) -> SurfaceReport:
    """Stochastic estimate vs exact sum-mode output on a grid of input codes.

    Points where no rule fires are reported in ``skipped``.  A point where
    rules fire but nothing was accepted in the budget gets a NaN estimate,
    which makes ``max_abs_error`` NaN as well.
    """
    rb = config.rulebase
    xs1 = surface_grid(rb.universe("a").max_code, grid_step)
    xs2 = surface_grid(rb.universe("b").max_code, grid_step)
    grid = [(a, b) for a in xs1 for b in xs2]
    base = config.generator.seed if base_seed is None else base_seed
    seeds = derived_seeds(config.generator.width, base, len(grid))

    exact = np.full(len(grid), np.nan)
    rate = np.zeros(len(grid))
    skipped = []
    jobs = []
    for idx, (a, b) in enumerate(grid):
        rate[idx] = config.acceptance_rate(a, b)
        try:
            exact[idx] = exact_output(rb, a, b, "sum")
        except NoRuleFiresError:
            skipped.append((a, b))
            continue
        jobs.append((idx, (config, a, b, cycles_per_point, seeds[idx])))

    stoch = np.full(len(grid), np.nan)
    accepted = np.zeros(len(grid), dtype=np.int64)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_surface_point, [j for _, j in jobs]))
    else:
        outs = [_surface_point(j) for _, j in jobs]
    for (idx, _), (mean, count) in zip(jobs, outs):
        stoch[idx], accepted[idx] = mean, count

    err = np.abs(stoch - exact)
    live = ~np.isnan(exact)
    max_err = float(err[live].max()) if live.any() else math.nan
    rmse = float(np.sqrt(np.mean(err[live] ** 2))) if live.any() else math.nan
    return SurfaceReport(grid, exact, stoch, err, max_err, rmse, skipped, accepted,
                         cycles_per_point, rate, config.output_span())


# -- convergence -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    checkpoints: list[tuple[float, float, float]]
    fitted_slope: float
    cycles: list[int] = field(default_factory=list)
    replicas: int = 0


def fit_loglog_slope(n: Sequence[float], stderr: Sequence[float]) -> float:
    n, stderr = np.asarray(n, float), np.asarray(stderr, float)
    if np.any(stderr <= 0) or len(n) < 2:
        return math.nan
    return float(np.polyfit(np.log(n), np.log(stderr), 1)[0])


def replica_estimates(
    config: ControllerConfig,
    xa: int | None,
    xb: int | None,
    checkpoints: Sequence[int],
    replicas: int,
    base_seed: int | None = None,
    fuzzy_inputs=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Running-mean estimates and accepted counts, shaped ``(replicas, checkpoints)``."""
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])) or checkpoints[0] <= 0:
        raise ValueError("checkpoints must be positive and strictly increasing")
    base = config.generator.seed if base_seed is None else base_seed
    seeds = derived_seeds(config.generator.width, base, replicas)
    est = np.empty((replicas, len(checkpoints)))
    counts = np.empty((replicas, len(checkpoints)), dtype=np.int64)
    for r, seed in enumerate(seeds):
        ctl = Controller(config, seed, fuzzy_inputs=fuzzy_inputs)
        done = 0
        for j, cp in enumerate(checkpoints):
            ctl.advance(cp - done, xa, xb)
            done = cp
            if ctl.accepted_count == 0:
                raise NoCoincidenceError(
                    f"replica {r} accepted nothing within {cp} cycles",
                    config.acceptance_rate(xa, xb) if fuzzy_inputs is None else math.nan,
                )
            est[r, j] = ctl.accepted_sum / ctl.accepted_count
            counts[r, j] = ctl.accepted_count
    return est, counts


def convergence_curve(
    config: ControllerConfig,
    xa: int | None,
    xb: int | None,
    checkpoints: Sequence[int],
    *,
    replicas: int = 30,
    base_seed: int | None = None,
    fuzzy_inputs=None,
) -> ConvergenceReport:
    """Cross-replica spread of the running mean at each cycle checkpoint.

    The slope of log(stderr) against log(mean accepted count) should sit
    near -1/2.  A configuration with no randomness in the accepted samples
    has zero spread and a NaN slope.
    """
    est, counts = replica_estimates(config, xa, xb, checkpoints, replicas, base_seed, fuzzy_inputs)
    n_acc = counts.mean(axis=0)
    stderr = est.std(axis=0, ddof=1)
    rows = [(float(n), float(e), float(s)) for n, e, s in zip(n_acc, est.mean(axis=0), stderr)]
    return ConvergenceReport(rows, fit_loglog_slope(n_acc, stderr), list(checkpoints), replicas)


# -- settling ----------------------------------------------------------------

def settling_time(filtered_sequence: Sequence[float], target: float, band: float) -> int | None:
    """First index after which the sequence stays within ``target +- band``.

    Returns ``None`` when the sequence is outside the band at its end.
    NaN entries (filter not yet initialized) count as outside.
    """
    if band <= 0:
        raise ValueError("band must be positive")
    seq = np.asarray(filtered_sequence, dtype=float)
    if seq.size == 0:
        return None
    with np.errstate(invalid="ignore"):
        outside = ~(np.abs(seq - target) <= band)
    if outside[-1]:
        return None
    idx = np.flatnonzero(outside)
    return int(idx[-1] + 1) if idx.size else 0


# -- CSV ---------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write(rows, header, out: str | os.PathLike | IO[str] | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def write_surface_csv(report: SurfaceReport, out=None) -> str:
    skipped = set(report.skipped)
    rows = (
        (a, b, report.exact[i], report.stochastic[i], report.abs_error[i], (a, b) in skipped)
        for i, (a, b) in enumerate(report.grid)
    )
    return _write(rows, SURFACE_HEADER, out)


def write_convergence_csv(report: ConvergenceReport, out=None) -> str:
    return _write(report.checkpoints, CONVERGENCE_HEADER, out)


def write_gof_csv(result: GofResult, out=None) -> str:
    rows = ((f"{a}-{b}" if a != b else a, o, e)
            for (a, b), o, e in zip(result.bins, result.observed, result.expected))
    return _write(rows, GOF_HEADER, out)
