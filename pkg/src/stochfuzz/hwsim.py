"""Cycle-accurate simulation of the stochastic fuzzy controller datapath.

Each clock the multiplexer picks a rule, the three channels of that rule
draw ``(xa, xb, y)``, and the comparator accepts ``y`` only when both
antecedent samples equal the quantized inputs.  Accepted samples feed a
running mean (the estimator of record) and a first-order low-pass filter
standing in for the D/A converter and the analog output stage.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .core import MembershipPdf, RuleBase, defuzzify_cog
from .errors import NoCoincidenceError
from .rng import (
    DEFAULT_TAPS,
    DEFAULT_WIDTH,
    MODES,
    Channel,
    GeneratorBundle,
    channel_for_pdf,
)

SCHEDULES = ("round_robin", "uniform_random")
INPUT_MODES = ("crisp", "stochastic_fuzzy")
TRACE_HEADER = ("cycle", "rule", "xa", "xb", "y", "matched")
BLOCK_CYCLES = 1 << 16
_SCHEDULE_BUFFER = 4096


def quantize(x: float, bits: int) -> int:
    """A/D conversion of ``x`` in [0, 1] to a ``bits``-wide code, rounding half up."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"analog input {x!r} outside [0, 1]")
    return int(math.floor(x * ((1 << bits) - 1) + 0.5))


def iir_update(prev: float, sample: float, alpha: float) -> float:
    """First-order low-pass step ``prev + alpha * (sample - prev)``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha!r}")
    return prev + alpha * (sample - prev)


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str = "shared"
    width: int = DEFAULT_WIDTH
    taps: tuple[int, ...] = DEFAULT_TAPS
    seed: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"generator mode must be one of {MODES}, got {self.mode!r}")

    def bundle(self, n_slots: int, seed: int | None = None) -> GeneratorBundle:
        return GeneratorBundle(self.mode, self.width, self.taps,
                               self.seed if seed is None else seed, n_slots)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Everything that defines one controller instance.

    ``channels`` maps each variable (``"a"``, ``"b"``, ``"y"``) to a table of
    membership id -> channel.  Every membership a rule uses must have a
    channel whose exact law equals the stored density.
    """

    rulebase: RuleBase
    channels: Mapping[str, Mapping[str, Channel]]
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    quantizer_bits: int | None = None
    filter_alpha: float = 0.01
    rule_schedule: str = "round_robin"
    input_mode: str = "crisp"
    max_cycles: int = 10**8

    def __post_init__(self):
        rb = self.rulebase
        if self.quantizer_bits is None:
            object.__setattr__(self, "quantizer_bits", rb.universe("a").bits)
        for var in ("a", "b"):
            if rb.universe(var).bits != self.quantizer_bits:
                raise ValueError(
                    f"quantizer_bits={self.quantizer_bits} differs from input universe "
                    f"{var} ({rb.universe(var).bits} bits)"
                )
        if not 0.0 < self.filter_alpha <= 1.0:
            raise ValueError(f"filter_alpha must be in (0, 1], got {self.filter_alpha!r}")
        if self.rule_schedule not in SCHEDULES:
            raise ValueError(f"rule_schedule must be one of {SCHEDULES}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}")
        terms = {"a": rb.a_terms, "b": rb.b_terms, "y": rb.y_terms}
        for rule in rb.rules:
            for var in ("a", "b", "y"):
                name = getattr(rule, var)
                try:
                    channel = self.channels[var][name]
                except KeyError:
                    raise ValueError(f"no channel assigned to {var} membership {name!r}") from None
                if channel.pdf(rb.universe(var)) != terms[var][name]:
                    raise ValueError(
                        f"channel for {var} membership {name!r} does not realize its density"
                    )

    def rule_channels(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-rule channel widths and shifts, each shaped ``(m, 3)``."""
        widths = np.empty((self.rulebase.m, 3), dtype=np.int64)
        shifts = np.empty_like(widths)
        for i, rule in enumerate(self.rulebase.rules):
            for s, var in enumerate(("a", "b", "y")):
                ch = self.channels[var][getattr(rule, var)]
                widths[i, s], shifts[i, s] = ch.bit_width, ch.shift
        return widths, shifts

    def acceptance_rate(self, xa_ref: int, xb_ref: int) -> float:
        """Analytic per-cycle coincidence probability at crisp inputs."""
        return float(self.rulebase.fire_strengths(xa_ref, xb_ref).mean())

    def output_span(self) -> int:
        return self.rulebase.universe("y").max_code


@dataclass(frozen=True)
class CycleTrace:
    cycle: int
    rule_index: int
    xa: int
    xb: int
    y: int
    matched: bool


@dataclass(frozen=True, eq=False)
class RunResult:
    estimate_mean: float
    estimate_filtered: float
    accepted_count: int
    total_cycles: int
    acceptance_rate: float
    accepted_histogram: np.ndarray
    filtered_trace: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b, equal_nan=True))
        return (
            (self.estimate_mean, self.accepted_count, self.total_cycles, self.acceptance_rate)
            == (other.estimate_mean, other.accepted_count, other.total_cycles, other.acceptance_rate)
            and same(np.float64(self.estimate_filtered), np.float64(other.estimate_filtered))
            and same(self.accepted_histogram, other.accepted_histogram)
            and same(self.filtered_trace, other.filtered_trace)
        )


class Controller:
    """Mutable controller state: generators, rule scheduler and output stage.

    ``fuzzy_inputs`` (a pair of channels) switches the comparator references
    from fixed codes to per-cycle draws, realizing fuzzy inputs.
    """

    def __init__(
        self,
        config: ControllerConfig,
        seed: int | None = None,
        fuzzy_inputs: tuple[Channel, Channel] | None = None,
    ):
        self.config = config
        self.seed = config.generator.seed if seed is None else seed
        self.fuzzy_inputs = fuzzy_inputs
        n_slots = 3 if fuzzy_inputs is None else 5
        self.bundle = config.generator.bundle(n_slots, self.seed)
        self._widths, self._shifts = config.rule_channels()
        if fuzzy_inputs is not None:
            extra_w = np.array([[ch.bit_width for ch in fuzzy_inputs]])
            extra_s = np.array([[ch.shift for ch in fuzzy_inputs]])
            self._widths = np.hstack([self._widths, extra_w.repeat(config.rulebase.m, 0)])
            self._shifts = np.hstack([self._shifts, extra_s.repeat(config.rulebase.m, 0)])
        self._rule_rng = np.random.default_rng(self.seed)
        self._schedule = np.empty(0, dtype=np.int64)
        self.cycle = 0
        self.accepted_count = 0
        self.accepted_sum = 0
        self.histogram = np.zeros(config.rulebase.universe("y").size, dtype=np.int64)
        self.filtered = math.nan

    def _rules(self, n: int) -> np.ndarray:
        m = self.config.rulebase.m
        if self.config.rule_schedule == "round_robin":
            return (self.cycle + np.arange(n)) % m
        while self._schedule.size < n:
            fresh = self._rule_rng.integers(0, m, size=_SCHEDULE_BUFFER)
            self._schedule = np.concatenate([self._schedule, fresh])
        rules, self._schedule = self._schedule[:n], self._schedule[n:]
        return rules

    def _accept(self, ys: np.ndarray, record: bool = False) -> np.ndarray | None:
        """Push accepted samples through the output stage, in order."""
        alpha = self.config.filter_alpha
        self.accepted_count += ys.size
        self.accepted_sum += int(ys.sum())
        np.add.at(self.histogram, ys, 1)
        out = np.empty(ys.size) if record else None
        f = self.filtered
        for j, y in enumerate(ys.tolist()):
            f = float(y) if math.isnan(f) else iir_update(f, y, alpha)
            if record:
                out[j] = f
        self.filtered = f
        return out

    def step(self, xa_ref: int | None = None, xb_ref: int | None = None) -> CycleTrace:
        """One clock, drawing bits one at a time from the registers."""
        i = int(self._rules(1)[0])
        channels = [
            self.config.channels[var][getattr(self.config.rulebase.rules[i], var)]
            for var in ("a", "b", "y")
        ]
        if self.fuzzy_inputs is not None:
            channels += list(self.fuzzy_inputs)
        draws = self.bundle.draw(channels)
        xa, xb, y = draws[:3]
        if self.fuzzy_inputs is not None:
            xa_ref, xb_ref = draws[3:]
        matched = xa == xa_ref and xb == xb_ref
        if matched:
            self._accept(np.array([y]))
        trace = CycleTrace(self.cycle, i, xa, xb, y, matched)
        self.cycle += 1
        return trace

    def advance(
        self,
        n: int,
        xa_ref: int | None = None,
        xb_ref: int | None = None,
        trace: "csv._writer | None" = None,
        record_filtered: bool = False,
    ) -> np.ndarray | None:
        """Run ``n`` clocks in vectorized blocks; same result as ``n`` steps."""
        held = []
        carry = self.filtered
        done = 0
        while done < n:
            b = min(BLOCK_CYCLES, n - done)
            rules = self._rules(b)
            draws = self.bundle.draw_block(self._widths[rules], self._shifts[rules])
            if self.fuzzy_inputs is None:
                matched = (draws[:, 0] == xa_ref) & (draws[:, 1] == xb_ref)
            else:
                matched = (draws[:, 0] == draws[:, 3]) & (draws[:, 1] == draws[:, 4])
            filt = self._accept(draws[matched, 2], record=record_filtered)
            if record_filtered:
                # the switch holds the filter output between acceptances
                pos = np.where(matched, np.arange(b), -1)
                np.maximum.accumulate(pos, out=pos)
                block = np.full(b, carry)
                block[pos >= 0] = filt[np.cumsum(matched)[pos >= 0] - 1]
                carry = block[-1]
                held.append(block)
            if trace is not None:
                cycles = self.cycle + np.arange(b)
                rows = np.column_stack([cycles, rules, draws[:, :3], matched.astype(np.int64)])
                trace.writerows(rows.tolist())
            self.cycle += b
            done += b
        if not record_filtered:
            return None
        return np.concatenate(held) if held else np.empty(0)

    def result(self, filtered_trace: np.ndarray | None = None) -> RunResult:
        total = self.cycle
        mean = self.accepted_sum / self.accepted_count if self.accepted_count else math.nan
        return RunResult(
            estimate_mean=mean,
            estimate_filtered=self.filtered,
            accepted_count=self.accepted_count,
            total_cycles=total,
            acceptance_rate=self.accepted_count / total if total else 0.0,
            accepted_histogram=self.histogram.copy(),
            filtered_trace=filtered_trace,
        )


def run_cycle(state: Controller, xa_ref: int, xb_ref: int) -> CycleTrace:
    return state.step(xa_ref, xb_ref)


def _open_trace(trace: IO[str] | None):
    if trace is None:
        return None
    writer = csv.writer(trace, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    return writer


def run(
    config: ControllerConfig,
    xa_ref: int,
    xb_ref: int,
    cycles: int,
    *,
    seed: int | None = None,
    trace: IO[str] | None = None,
    record_filtered: bool = False,
) -> RunResult:
    """Simulate ``cycles`` clocks at crisp input codes.

    ``trace``, when given, receives one CSV row per cycle.  Raises
    :class:`NoCoincidenceError` if no sample was accepted.
    """
    if config.input_mode != "crisp":
        raise ValueError("run() needs input_mode='crisp'; use run_fuzzy_inputs()")
    if not 0 <= cycles <= config.max_cycles:
        raise ValueError(f"cycles must be in 0..{config.max_cycles}, got {cycles}")
    config.rulebase.universe("a").check_code(xa_ref, "xa_ref")
    config.rulebase.universe("b").check_code(xb_ref, "xb_ref")
    ctl = Controller(config, seed)
    held = ctl.advance(cycles, xa_ref, xb_ref, _open_trace(trace), record_filtered)
    if ctl.accepted_count == 0:
        rate = config.acceptance_rate(xa_ref, xb_ref)
        raise NoCoincidenceError(
            f"no coincidence in {cycles} cycles at (xa={xa_ref}, xb={xb_ref}); "
            f"analytic acceptance rate {rate:.3g}",
            rate,
        )
    return ctl.result(held)


def run_fuzzy_inputs(
    config: ControllerConfig,
    a_in: MembershipPdf,
    b_in: MembershipPdf,
    cycles: int,
    *,
    seed: int | None = None,
    trace: IO[str] | None = None,
    record_filtered: bool = False,
) -> RunResult:
    """Simulate with comparator references drawn from fuzzy input densities."""
    if config.input_mode != "stochastic_fuzzy":
        raise ValueError("run_fuzzy_inputs() needs input_mode='stochastic_fuzzy'")
    if not 0 <= cycles <= config.max_cycles:
        raise ValueError(f"cycles must be in 0..{config.max_cycles}, got {cycles}")
    rb = config.rulebase
    if a_in.universe != rb.universe("a") or b_in.universe != rb.universe("b"):
        raise ValueError("fuzzy inputs must live on the input universes")
    channels = (channel_for_pdf(a_in, "a_in"), channel_for_pdf(b_in, "b_in"))
    ctl = Controller(config, seed, fuzzy_inputs=channels)
    held = ctl.advance(cycles, trace=_open_trace(trace), record_filtered=record_filtered)
    if ctl.accepted_count == 0:
        A, B = rb.antecedent_masses()
        rate = float(((A @ a_in.mass) * (B @ b_in.mass)).mean())
        raise NoCoincidenceError(
            f"no coincidence in {cycles} cycles; analytic acceptance rate {rate:.3g}", rate
        )
    return ctl.result(held)


def histogram_centroid(result: RunResult) -> float:
    return defuzzify_cog(result.accepted_histogram)
