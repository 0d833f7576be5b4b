"""Bit-exact model of the pseudo-random source of the controller.

A Fibonacci LFSR produces one bit per step.  Words are formed from ``k``
consecutive output bits, most significant first, and a triangular channel
adds two consecutive words plus a constant shift.

Tap numbering: stage 1 receives the feedback bit, stage ``width`` is the
output stage, and tap ``t`` feeds stage ``t`` into the feedback XOR.  With
that numbering the usual tables of maximal polynomials apply directly,
e.g. ``(16, 14, 13, 11)``, ``(8, 6, 5, 4)`` and ``(3, 2)``.

For maximal-length registers of moderate width the whole output period is
tabulated once, so bulk word extraction is an array gather that returns the
same values stepping would.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import MembershipPdf, Universe, make_triangular_pdf
from .errors import InvalidTapsError, SupportOverflowError, ZeroSeedError

DEFAULT_WIDTH = 16
DEFAULT_TAPS = (16, 14, 13, 11)
MAX_TABLE_WIDTH = 20
MODES = ("shared", "independent")


def _tap_mask(width: int, taps: Sequence[int]) -> int:
    taps = tuple(int(t) for t in taps)
    if not taps:
        raise InvalidTapsError("tap set is empty")
    if any(not 1 <= t <= width for t in taps):
        raise InvalidTapsError(f"taps {taps} must lie in 1..{width}")
    if len(set(taps)) != len(taps):
        raise InvalidTapsError(f"taps {taps} contain duplicates")
    if width not in taps:
        # without the output stage in the feedback the update is not invertible
        raise InvalidTapsError(f"taps {taps} must include the output stage {width}")
    mask = 0
    for t in taps:
        mask |= 1 << (t - 1)
    return mask


class _PeriodTable:
    """One full output period of a maximal register, started from state 1."""

    def __init__(self, width: int, taps: tuple[int, ...]):
        mask = _tap_mask(width, taps)
        period = (1 << width) - 1
        bits = np.empty(period, dtype=np.uint8)
        states = np.empty(period, dtype=np.int64)
        full = (1 << width) - 1
        top = width - 1
        s = 1
        for n in range(period):
            states[n] = s
            bits[n] = (s >> top) & 1
            s = ((s << 1) & full) | ((s & mask).bit_count() & 1)
            if s == 1 and n < period - 1:
                raise InvalidTapsError(f"taps {taps} are not maximal for width {width}")
        if s != 1:
            raise InvalidTapsError(f"taps {taps} are not maximal for width {width}")
        self.width = width
        self.period = period
        self.bits = bits
        self.states = states
        self.position = np.zeros(1 << width, dtype=np.int64)
        self.position[states] = np.arange(period)
        self._words: dict[int, np.ndarray] = {}

    def words(self, k: int) -> np.ndarray:
        """``table[p]`` is the k-bit MSB-first word starting at period position ``p``."""
        if k not in self._words:
            idx = np.arange(self.period)
            word = np.zeros(self.period, dtype=np.int64)
            for j in range(k):
                word = (word << 1) | self.bits[(idx + j) % self.period]
            self._words[k] = word
        return self._words[k]


def output_bits(width: int, taps: Sequence[int], state: int, n: int) -> np.ndarray:
    """The next ``n + width`` output bits of a register in ``state``.

    Stage ``t`` holds the bit that leaves the register ``width - t`` steps
    later, so the state supplies the first ``width`` bits and the rest obey
    ``s[m] = XOR_t s[m - t]``.  Squaring the feedback polynomial over GF(2)
    spreads its exponents, ``s[m] = XOR_t s[m - t * 2**j]``, which lets each
    numpy pass fill ``min(taps) * 2**j`` new bits at once.
    """
    taps = tuple(int(t) for t in taps)
    total = n + width
    s = np.empty(max(total, width), dtype=np.uint8)
    for i in range(width):
        s[i] = (state >> (width - 1 - i)) & 1
    t_min = min(taps)
    filled = width
    while filled < total:
        scale = 1
        while width * scale * 2 <= filled:
            scale *= 2
        end = min(total, filled + t_min * scale)
        chunk = np.zeros(end - filled, dtype=np.uint8)
        for t in taps:
            lag = t * scale
            chunk ^= s[filled - lag : end - lag]
        s[filled:end] = chunk
        filled = end
    return s[:total]


def _state_from_bits(bits: np.ndarray, width: int) -> int:
    state = 0
    for b in bits[:width]:
        state = (state << 1) | int(b)
    return state


@lru_cache(maxsize=None)
def _period_table(width: int, taps: tuple[int, ...]) -> _PeriodTable | None:
    if width > MAX_TABLE_WIDTH:
        return None
    try:
        return _PeriodTable(width, taps)
    except InvalidTapsError:
        return None


class Lfsr:
    """Fibonacci linear-feedback shift register.

    The register is a mutable state machine; share it between threads only
    with external locking.
    """

    def __init__(self, width: int, taps: Sequence[int], seed: int):
        if not 2 <= width <= 64:
            raise ValueError(f"width must be in 2..64, got {width}")
        self.width = int(width)
        self.taps = tuple(sorted((int(t) for t in taps), reverse=True))
        self._mask = _tap_mask(self.width, self.taps)
        self._full = (1 << self.width) - 1
        if seed == 0:
            raise ZeroSeedError("seed 0 is the all-zero lockup state")
        if not 0 < seed <= self._full:
            raise ValueError(f"seed must be in 1..{self._full}, got {seed}")
        self.state = int(seed)

    def __repr__(self):
        return f"Lfsr(width={self.width}, taps={self.taps}, state={self.state:#x})"

    @property
    def period_table(self) -> _PeriodTable | None:
        return _period_table(self.width, self.taps)

    def step(self) -> int:
        """Advance one clock; return the bit shifted out of the output stage."""
        s = self.state
        out = (s >> (self.width - 1)) & 1
        self.state = ((s << 1) & self._full) | ((s & self._mask).bit_count() & 1)
        return out

    def word(self, k: int) -> int:
        if not 0 <= k <= self.width:
            raise ValueError(f"word width must be in 0..{self.width}, got {k}")
        value = 0
        for _ in range(k):
            value = (value << 1) | self.step()
        return value

    def advance(self, steps: int) -> None:
        table = self.period_table
        if table is None:
            bits = output_bits(self.width, self.taps, self.state, steps)
            self.state = _state_from_bits(bits[steps:], self.width)
        else:
            pos = table.position[self.state]
            self.state = int(table.states[(pos + steps) % table.period])

    def take_words(self, ks: np.ndarray) -> np.ndarray:
        """Extract consecutive words of widths ``ks`` in one call.

        Equivalent to ``[self.word(k) for k in ks]``; width-0 entries yield 0
        and consume no steps.
        """
        ks = np.asarray(ks, dtype=np.int64)
        if ks.size and (ks.min() < 0 or ks.max() > self.width):
            raise ValueError(f"word widths must be in 0..{self.width}")
        table = self.period_table
        ends = np.cumsum(ks)
        total = int(ends[-1]) if ks.size else 0
        if table is None:
            bits = output_bits(self.width, self.taps, self.state, total)
            out = np.zeros(ks.size, dtype=np.int64)
            starts = ends - ks
            for j in range(int(ks.max(initial=0))):
                live = ks > j
                out[live] = (out[live] << 1) | bits[starts[live] + j]
            self.state = _state_from_bits(bits[total:], self.width)
            return out
        pos0 = int(table.position[self.state])
        starts = (pos0 + ends - ks) % table.period
        out = np.zeros(ks.size, dtype=np.int64)
        for k in np.unique(ks):
            if k == 0:
                continue
            sel = ks == k
            out[sel] = table.words(int(k))[starts[sel]]
        self.state = int(table.states[(pos0 + total) % table.period])
        return out


def lfsr_seed(width: int = DEFAULT_WIDTH, taps: Sequence[int] = DEFAULT_TAPS, seed: int = 1) -> Lfsr:
    return Lfsr(width, taps, seed)


def lfsr_word(lfsr: Lfsr, k: int) -> int:
    """Advance ``lfsr`` by ``k`` steps and return the bits as an MSB-first word."""
    if not 1 <= k <= lfsr.width:
        raise ValueError(f"k must be in 1..{lfsr.width}, got {k}")
    return lfsr.word(k)


def lfsr_period(width: int, taps: Sequence[int], seed: int = 1, limit: int | None = None) -> int:
    """Count steps until the register returns to ``seed`` (brute force)."""
    reg = Lfsr(width, taps, seed)
    limit = (1 << width) if limit is None else limit
    for n in range(1, limit + 1):
        reg.step()
        if reg.state == seed:
            return n
    raise RuntimeError(f"register did not return to its seed within {limit} steps")


def _gf2_mulmod(a: int, b: int, mod: int, degree: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if (a >> degree) & 1:
            a ^= mod
    return out


def _gf2_powmod(base: int, exp: int, mod: int, degree: int) -> int:
    out = 1
    while exp:
        if exp & 1:
            out = _gf2_mulmod(out, base, mod, degree)
        base = _gf2_mulmod(base, base, mod, degree)
        exp >>= 1
    return out


def feedback_polynomial(width: int, taps: Sequence[int]) -> int:
    """Characteristic polynomial of the output sequence as a GF(2) bitmask.

    ``s[m] = XOR_t s[m - t]`` gives ``x**width + sum_t x**(width - t)``.
    """
    _tap_mask(width, taps)
    poly = 1 << width
    for t in taps:
        poly ^= 1 << (width - t)
    return poly


def is_maximal(width: int, taps: Sequence[int]) -> bool:
    """True when the register cycles through all ``2**width - 1`` nonzero states.

    Algebraic test: ``x`` must have multiplicative order exactly
    ``2**width - 1`` modulo the feedback polynomial.
    """
    from sympy import factorint

    poly = feedback_polynomial(width, taps)
    order = (1 << width) - 1
    x = 0b10
    if _gf2_powmod(x, order, poly, width) != 1:
        return False
    return all(_gf2_powmod(x, order // q, poly, width) != 1 for q in factorint(order))


@dataclass(frozen=True)
class TriangularChannel:
    """Adder/delay pair: ``shift + u1 + u2`` with ``u1, u2`` k-bit words."""

    bit_width: int
    shift: int
    label: str = ""

    def __post_init__(self):
        if self.bit_width < 1:
            raise ValueError("triangular channels need bit_width >= 1; use SingletonChannel for a constant")
        if self.shift < 0:
            raise SupportOverflowError(f"channel {self.label!r}: negative shift {self.shift}")

    @property
    def half_width(self) -> int:
        return (1 << self.bit_width) - 1

    @property
    def high(self) -> int:
        return self.shift + 2 * self.half_width

    def check_universe(self, universe: Universe) -> None:
        if self.high > universe.max_code:
            raise SupportOverflowError(
                f"channel {self.label!r}: support {self.shift}..{self.high} "
                f"exceeds max code {universe.max_code}"
            )

    def pdf(self, universe: Universe) -> MembershipPdf:
        self.check_universe(universe)
        return make_triangular_pdf(universe, self.shift, self.half_width)


@dataclass(frozen=True)
class SingletonChannel:
    """Constant code; realizes a point-mass membership without drawing bits."""

    shift: int
    label: str = ""
    bit_width = 0

    @property
    def half_width(self) -> int:
        return 0

    @property
    def high(self) -> int:
        return self.shift

    def check_universe(self, universe: Universe) -> None:
        if not 0 <= self.shift <= universe.max_code:
            raise SupportOverflowError(
                f"channel {self.label!r}: code {self.shift} outside 0..{universe.max_code}"
            )

    def pdf(self, universe: Universe) -> MembershipPdf:
        self.check_universe(universe)
        return make_triangular_pdf(universe, self.shift, 0)


Channel = TriangularChannel | SingletonChannel


def channel_for_pdf(pdf: MembershipPdf, label: str = "") -> Channel:
    """Find the channel whose exact law is ``pdf``; ValueError if none exists."""
    lo, hi = pdf.support
    if lo == hi:
        return SingletonChannel(lo, label)
    width = hi - lo
    half = width // 2
    if width % 2 == 0 and (half + 1) & half == 0:
        channel = TriangularChannel(half.bit_length(), lo, label)
        if np.allclose(channel.pdf(pdf.universe).mass, pdf.mass, rtol=0, atol=1e-12):
            return channel
    raise ValueError("density is neither a point mass nor a shifted dyadic triangle")


def triangular_sample(lfsr: Lfsr, channel: Channel) -> int:
    """One channel sample; the first word is held while the second is shifted out."""
    u1 = lfsr.word(channel.bit_width)
    u2 = lfsr.word(channel.bit_width)
    sample = channel.shift + u1 + u2
    assert channel.shift <= sample <= channel.high
    return sample


def triangular_samples(lfsr: Lfsr, channel: Channel, n: int) -> np.ndarray:
    """``n`` successive :func:`triangular_sample` draws, vectorized."""
    words = lfsr.take_words(np.full(2 * n, channel.bit_width)).reshape(n, 2)
    return channel.shift + words.sum(axis=1)


def derived_seeds(width: int, seed: int, count: int) -> list[int]:
    """``count`` distinct nonzero register states, the first being ``seed``.

    The others are hashed from ``(seed, j)``.  Evenly spaced starting points
    are avoided on purpose: at a spacing of a third of the period the three
    streams satisfy ``s[n] ^ s[n + P/3] ^ s[n + 2P/3] == 0``.
    """
    full = (1 << width) - 1
    seeds = [int(seed)]
    j = 0
    while len(seeds) < count:
        j += 1
        state = np.random.SeedSequence([int(seed), j]).generate_state(2, np.uint32)
        candidate = (int(state[0]) << 32 | int(state[1])) % full + 1
        if candidate not in seeds:
            seeds.append(candidate)
    return seeds


class GeneratorBundle:
    """The random sources feeding the channels of one controller.

    ``shared`` mode runs every channel from one register, serially: within a
    cycle the slots draw their two words in slot order.  ``independent`` mode
    gives each slot its own register, seeded from :func:`derived_seeds`.
    """

    def __init__(
        self,
        mode: str = "shared",
        width: int = DEFAULT_WIDTH,
        taps: Sequence[int] = DEFAULT_TAPS,
        seed: int = 1,
        n_slots: int = 3,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.n_slots = n_slots
        if mode == "shared":
            self.lfsrs = [Lfsr(width, taps, seed)]
        else:
            self.lfsrs = [Lfsr(width, taps, s) for s in derived_seeds(width, seed, n_slots)]

    def draw(self, channels: Sequence[Channel]) -> tuple[int, ...]:
        """One sample per slot, stepping the registers bit by bit."""
        if len(channels) != self.n_slots:
            raise ValueError(f"expected {self.n_slots} channels, got {len(channels)}")
        if self.mode == "shared":
            return tuple(triangular_sample(self.lfsrs[0], ch) for ch in channels)
        return tuple(triangular_sample(reg, ch) for reg, ch in zip(self.lfsrs, channels))

    def draw_block(self, widths: np.ndarray, shifts: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`draw` for many cycles.

        ``widths`` and ``shifts`` have shape ``(n_cycles, n_slots)`` and
        describe the channel each slot uses in each cycle.  Returns samples of
        the same shape, identical to calling :meth:`draw` cycle by cycle.
        """
        widths = np.asarray(widths, dtype=np.int64)
        n = widths.shape[0]
        doubled = np.repeat(widths, 2, axis=1)
        if self.mode == "shared":
            words = self.lfsrs[0].take_words(doubled.ravel()).reshape(n, self.n_slots, 2)
        else:
            words = np.stack(
                [reg.take_words(doubled[:, 2 * s : 2 * s + 2].ravel()).reshape(n, 2)
                 for s, reg in enumerate(self.lfsrs)],
                axis=1,
            )
        return np.asarray(shifts, dtype=np.int64) + words.sum(axis=2)


def draw_cycle_samples(gen: GeneratorBundle, channels: Sequence[Channel]) -> tuple[int, ...]:
    """Samples ``(xa, xb, y)`` (plus any extra slots) for one controller cycle."""
    return gen.draw(channels)
