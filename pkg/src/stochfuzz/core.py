"""Exact discrete-density fuzzy inference.

Membership functions are stored as probability mass functions over an
integer code universe.  Rule evaluation uses the Larsen product, rule
aggregation is either a weighted mixture (``"sum"``, what the stochastic
hardware computes) or a pointwise maximum (``"max"``, kept for comparison),
and defuzzification is the centre of gravity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DisjointSupportError,
    NoRuleFiresError,
    SupportOverflowError,
    ZeroMassError,
)

UNION_MODES = ("sum", "max")
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class Universe:
    """Integer code range ``0 .. 2**bits - 1``."""

    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 2 <= self.bits <= 16:
            raise ValueError(f"universe bits must be an integer in [2, 16], got {self.bits!r}")

    @property
    def size(self) -> int:
        return 1 << self.bits

    @property
    def max_code(self) -> int:
        return self.size - 1

    @property
    def codes(self) -> np.ndarray:
        return np.arange(self.size)

    def check_code(self, code: int, name: str = "code") -> int:
        if not 0 <= code <= self.max_code:
            raise ValueError(f"{name}={code} outside universe 0..{self.max_code}")
        return int(code)


@dataclass(frozen=True, eq=False)
class MembershipPdf:
    """A membership function normalized to a probability mass function."""

    universe: Universe
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.shape != (self.universe.size,):
            raise ValueError(
                f"mass has shape {mass.shape}, universe needs ({self.universe.size},)"
            )
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("mass entries must be finite and non-negative")
        total = mass.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"mass sums to {total!r}, expected 1")
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)

    def __eq__(self, other):
        if not isinstance(other, MembershipPdf):
            return NotImplemented
        return self.universe == other.universe and np.array_equal(self.mass, other.mass)

    def __hash__(self):
        return hash((self.universe, self.mass.tobytes()))

    def __call__(self, code: int) -> float:
        return float(self.mass[code])

    @property
    def support(self) -> tuple[int, int]:
        """First and last code with non-zero mass."""
        nz = np.flatnonzero(self.mass)
        return int(nz[0]), int(nz[-1])

    def mean(self) -> float:
        return defuzzify_cog(self.mass)


def make_triangular_pdf(universe: Universe, left_edge: int, half_width: int) -> MembershipPdf:
    """Exact law of ``left_edge + u1 + u2`` with ``u1, u2`` uniform on ``0..half_width``.

    ``half_width`` must be ``2**k - 1``; ``half_width = 0`` gives a point mass.
    The support is never clipped: a triangle that does not fit raises
    :class:`SupportOverflowError`.
    """
    if half_width < 0 or (half_width + 1) & half_width:
        raise ValueError(f"half_width must be 2**k - 1, got {half_width}")
    if left_edge < 0:
        raise SupportOverflowError(f"left edge {left_edge} is below code 0")
    right = left_edge + 2 * half_width
    if right > universe.max_code:
        raise SupportOverflowError(
            f"triangle support {left_edge}..{right} exceeds max code {universe.max_code}"
        )
    n = half_width + 1
    j = np.arange(2 * half_width + 1)
    mass = np.zeros(universe.size)
    mass[left_edge : right + 1] = (n - np.abs(j - half_width)) / float(n * n)
    return MembershipPdf(universe, mass)


def make_point_pdf(universe: Universe, code: int) -> MembershipPdf:
    return make_triangular_pdf(universe, code, 0)


@dataclass(frozen=True)
class Rule:
    """``if x1 is a and x2 is b then y is y``, terms named by membership id."""

    a: str
    b: str
    y: str


@dataclass(frozen=True, eq=False)
class RuleBase:
    """Membership tables for the two inputs and the output, plus ordered rules."""

    a_terms: Mapping[str, MembershipPdf]
    b_terms: Mapping[str, MembershipPdf]
    y_terms: Mapping[str, MembershipPdf]
    rules: tuple[Rule, ...]
    _stack: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(Rule(*r) if not isinstance(r, Rule) else r for r in self.rules))
        if not self.rules:
            raise ValueError("a rule base needs at least one rule")
        for var, terms in (("a", self.a_terms), ("b", self.b_terms), ("y", self.y_terms)):
            if not terms:
                raise ValueError(f"variable {var!r} has no membership functions")
            universes = {pdf.universe for pdf in terms.values()}
            if len(universes) != 1:
                raise ValueError(f"memberships of variable {var!r} span several universes")
        for i, rule in enumerate(self.rules):
            for var, terms in (("a", self.a_terms), ("b", self.b_terms), ("y", self.y_terms)):
                name = getattr(rule, var)
                if name not in terms:
                    raise ValueError(f"rule {i} references unknown {var} membership {name!r}")
        stack = {
            var: np.stack([terms[getattr(r, var)].mass for r in self.rules])
            for var, terms in (("a", self.a_terms), ("b", self.b_terms), ("y", self.y_terms))
        }
        object.__setattr__(self, "_stack", stack)

    @property
    def m(self) -> int:
        return len(self.rules)

    def universe(self, var: str) -> Universe:
        terms = {"a": self.a_terms, "b": self.b_terms, "y": self.y_terms}[var]
        return next(iter(terms.values())).universe

    def antecedent_masses(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-rule antecedent mass rows, shape ``(m, |U|)`` each."""
        return self._stack["a"], self._stack["b"]

    def consequent_masses(self) -> np.ndarray:
        return self._stack["y"]

    def fire_strengths(self, x1: int, x2: int) -> np.ndarray:
        self.universe("a").check_code(x1, "x1")
        self.universe("b").check_code(x2, "x2")
        return self._stack["a"][:, x1] * self._stack["b"][:, x2]


def fire_strength(rulebase: RuleBase, rule_index: int, x1: int, x2: int) -> float:
    """Larsen firing weight of one rule at crisp input codes."""
    if not 0 <= rule_index < rulebase.m:
        raise IndexError(f"rule index {rule_index} out of range for {rulebase.m} rules")
    rule = rulebase.rules[rule_index]
    rulebase.universe("a").check_code(x1, "x1")
    rulebase.universe("b").check_code(x2, "x2")
    return rulebase.a_terms[rule.a](x1) * rulebase.b_terms[rule.b](x2)


def product_pdf(p: MembershipPdf, q: MembershipPdf) -> tuple[np.ndarray, float]:
    """Pointwise product of two densities and its total mass.

    The normalized product is the law of a sample accepted only when two
    independent draws from ``p`` and ``q`` coincide.  Raises
    :class:`DisjointSupportError` when the supports do not meet; the
    unnormalized product is attached to the exception as ``product``.
    """
    if p.universe != q.universe:
        raise ValueError("densities live on different universes")
    prod = p.mass * q.mass
    normalizer = float(prod.sum())
    if normalizer == 0.0:
        err = DisjointSupportError("densities have disjoint supports")
        err.product = prod
        raise err
    return prod, normalizer


def defuzzify_cog(mass: Sequence[float] | np.ndarray) -> float:
    """Centre of gravity of a non-negative mass vector indexed by code."""
    mass = np.asarray(mass, dtype=float)
    total = mass.sum()
    if total <= 0:
        raise ZeroMassError("cannot defuzzify a mass vector with zero total")
    return float(np.dot(np.arange(mass.size), mass) / total)


def _check_mode(union_mode: str) -> None:
    if union_mode not in UNION_MODES:
        raise ValueError(f"union_mode must be one of {UNION_MODES}, got {union_mode!r}")


def aggregate_output(rulebase: RuleBase, x1: int, x2: int, union_mode: str = "sum") -> np.ndarray:
    """Unnormalized aggregated output mass at crisp inputs."""
    _check_mode(union_mode)
    w = rulebase.fire_strengths(x1, x2)
    if not np.any(w > 0):
        raise NoRuleFiresError(f"no rule fires at (x1={x1}, x2={x2})")
    scaled = w[:, None] * rulebase.consequent_masses()
    return scaled.sum(axis=0) if union_mode == "sum" else scaled.max(axis=0)


def exact_output(rulebase: RuleBase, x1: int, x2: int, union_mode: str = "sum") -> float:
    """Crisp controller output for crisp input codes."""
    return defuzzify_cog(aggregate_output(rulebase, x1, x2, union_mode))


def compose_fuzzy_inputs(
    rulebase: RuleBase,
    a_in: MembershipPdf,
    b_in: MembershipPdf,
    union_mode: str = "sum",
) -> MembershipPdf:
    """Output density for fuzzy inputs, normalized.

    In sum mode the triple sum over ``(x1, x2, y)`` factors per rule into
    ``<a_in, A_i> <b_in, B_i> C_i``.  Max mode aggregates inside the sum, so
    it is evaluated over every input pair.
    """
    _check_mode(union_mode)
    if a_in.universe != rulebase.universe("a") or b_in.universe != rulebase.universe("b"):
        raise ValueError("fuzzy inputs must live on the rule base input universes")
    A, B = rulebase.antecedent_masses()
    C = rulebase.consequent_masses()
    if union_mode == "sum":
        weights = (A @ a_in.mass) * (B @ b_in.mass)
        out = weights @ C
    else:
        out = np.zeros(C.shape[1])
        xs1 = np.flatnonzero(a_in.mass)
        xs2 = np.flatnonzero(b_in.mass)
        for x1 in xs1:
            for x2 in xs2:
                w = A[:, x1] * B[:, x2]
                if np.any(w > 0):
                    out += a_in.mass[x1] * b_in.mass[x2] * (w[:, None] * C).max(axis=0)
    total = out.sum()
    if total <= 0:
        raise DisjointSupportError("fuzzy inputs do not overlap any rule antecedent")
    return MembershipPdf(rulebase.universe("y"), out / total)
