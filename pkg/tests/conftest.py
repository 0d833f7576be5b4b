import itertools

import numpy as np
import pytest

from stochfuzz.config import load_config
from stochfuzz.core import RuleBase, Universe, make_point_pdf, make_triangular_pdf
from stochfuzz.hwsim import ControllerConfig, GeneratorConfig
from stochfuzz.rng import SingletonChannel, TriangularChannel

WIDE = GeneratorConfig(width=32, taps=(32, 22, 2, 1), seed=1)


def brute_triangle(k):
    """Law of u1 + u2 by enumerating every pair of k-bit words."""
    n = 1 << k
    counts = np.zeros(2 * n - 1)
    for u1, u2 in itertools.product(range(n), repeat=2):
        counts[u1 + u2] += 1
    return counts / n**2


def controller(terms, rules, bits=4, generator=WIDE, **kw):
    """Build a ControllerConfig from ``{var: {name: channel}}``."""
    universe = Universe(bits)
    pdfs = {v: {n: ch.pdf(universe) for n, ch in t.items()} for v, t in terms.items()}
    rb = RuleBase(pdfs["a"], pdfs["b"], pdfs["y"], tuple(rules))
    return ControllerConfig(rb, terms, generator, **kw)


@pytest.fixture(scope="session")
def cfg3x3():
    return load_config("rulebase3x3.json").controller


@pytest.fixture(scope="session")
def cfg_single_rule():
    return load_config("eq7.json")


@pytest.fixture
def point_config():
    """Single rule with point-mass antecedents at (5, 9) and a k=2 consequent."""
    terms = {
        "a": {"P": SingletonChannel(5, "P")},
        "b": {"P": SingletonChannel(9, "P")},
        "y": {"T": TriangularChannel(2, 3, "T")},
    }
    return controller(terms, [("P", "P", "T")])


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
