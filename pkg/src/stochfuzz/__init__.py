"""Stochastic-logic fuzzy controller: exact engine, LFSR sampling, cycle simulator."""

from .core import (
    MembershipPdf,
    Rule,
    RuleBase,
    Universe,
    compose_fuzzy_inputs,
    defuzzify_cog,
    exact_output,
    fire_strength,
    make_point_pdf,
    make_triangular_pdf,
    product_pdf,
)
from .config import ExperimentConfig, load_config
from .hwsim import Controller, ControllerConfig, GeneratorConfig, RunResult, quantize, run, run_fuzzy_inputs
from .rng import GeneratorBundle, Lfsr, SingletonChannel, TriangularChannel

__version__ = "0.1.0"

__all__ = [
    "Controller",
    "ControllerConfig",
    "ExperimentConfig",
    "GeneratorBundle",
    "GeneratorConfig",
    "Lfsr",
    "MembershipPdf",
    "Rule",
    "RuleBase",
    "RunResult",
    "SingletonChannel",
    "TriangularChannel",
    "Universe",
    "compose_fuzzy_inputs",
    "defuzzify_cog",
    "exact_output",
    "fire_strength",
    "load_config",
    "make_point_pdf",
    "make_triangular_pdf",
    "product_pdf",
    "quantize",
    "run",
    "run_fuzzy_inputs",
]
