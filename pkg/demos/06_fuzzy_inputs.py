"""
Fuzzy inputs through the same comparator
========================================

"""

# Inputs can themselves be triangles: each cycle adds two reference draws.
import numpy as np
from stochfuzz import compose_fuzzy_inputs, load_config, run_fuzzy_inputs

cfg = load_config("fuzzy_demo.json")
rb = cfg.controller.rulebase
a_ch, b_ch = cfg.fuzzy_input_channels()
a_in, b_in = a_ch.pdf(rb.universe("a")), b_ch.pdf(rb.universe("b"))

res = run_fuzzy_inputs(cfg.controller, a_in, b_in, 2_000_000)
exact = compose_fuzzy_inputs(rb, a_in, b_in)

# The accepted histogram estimates the composed output density.
emp = res.accepted_histogram / res.accepted_count
print("accepted:", res.accepted_count)
print("L1 to exact output density:", round(float(np.abs(emp - exact.mass).sum()), 4))
print("estimate", round(res.estimate_mean, 4), "vs exact", round(exact.mean(), 4))
