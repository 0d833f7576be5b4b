"""
Exact inference with densities as membership functions
======================================================

"""

# Membership functions are probability densities on an integer universe.
from stochfuzz import RuleBase, Universe, exact_output, make_triangular_pdf

u = Universe(4)
S = make_triangular_pdf(u, left_edge=0, half_width=3)
M = make_triangular_pdf(u, left_edge=4, half_width=3)
B = make_triangular_pdf(u, left_edge=9, half_width=3)
print("S:", S.mass.round(4))

# A rule fires with the product of its antecedent memberships.
terms = {"S": S, "M": M, "B": B}
rules = [("S", "S", "S"), ("S", "B", "M"), ("B", "S", "M"), ("B", "B", "B"), ("M", "M", "M")]
rb = RuleBase(terms, terms, terms, rules)
print("fire strengths at (3, 11):", rb.fire_strengths(3, 11).round(4))

# The crisp output is the centre of gravity of the weighted consequent mixture.
for xa, xb in [(3, 3), (3, 11), (7, 7), (12, 12)]:
    print(f"output at ({xa:2d}, {xb:2d}): {exact_output(rb, xa, xb):.4f}")

# Max-union aggregation is available for comparison.
print("max union at (3, 11):", round(exact_output(rb, 3, 11, union_mode="max"), 4))
