"""
Sampling a product of densities by coincidence
==============================================

"""

# Draw from two triangles each cycle and keep a draw only when both agree.
import numpy as np
from stochfuzz.analysis import coincidence_histogram
from stochfuzz.core import Universe, product_pdf
from stochfuzz.hwsim import GeneratorConfig
from stochfuzz.rng import TriangularChannel

u = Universe(4)
p, q = TriangularChannel(2, 0), TriangularChannel(2, 2)
hist = coincidence_histogram(GeneratorConfig(), p, q, u.size, cycles=1_000_000)

# The kept draws follow the normalized pointwise product.
prod, norm = product_pdf(p.pdf(u), q.pdf(u))
print("acceptance rate:", hist.sum() / 1_000_000, "expected:", norm)
print("empirical:", (hist / hist.sum()).round(4)[:9])
print("product  :", (prod / norm).round(4)[:9])
print("L1 distance:", np.abs(hist / hist.sum() - prod / norm).sum())
