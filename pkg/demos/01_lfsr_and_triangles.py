"""
Shift registers and triangular samples
======================================

"""

# A maximal-length register walks through every nonzero state before repeating.
import numpy as np
from stochfuzz.rng import Lfsr, TriangularChannel, is_maximal, lfsr_period, triangular_samples

print("period of the 16-bit register:", lfsr_period(16, (16, 14, 13, 11), 1))
print("32-bit taps (32, 22, 2, 1) maximal:", is_maximal(32, (32, 22, 2, 1)))

# Adding two k-bit words gives a triangle with 2^(k+1) - 1 points.
reg = Lfsr(32, (32, 22, 2, 1), seed=12345)
ch = TriangularChannel(bit_width=2, shift=0)
draws = triangular_samples(reg, ch, 200_000)

from stochfuzz.core import Universe
law = ch.pdf(Universe(3)).mass
freq = np.bincount(draws, minlength=8) / draws.size
for code, (f, p) in enumerate(zip(freq, law)):
    print(f"code {code}: empirical {f:.4f}  exact {p:.4f}")

# The chi-square check does the same comparison formally.
from stochfuzz.analysis import chi_square_gof
res = chi_square_gof(np.bincount(draws, minlength=8), law)
print(f"chi-square {res.statistic:.2f} on {res.dof} dof, reject at 1%: {res.reject}")
