"""
Control surface and convergence rate
====================================

"""

# Compare the stochastic controller with the exact engine over a 5x5 input grid.
import numpy as np
from stochfuzz import load_config
from stochfuzz.analysis import convergence_curve, surface_compare

cfg = load_config("rulebase3x3.json")
report = surface_compare(cfg.controller, grid_step=4, cycles_per_point=200_000)
print("max |error|:", round(report.max_abs_error, 4), " rmse:", round(report.rmse, 4))
print("max |acceptance-rate z|:", round(float(np.abs(report.rate_z_scores()).max()), 2))

grid = np.array(report.stochastic).reshape(5, 5)
print("stochastic surface:\n", grid.round(2))

# The cross-replica spread of the estimate falls like one over root N.
conv = convergence_curve(cfg.controller, 5, 9, [4000, 16000, 64000], replicas=30)
for n, est, se in conv.checkpoints:
    print(f"N_accepted {n:8.1f}  estimate {est:.4f}  stderr {se:.4f}")
print("fitted slope:", round(conv.fitted_slope, 3))
