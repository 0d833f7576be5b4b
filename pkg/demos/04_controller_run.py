"""
One controller run and its filtered output
==========================================

"""

# The bundled single-rule example: if a is S and b is S then y is B.
from stochfuzz import exact_output, load_config, quantize, run
from stochfuzz.analysis import settling_time

cfg = load_config("eq7.json")
ctl = cfg.controller
xa = quantize(0.1, ctl.quantizer_bits)
xb = quantize(0.1, ctl.quantizer_bits)
print("quantized inputs:", xa, xb)

# Each cycle picks a rule, draws three samples and keeps y only on a match.
res = run(ctl, xa, xb, 1_000_000, record_filtered=True)
print("accepted", res.accepted_count, "of", res.total_cycles, "cycles")
print("running mean :", round(res.estimate_mean, 4))
print("IIR output   :", round(res.estimate_filtered, 4))
print("exact        :", exact_output(ctl.rulebase, xa, xb))

# The low-pass filter needs time to settle, which is the slow part of the scheme.
band = 0.02 * ctl.output_span()
print("settled after", settling_time(res.filtered_trace, 25.0, band), "cycles (band", band, ")")
