"""
Simulated 16-bit formats
========================

Every value stays a float64 on the host; a format only decides which
float64 values are allowed. Rounding snaps a value onto that grid.
"""

import numpy as np

from lprec.floatsim import BF16, FP16, E8M3, RngStream, decode, encode, parse_format, round_nearest, round_stochastic, ulp

# BF16 keeps float32's 8 exponent bits and 7 of its mantissa bits, FP16 trades
# range for precision
for f in (BF16, FP16, E8M3):
    print(f"{f.name:6s} eps={f.machine_epsilon:<11.6g} max={f.max_finite:<12.6g} min_normal={f.min_positive_normal:.3g}")

# formats are parsed from their names as well
assert parse_format("bf16") == parse_format("E8M7") == BF16

# bit patterns
bits = encode([1.0, -2.5, 3.14159], BF16)
print("BF16 bits of 1, -2.5, pi:", [f"{b:#06x}" for b in bits])
print("decoded back:           ", decode(bits, BF16))

# nearest rounding: ties go to the even neighbour
print("255.5 ->", round_nearest(255.5, BF16), "  259 ->", round_nearest(259.0, BF16))

# the gap between neighbours grows with magnitude: above 256 BF16 moves in steps of 2
print("spacing at 1, 256, 65536:", ulp([1.0, 256.0, 65536.0], BF16))

# stochastic rounding picks a neighbour with probability proportional to proximity,
# so it is unbiased on average even though each draw is on the grid
rng = RngStream(0)
draws = round_stochastic(np.full(100_000, 255.5), BF16, rng)
print(f"stochastic rounding of 255.5: values {sorted(set(draws.tolist()))}, mean {draws.mean():.4f}")

x = np.full(100_000, 1.0 + 2.0**-10)
print(f"1 + 2^-10 in BF16: nearest {round_nearest(x[0], BF16)}, stochastic mean {round_stochastic(x, BF16, rng).mean():.6f}")
