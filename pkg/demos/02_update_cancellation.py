"""
When weight updates disappear
=============================

Just below 256 the BF16 grid has a spacing of 1, so 255.5 is a tie between
255 and 256 and rounds back to the even 256. An update of -0.5 is lost
completely, every time. This script walks through
what each update policy does with a stream of such updates.
"""

import numpy as np

from lprec.floatsim import BF16, RngStream, round_nearest
from lprec.optim import SgdConfig, init_state, kahan_apply, sgd_step

steps = 10_000

# plain nearest rounding: every -0.5 lands exactly on a tie and rounds back to 256
w = np.array([256.0])
for _ in range(steps):
    w = round_nearest(w - 0.5, BF16)
print(f"nearest after {steps} updates of -0.5: {w[0]}  (exact: {256 - 0.5 * steps})")

# Kahan summation keeps the lost part in a second 16-bit buffer and feeds it back
w, c = np.array([256.0]), np.zeros(1)
for k in range(1, 4):
    w, c = kahan_apply(w, [-0.5], c, BF16)
    print(f"  kahan step {k}: w={w[0]:<6} c={c[0]}")
for _ in range(steps - 3):
    w, c = kahan_apply(w, [-0.5], c, BF16)
print(f"kahan after {steps} updates: {w[0]}")

# stochastic rounding moves down half of the time, so it drifts at the right speed
rng = RngStream(1)
w = np.array([256.0])
state = init_state(w, "stochastic")
cfg = SgdConfig(lr=1.0)
for _ in range(steps):
    w, state = sgd_step(w, [0.5], state, cfg, "stochastic", BF16, rng)
print(f"stochastic after {steps} updates: {w[0]}")

# the same effect with a realistic learning rate: lr 0.01 itself is not a BF16 value
print("lr 0.01 stored in BF16:", round_nearest(0.01, BF16))
