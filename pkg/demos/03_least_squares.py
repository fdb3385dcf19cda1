"""
Least squares with 16-bit training
==================================

Batch-1 SGD on a 10-dimensional regression problem with targets in [0, 100)
and label noise 0.5, comparing where the loss settles:

* fp32             everything in binary32
* nearest-updates  exact gradients, weights stored in BF16 with nearest rounding
* fwdbwd-only      BF16 forward and backward, binary32 weights
* kahan            BF16 everywhere, Kahan-compensated weight updates
* stochastic       BF16 everywhere, stochastically rounded weight updates

Takes about a minute on one core. Set STEPS lower for a quicker look.
"""

import tempfile

import numpy as np

from lprec.harness import ExperimentConfig, run_experiment

STEPS = 8000
SEEDS = [0, 1]

LOG_EVERY = 10
# the smoothing window counts logged rows: average over the second half of training
base = ExperimentConfig.for_kind(
    "lsq-figure", steps=STEPS, seeds=SEEDS, log_every=LOG_EVERY, smooth_window=STEPS // 2 // LOG_EVERY
)

with tempfile.TemporaryDirectory() as out:
    arms = run_experiment(base, out).arms
    arms += run_experiment(base.with_overrides(kind="lsq-theory", policy="stochastic"), out).arms

loss = {}
for a in arms:
    loss.setdefault(a.arm, []).append(a.final_loss_smooth)
ref = np.mean(loss["fp32"])
print(f"{'arm':<16} {'smoothed loss':>14} {'x fp32':>8}")
for name, vals in loss.items():
    print(f"{name:<16} {np.mean(vals):>14.5g} {np.mean(vals) / ref:>8.2f}")

# nearest rounding on the weights stalls an order of magnitude above fp32,
# while rounding only the forward and backward passes costs almost nothing.
# Kahan gets most of the way back; what remains is the error of storing the
# optimum itself on the BF16 grid. Stochastic rounding is unbiased but each
# weight keeps jittering by about one grid step, which shows up as extra loss.
