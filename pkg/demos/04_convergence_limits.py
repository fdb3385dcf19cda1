"""
Where nearest rounding stops SGD
================================

On a noiseless problem every per-sample gradient vanishes at w*. Close
enough to w*, each SGD step is smaller than half a grid spacing and rounds
away. This script measures that radius, checks it by brute force, and
compares against training that keeps binary32 weights.
"""

import math

import numpy as np

from lprec.bounds import (
    Thm1Params,
    Thm2Params,
    cancellation_radius,
    fwdbwd_trajectory,
    halting_lower_bound,
    nearest_trajectory,
    probe_cancellation,
    thm2_upper_bound,
)
from lprec.floatsim import BF16
from lprec.models import gen_lsq

inst = gen_lsq(10, 256, w_range=(50.0, 100.0), noise_std=0.0, seed=0, fmt=BF16)
eps = BF16.machine_epsilon

# a small step size gives a wide radius, which makes the brute-force check meaningful
alpha = 0.01 / inst.L
p = Thm1Params(eps, alpha, inst.L, inst.w_star)
print(f"L={inst.L:.4g} mu={inst.mu:.4g}  cancellation radius at alpha*L=0.01: {cancellation_radius(p):.4g}")

inside = probe_cancellation(inst, alpha, BF16, 300, seed=0)
# in 10 dimensions almost all of a ball of twice the radius lies outside the radius
outside = [q for q in probe_cancellation(inst, alpha, BF16, 300, seed=1, radius_scale=2.0) if not q.predicted]
print(f"inside the radius: {len(inside)} probes, all steps cancelled: {all(q.observed_cancelled for q in inside)}")
print(f"outside (up to 2x): {sum(q.observed_cancelled for q in outside)}/{len(outside)} still fully cancelled")

# with a practical step size the trajectory itself stalls above a floor
alpha = 0.5 / inst.L
w0 = np.zeros(10)
p = Thm1Params(eps, alpha, inst.L, inst.w_star, w0)
dist = nearest_trajectory(inst, alpha, BF16, 2000, seed=0, w0=w0)
print(f"\nnearest updates, alpha*L=0.5: closest approach {dist.min():.4g}, floor {halting_lower_bound(p):.4g}")

# keeping 32-bit weights removes the floor; rounding in the forward/backward pass
# only slows the linear rate
dsq = fwdbwd_trajectory(inst, alpha, BF16, 1000, seed=0)
q = Thm2Params(alpha, inst.mu, inst.L, eps, 1000, float(dsq[0]))
print(f"32-bit weights:  distance after 1000 steps {math.sqrt(dsq[-1]):.3g}")
print(f"  squared distance {dsq[-1]:.3g} vs rate bound {thm2_upper_bound(q):.3g} (4*eps*L/mu = {q.rounding_ratio:.3f})")
