"""Convergence limits of low-precision SGD and simulators that check them.

For a loss whose per-sample gradients vanish at a shared optimum ``w*`` and
are ``L``-Lipschitz, nearest rounding on the weight update cancels every SGD
step once ``||w - w*|| <= eps / (alpha*L + eps) * min_j |w*_j|``, which also
puts a floor under the distance reachable by the trajectory. Rounding only
the forward and backward passes of least squares instead keeps a linear rate,
``E||w_t - w*||^2 <= exp(-alpha*mu*t*(1 - 4*eps*L/mu)) * ||w_0 - w*||^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from lprec.floatsim import FloatFormat, RngStream, round_nearest
from lprec.models import LsqInstance, dot64, lsq_grad_exact, lsq_grad_quantized
from lprec.optim import SgdConfig, init_state, sgd_step

__all__ = [
    "Thm1Params",
    "Thm2Params",
    "cancellation_radius",
    "halting_lower_bound",
    "thm2_upper_bound",
    "predict_halt",
    "ProbeResult",
    "probe_cancellation",
    "nearest_trajectory",
    "fwdbwd_trajectory",
    "sample_indices",
]


@dataclass(frozen=True)
class Thm1Params:
    eps: float
    alpha: float
    L: float
    w_star: np.ndarray
    w0: np.ndarray | None = None

    @property
    def min_abs_w_star(self) -> float:
        return float(np.min(np.abs(self.w_star)))

    @property
    def init_distance(self) -> float:
        if self.w0 is None:
            return math.inf
        return float(np.linalg.norm(np.asarray(self.w0) - self.w_star))


@dataclass(frozen=True)
class Thm2Params:
    alpha: float
    mu: float
    L: float
    eps: float
    t: int
    d0_sq: float

    @property
    def rounding_ratio(self) -> float:
        """``4*eps*L/mu``; the bound only contracts while this is below 1."""
        return math.inf if self.mu == 0 else 4.0 * self.eps * self.L / self.mu

    @property
    def vacuous(self) -> bool:
        return self.rounding_ratio >= 1.0


def cancellation_radius(p: Thm1Params) -> float:
    """Radius around ``w*`` inside which nearest rounding cancels every step."""
    return p.eps / (p.alpha * p.L + p.eps) * p.min_abs_w_star


def halting_lower_bound(p: Thm1Params) -> float:
    """Floor on ``||w_t - w*||`` for nearest-rounded SGD with ``alpha <= 1/L``."""
    aL = p.alpha * p.L
    if aL > 1.0:
        raise ValueError(f"bound needs alpha*L <= 1, got {aL}")
    floor = p.eps * (1.0 - aL) / (aL + p.eps) * p.min_abs_w_star
    return min(floor, p.init_distance)


def thm2_upper_bound(p: Thm2Params) -> float:
    """Bound on ``E||w_t - w*||^2`` with rounded forward/backward, exact updates.

    Returned as-is when ``p.vacuous`` (the exponent is then non-negative).
    """
    return math.exp(-p.alpha * p.mu * p.t * (1.0 - p.rounding_ratio)) * p.d0_sq


def predict_halt(w: ArrayLike, inst: LsqInstance, alpha: float, fmt: FloatFormat) -> bool:
    """Whether ``w`` lies inside the cancellation radius of a noiseless instance."""
    if inst.noise_std != 0:
        raise ValueError("cancellation prediction assumes a noiseless (interpolating) instance")
    p = Thm1Params(fmt.machine_epsilon, alpha, inst.L, inst.w_star)
    return bool(np.linalg.norm(np.asarray(w) - inst.w_star) <= cancellation_radius(p))


# -- simulation oracles --------------------------------------------------------


@dataclass
class ProbeResult:
    """Outcome of checking single-step cancellation at one weight vector."""

    probe_id: int
    distance: float
    radius: float
    predicted: bool
    cancelled_samples: int
    total_samples: int

    @property
    def observed_cancelled(self) -> bool:
        return self.cancelled_samples == self.total_samples

    @property
    def counterexamples(self) -> int:
        return (self.total_samples - self.cancelled_samples) if self.predicted else 0


def _cancelled_per_sample(w: np.ndarray, inst: LsqInstance, alpha: float, fmt: FloatFormat) -> np.ndarray:
    residual = dot64(inst.X, w) - inst.y
    updated = round_nearest(w - alpha * (residual[:, None] * inst.X), fmt)
    return np.all(updated.view(np.uint64) == w.view(np.uint64), axis=1)


def probe_cancellation(
    inst: LsqInstance,
    alpha: float,
    fmt: FloatFormat,
    n_probes: int,
    seed: int = 0,
    radius_scale: float = 1.0,
) -> list[ProbeResult]:
    """Check ``Q(w - alpha*grad_i(w)) == w`` for every sample at random ``w``.

    Probes are representable weight vectors drawn uniformly from the ball of
    ``radius_scale`` times the cancellation radius (rejection on the rounded
    point), so ``radius_scale > 1`` also exercises the unpredicted region.
    """
    p = Thm1Params(fmt.machine_epsilon, alpha, inst.L, inst.w_star)
    radius = cancellation_radius(p)
    rng = np.random.default_rng(seed)
    out: list[ProbeResult] = []
    attempts = 0
    while len(out) < n_probes:
        attempts += 1
        if attempts > 1000 * n_probes:
            raise ValueError("cannot place representable probes in the ball: radius is below the grid spacing")
        direction = rng.standard_normal(inst.d)
        direction /= np.linalg.norm(direction)
        r = radius_scale * radius * rng.uniform() ** (1.0 / inst.d)
        w = round_nearest(inst.w_star + r * direction, fmt)
        dist = float(np.linalg.norm(w - inst.w_star))
        if dist > radius_scale * radius:
            continue
        cancelled = _cancelled_per_sample(w, inst, alpha, fmt)
        out.append(
            ProbeResult(
                probe_id=len(out),
                distance=dist,
                radius=radius,
                predicted=dist <= radius,
                cancelled_samples=int(cancelled.sum()),
                total_samples=inst.n,
            )
        )
    return out


def sample_indices(seed: int, n: int, steps: int) -> np.ndarray:
    """Batch-1 sample indices, uniform over ``range(n)``, from the sampler stream."""
    u = RngStream.keyed(seed, "sampler").uniform(steps)
    return np.minimum((u * n).astype(np.int64), n - 1)


def nearest_trajectory(
    inst: LsqInstance,
    alpha: float,
    fmt: FloatFormat,
    steps: int,
    seed: int,
    w0: ArrayLike | None = None,
) -> np.ndarray:
    """Distances ``||w_t - w*||`` for ``t = 0..steps`` of ``w <- Q(w - alpha*grad)``.

    Gradients are exact; only the weight update rounds.
    """
    w = round_nearest(np.zeros(inst.d) if w0 is None else w0, fmt)
    idx = sample_indices(seed, inst.n, steps)
    dist = np.empty(steps + 1)
    dist[0] = np.linalg.norm(w - inst.w_star)
    for t in range(steps):
        w = round_nearest(w - alpha * lsq_grad_exact(w, inst, idx[t]), fmt)
        dist[t + 1] = np.linalg.norm(w - inst.w_star)
    return dist


def fwdbwd_trajectory(
    inst: LsqInstance,
    alpha: float,
    fmt: FloatFormat,
    steps: int,
    seed: int,
    w0: ArrayLike | None = None,
) -> np.ndarray:
    """Squared distances for SGD with rounded forward/backward, unrounded weights.

    Weights stay in binary32 and are updated with binary32 arithmetic, which
    is the master32 policy with no momentum or decay.
    """
    w = np.zeros(inst.d, dtype=np.float32) if w0 is None else np.asarray(w0, dtype=np.float32)
    a32 = np.float32(alpha)
    idx = sample_indices(seed, inst.n, steps)
    dsq = np.empty(steps + 1)
    dsq[0] = np.sum((w - inst.w_star) ** 2)
    for t in range(steps):
        g = lsq_grad_quantized(w.astype(np.float64), inst, idx[t], fmt)
        w = w - a32 * g.astype(np.float32)
        diff = w.astype(np.float64) - inst.w_star
        dsq[t + 1] = diff @ diff
    return dsq


def master32_trajectory(
    inst: LsqInstance,
    alpha: float,
    fmt: FloatFormat,
    steps: int,
    seed: int,
) -> np.ndarray:
    """Same setting as ``fwdbwd_trajectory`` but driven through ``sgd_step``."""
    w = np.zeros(inst.d)
    state = init_state(w, "master32")
    cfg = SgdConfig(lr=alpha)
    idx = sample_indices(seed, inst.n, steps)
    dsq = np.empty(steps + 1)
    dsq[0] = np.sum((w - inst.w_star) ** 2)
    for t in range(steps):
        g = lsq_grad_quantized(w, inst, idx[t], fmt)
        w, state = sgd_step(w, g, state, cfg, "master32", fmt)
        diff = w - inst.w_star
        dsq[t + 1] = diff @ diff
    return dsq
