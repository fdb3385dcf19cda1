"""SGD and AdamW where every operator rounds, plus weight-update policies.

All optimizer arithmetic (momentum, moments, bias corrections, step size
products) uses nearest rounding to the working format. Only the final write of
the weights depends on the update policy:

``nearest``           round the subtraction to nearest
``stochastic``        stochastically round the subtraction output
``kahan``             compensated summation with a 16-bit error buffer
``kahan-stochastic``  compensated summation, accumulate line rounded stochastically
``master32``          weights and optimizer state in IEEE binary32, no 16-bit rounding
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from lprec.errors import ConfigError, NonFiniteError
from lprec.floatsim import FloatFormat, RngStream, round_nearest, round_stochastic

__all__ = [
    "UpdatePolicy",
    "SgdConfig",
    "AdamWConfig",
    "OptimState",
    "init_state",
    "kahan_apply",
    "sgd_step",
    "adamw_step",
    "quantize_hparams",
]


class UpdatePolicy(str, Enum):
    NEAREST = "nearest"
    STOCHASTIC = "stochastic"
    KAHAN = "kahan"
    KAHAN_STOCHASTIC = "kahan-stochastic"
    MASTER32 = "master32"

    @property
    def uses_kahan(self) -> bool:
        return self in (UpdatePolicy.KAHAN, UpdatePolicy.KAHAN_STOCHASTIC)

    @property
    def uses_rng(self) -> bool:
        return self in (UpdatePolicy.STOCHASTIC, UpdatePolicy.KAHAN_STOCHASTIC)


Schedule = Callable[[int], float]


def piecewise(boundaries: list[int], values: list[float]) -> Schedule:
    """Step schedule: ``values[k]`` for steps in ``[boundaries[k-1], boundaries[k])``."""
    if len(values) != len(boundaries) + 1:
        raise ValueError("need len(values) == len(boundaries) + 1")
    edges = np.asarray(boundaries)

    def lr(step: int) -> float:
        return float(values[int(np.searchsorted(edges, step, side="right"))])

    return lr


@dataclass(frozen=True)
class SgdConfig:
    lr: float | Schedule = 0.01
    momentum: float = 0.0
    weight_decay: float = 0.0

    def lr_at(self, step: int) -> float:
        return self.lr(step) if callable(self.lr) else self.lr


@dataclass(frozen=True)
class AdamWConfig:
    lr: float | Schedule = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def lr_at(self, step: int) -> float:
        return self.lr(step) if callable(self.lr) else self.lr


@dataclass(frozen=True)
class OptimState:
    """Per-tensor optimizer state.

    ``m`` is momentum (SGD) or the first moment (AdamW), ``v`` the second
    moment, ``c1``/``c2`` the running products of the betas, ``kahan_c`` the
    compensation buffer. Under master32, ``master`` holds the binary32
    weights and ``shadow`` their nearest 16-bit copy. ``last_update`` is the
    update the optimizer tried to apply on the previous step.
    """

    m: np.ndarray
    v: np.ndarray | None = None
    c1: float = 1.0
    c2: float = 1.0
    kahan_c: np.ndarray | None = None
    master: np.ndarray | None = None
    shadow: np.ndarray | None = None
    last_update: np.ndarray | None = None
    step: int = 0


def init_state(w: ArrayLike, policy: UpdatePolicy | str, adamw: bool = False) -> OptimState:
    policy = UpdatePolicy(policy)
    w = np.asarray(w, dtype=np.float64)
    if policy is UpdatePolicy.MASTER32:
        zeros = np.zeros(w.shape, dtype=np.float32)
        return OptimState(
            m=zeros,
            v=zeros.copy() if adamw else None,
            master=w.astype(np.float32),
        )
    return OptimState(
        m=np.zeros_like(w),
        v=np.zeros_like(w) if adamw else None,
        kahan_c=np.zeros_like(w) if policy.uses_kahan else None,
    )


def _q(x, fmt: FloatFormat) -> np.ndarray:
    return round_nearest(x, fmt)


def _check(name: str, *arrays: np.ndarray | None) -> None:
    for a in arrays:
        if a is not None and not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{name}: non-finite value in optimizer output")


def kahan_apply(
    w: ArrayLike,
    u: ArrayLike,
    c: ArrayLike,
    fmt: FloatFormat,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Add update ``u`` to ``w`` with compensation buffer ``c``.

    Returns ``(w', c')``. Every line rounds to nearest; passing ``rng`` rounds
    the accumulate line ``s = w + y`` stochastically instead.
    """
    w = np.asarray(w, dtype=np.float64)
    y = _q(np.asarray(u, dtype=np.float64) - c, fmt)  # compensate
    s = w + y
    s = _q(s, fmt) if rng is None else round_stochastic(s, fmt, rng)  # accumulate
    c_new = _q(_q(s - w, fmt) - y, fmt)  # measure the error
    return s, c_new


def _apply_update(
    w: np.ndarray,
    step: np.ndarray,
    state: OptimState,
    policy: UpdatePolicy,
    fmt: FloatFormat,
    rng: RngStream | None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Compute ``w - step`` under ``policy``; returns (w', kahan_c')."""
    if policy.uses_rng and rng is None:
        raise ValueError(f"policy {policy.value} requires an RngStream")
    if policy is UpdatePolicy.NEAREST:
        return _q(w - step, fmt), None
    if policy is UpdatePolicy.STOCHASTIC:
        return round_stochastic(w - step, fmt, rng), None
    c = state.kahan_c if state.kahan_c is not None else np.zeros_like(w)
    return kahan_apply(w, -step, c, fmt, rng if policy is UpdatePolicy.KAHAN_STOCHASTIC else None)


def sgd_step(
    w: ArrayLike,
    grad: ArrayLike,
    state: OptimState,
    cfg: SgdConfig,
    policy: UpdatePolicy | str,
    fmt: FloatFormat,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, OptimState]:
    """One SGD-with-momentum step.

    ``g = grad + d*w``, ``m = mu*m + g``, ``w = w - lr*m``. Under master32 the
    whole step runs in binary32 on ``state.master`` and the returned weights
    are that master copy.
    """
    policy = UpdatePolicy(policy)
    grad = np.asarray(grad, dtype=np.float64)
    lr_t = cfg.lr_at(state.step)

    if policy is UpdatePolicy.MASTER32:
        f32 = np.float32
        w32 = state.master if state.master is not None else np.asarray(w, dtype=f32)
        g = grad.astype(f32) + f32(cfg.weight_decay) * w32
        m = f32(cfg.momentum) * state.m.astype(f32) + g
        step = f32(lr_t) * m
        w_new = w32 - step
        _check("sgd", w_new, m)
        return w_new.astype(np.float64), replace(
            state,
            m=m,
            master=w_new,
            shadow=_q(w_new, fmt),
            last_update=(-step).astype(np.float64),
            step=state.step + 1,
        )

    w = np.asarray(w, dtype=np.float64)
    lr, mom, wd = (float(_q(v, fmt)) for v in (lr_t, cfg.momentum, cfg.weight_decay))
    g = _q(grad + _q(wd * w, fmt), fmt)
    m = _q(_q(mom * state.m, fmt) + g, fmt)
    step = _q(lr * m, fmt)
    w_new, c_new = _apply_update(w, step, state, policy, fmt, rng)
    _check("sgd", w_new, m, c_new)
    return w_new, replace(
        state,
        m=m,
        kahan_c=c_new if c_new is not None else state.kahan_c,
        last_update=-step,
        step=state.step + 1,
    )


def _check_betas(b1: float, b2: float, fmt: FloatFormat | None) -> None:
    for name, b in (("beta1", b1), ("beta2", b2)):
        if b >= 1.0:
            hint = f"; try {fmt.largest_below_one!r}" if fmt is not None else ""
            raise ConfigError(f"{name} rounds to {b} (must stay below 1){hint}")


def adamw_step(
    w: ArrayLike,
    grad: ArrayLike,
    state: OptimState,
    cfg: AdamWConfig,
    policy: UpdatePolicy | str,
    fmt: FloatFormat,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, OptimState]:
    """One AdamW step with decoupled weight decay.

    ``m = b1*m + (1-b1)*g``, ``v = b2*v + (1-b2)*g^2``, ``c1 *= b1``,
    ``c2 *= b2``, ``m_hat = m/(1-c1)``, ``v_hat = sqrt(v/(1-c2))``, then
    ``w = w - (lr*m_hat/(v_hat+eps) + lr*d*w)``.
    """
    policy = UpdatePolicy(policy)
    grad = np.asarray(grad, dtype=np.float64)
    lr_t = cfg.lr_at(state.step)

    if policy is UpdatePolicy.MASTER32:
        f32 = np.float32
        b1, b2 = f32(cfg.beta1), f32(cfg.beta2)
        _check_betas(float(b1), float(b2), None)
        lr, wd, eps = f32(lr_t), f32(cfg.weight_decay), f32(cfg.eps)
        w32 = state.master if state.master is not None else np.asarray(w, dtype=f32)
        g = grad.astype(f32)
        m = b1 * state.m.astype(f32) + (f32(1) - b1) * g
        v = b2 * state.v.astype(f32) + (f32(1) - b2) * (g * g)
        c1, c2 = f32(state.c1) * b1, f32(state.c2) * b2
        m_hat = m / (f32(1) - c1)
        v_hat = np.sqrt(v / (f32(1) - c2))
        step = lr * m_hat / (v_hat + eps) + lr * wd * w32
        w_new = w32 - step
        _check("adamw", w_new, m, v)
        return w_new.astype(np.float64), replace(
            state,
            m=m,
            v=v,
            c1=float(c1),
            c2=float(c2),
            master=w_new,
            shadow=_q(w_new, fmt),
            last_update=(-step).astype(np.float64),
            step=state.step + 1,
        )

    def q(x):
        return _q(x, fmt)

    w = np.asarray(w, dtype=np.float64)
    b1, b2 = float(q(cfg.beta1)), float(q(cfg.beta2))
    _check_betas(b1, b2, fmt)
    lr, wd, eps = (float(q(v)) for v in (lr_t, cfg.weight_decay, cfg.eps))
    one_m_b1, one_m_b2 = float(q(1.0 - b1)), float(q(1.0 - b2))

    m = q(q(b1 * state.m) + q(one_m_b1 * grad))
    v = q(q(b2 * state.v) + q(one_m_b2 * q(grad * grad)))
    c1, c2 = float(q(state.c1 * b1)), float(q(state.c2 * b2))
    m_hat = q(m / float(q(1.0 - c1)))
    v_hat = q(np.sqrt(q(v / float(q(1.0 - c2)))))
    step = q(q(q(lr * m_hat) / q(v_hat + eps)) + q(float(q(lr * wd)) * w))
    w_new, c_new = _apply_update(w, step, state, policy, fmt, rng)
    _check("adamw", w_new, m, v, c_new)
    return w_new, replace(
        state,
        m=m,
        v=v,
        c1=c1,
        c2=c2,
        kahan_c=c_new if c_new is not None else state.kahan_c,
        last_update=-step,
        step=state.step + 1,
    )


def quantize_hparams(cfg: SgdConfig | AdamWConfig, fmt: FloatFormat) -> SgdConfig | AdamWConfig:
    """Round every scalar hyperparameter to ``fmt``.

    Warns with the list of values that moved. Raises ``ConfigError`` if a beta
    rounds to 1 or a positive learning rate rounds to 0. Callable schedules
    are left alone; the optimizers round them at each use.
    """
    changes = {}
    moved = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if callable(value):
            continue
        rounded = float(round_nearest(value, fmt))
        changes[f.name] = rounded
        if rounded != value:
            moved.append(f"{f.name}: {value!r} -> {rounded!r}")
    if isinstance(cfg, AdamWConfig):
        _check_betas(changes["beta1"], changes["beta2"], fmt)
    if "lr" in changes and cfg.lr != 0 and changes["lr"] == 0:
        raise ConfigError(f"learning rate {cfg.lr!r} underflows to 0 in {fmt.name}")
    if moved:
        warnings.warn(f"hyperparameters rounded to {fmt.name}: " + ", ".join(moved), stacklevel=2)
    return replace(cfg, **changes)
