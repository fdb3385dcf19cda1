"""Synthetic problems with forward/backward passes that round like 16-bit FMACs.

Two models live here: batch-1 least-squares regression, whose quantized
gradient is ``Q(Q(Q(x_i^T w - y_i)) * x_i)``, and a one-hidden-layer ReLU
classifier that rounds after every operator of its compute graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from lprec.errors import NonFiniteError
from lprec.floatsim import FloatFormat, RngStream, RoundingMode, parse_format, round_to
from lprec.qlinalg import AccumPrecision, accumulate, qdot, qmatmul

__all__ = [
    "LsqInstance",
    "LsqConstants",
    "QuantPolicy",
    "MlpSpec",
    "gen_lsq",
    "compute_constants",
    "lsq_grad_quantized",
    "lsq_grad_exact",
    "lsq_loss",
    "dot64",
    "init_mlp",
    "mlp_forward_backward",
    "mlp_loss_exact",
    "gen_blobs",
]


def dot64(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Row-wise dot products summed left to right in float64.

    Used instead of BLAS so results do not depend on the linked library or
    thread count.
    """
    prod = np.asarray(a, dtype=np.float64) * w
    if prod.shape[-1] == 0:
        return np.zeros(prod.shape[:-1])
    out = prod[..., 0].copy()
    for j in range(1, prod.shape[-1]):
        out += prod[..., j]
    return out


# -- least squares ------------------------------------------------------------


class LsqConstants(NamedTuple):
    L: float
    mu: float
    singular: bool


def compute_constants(X: ArrayLike, tol: float = 1e-12) -> LsqConstants:
    """``L = max_i ||x_i||^2`` and ``mu`` = smallest eigenvalue of ``X^T X / n``.

    A covariance whose smallest eigenvalue is below ``tol`` (relative to the
    largest) is reported with ``mu = 0`` and ``singular=True``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < d:
        raise ValueError(f"need n >= d, got n={n}, d={d}")
    L = float(np.max(dot64(X, X))) if n else 0.0
    eig = np.linalg.eigvalsh(X.T @ X / n)
    scale = max(1.0, float(eig[-1]))
    if eig[0] <= tol * scale:
        return LsqConstants(L, 0.0, True)
    return LsqConstants(L, float(eig[0]), False)


@dataclass
class LsqInstance:
    """A synthetic least-squares problem ``y = X w* + noise``.

    ``X`` is the data every training path sees; when the instance was built
    for a format, ``X`` is already rounded to it and ``X_raw`` keeps the
    unrounded draw. Labels are formed from ``X`` in float64, so with
    ``noise_std == 0`` every per-sample gradient vanishes at ``w_star``.
    """

    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    noise_std: float
    L: float
    mu: float
    seed: int
    w_range: tuple[float, float]
    fmt: FloatFormat | None = None
    mu_singular: bool = False
    X_raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def X_aug(self) -> np.ndarray:
        """``[X | y]`` so the residual is one FMAC over ``[w, -1]``."""
        return np.hstack([self.X, self.y[:, None]])

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "n": self.n,
                "w_range": list(self.w_range),
                "noise_std": self.noise_std,
                "seed": self.seed,
                "fmt": None if self.fmt is None else self.fmt.name,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> LsqInstance:
        doc = json.loads(text)
        return gen_lsq(
            doc["d"],
            doc["n"],
            tuple(doc["w_range"]),
            doc["noise_std"],
            doc["seed"],
            fmt=None if doc.get("fmt") is None else parse_format(doc["fmt"]),
        )


def gen_lsq(
    d: int,
    n: int,
    w_range: tuple[float, float] = (0.0, 100.0),
    noise_std: float = 0.5,
    seed: int = 0,
    fmt: FloatFormat | None = None,
) -> LsqInstance:
    """Draw ``X ~ N(0, I)``, ``w* ~ U[lo, hi)`` and ``y = X w* + N(0, noise_std^2)``."""
    if d < 1 or n < d:
        raise ValueError(f"need d >= 1 and n >= d, got d={d}, n={n}")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    X_raw = rng.standard_normal((n, d))
    w_star = rng.uniform(w_range[0], w_range[1], size=d)
    noise = rng.standard_normal(n) * noise_std
    X = X_raw if fmt is None else round_to(X_raw, fmt)
    y = dot64(X, w_star) + noise
    L, mu, singular = compute_constants(X)
    return LsqInstance(
        X=X,
        y=y,
        w_star=w_star,
        noise_std=float(noise_std),
        L=L,
        mu=mu,
        seed=seed,
        w_range=(float(w_range[0]), float(w_range[1])),
        fmt=fmt,
        mu_singular=singular,
        X_raw=X_raw,
    )


def lsq_grad_exact(w: ArrayLike, inst: LsqInstance, i: int) -> np.ndarray:
    """``(x_i^T w - y_i) x_i`` in float64."""
    x = inst.X[i]
    return (dot64(x, np.asarray(w, dtype=np.float64)) - inst.y[i]) * x


def lsq_grad_quantized(
    w: ArrayLike,
    inst: LsqInstance,
    i: int,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    rng: RngStream | None = None,
    acc: AccumPrecision | str = AccumPrecision.WIDE32,
) -> np.ndarray:
    """Sample gradient with the three roundings of a 16-bit backprop.

    The residual ``x_i^T w - y_i`` leaves a single FMAC (label folded into the
    accumulator), the loss layer hands it back as the activation gradient
    (rounded again, a no-op under nearest rounding), and the weight gradient
    is the rounded elementwise product with ``x_i``.
    """
    w = np.asarray(w, dtype=np.float64)
    w_aug = np.append(w, -1.0)
    a = qdot(inst.X_aug[i], w_aug, fmt, mode, acc, rng)
    g_a = round_to(a, fmt, mode, rng)
    out = round_to(g_a * inst.X[i], fmt, mode, rng)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"gradient overflowed {fmt.name}")
    return out


def lsq_loss(w: ArrayLike, inst: LsqInstance) -> float:
    """``1/(2n) * sum_i (x_i^T w - y_i)^2`` in float64."""
    r = dot64(inst.X, np.asarray(w, dtype=np.float64)) - inst.y
    return float(0.5 * np.mean(r * r))


# -- policies -----------------------------------------------------------------


@dataclass(frozen=True)
class QuantPolicy:
    """Where rounding happens in a training step.

    ``weight_update`` is an update-policy name (see ``lprec.optim``) or a
    mapping from parameter name to policy name. ``weights_precision`` is
    ``"fmt16"`` or ``"master32"``; master32 forces exact 32-bit updates.
    """

    round_forward_backward: bool = True
    weight_update: str | dict[str, str] = "nearest"
    weights_precision: str = "fmt16"

    def __post_init__(self) -> None:
        if self.weights_precision not in ("fmt16", "master32"):
            raise ValueError(f"weights_precision must be fmt16 or master32, got {self.weights_precision!r}")
        if self.weights_precision == "master32":
            object.__setattr__(self, "weight_update", "master32")

    def policy_for(self, name: str) -> str:
        if isinstance(self.weight_update, str):
            return self.weight_update
        return self.weight_update.get(name, self.weight_update.get("*", "nearest"))


# -- one-hidden-layer classifier ------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dim: int
    n_classes: int = 2

    PARAM_NAMES = ("W1", "b1", "W2", "b2")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "W1": (self.hidden_dim, self.input_dim),
            "b1": (self.hidden_dim,),
            "W2": (self.n_classes, self.hidden_dim),
            "b2": (self.n_classes,),
        }


def init_mlp(spec: MlpSpec, fmt: FloatFormat | None, seed: int = 0) -> dict[str, np.ndarray]:
    """He-style initialization, rounded to ``fmt`` when given."""
    rng = np.random.default_rng(seed)
    params = {
        "W1": rng.standard_normal((spec.hidden_dim, spec.input_dim)) * np.sqrt(2.0 / spec.input_dim),
        "b1": np.zeros(spec.hidden_dim),
        "W2": rng.standard_normal((spec.n_classes, spec.hidden_dim)) * np.sqrt(1.0 / spec.hidden_dim),
        "b2": np.zeros(spec.n_classes),
    }
    if fmt is not None:
        params = {k: round_to(v, fmt) for k, v in params.items()}
    return params


def gen_blobs(n: int, dim: int, seed: int = 0, sep: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian classes centred at ``+-sep/2`` along a random direction."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    labels = rng.integers(0, 2, size=n)
    X = rng.standard_normal((n, dim)) + np.outer(np.where(labels == 1, 0.5, -0.5) * sep, direction)
    return X, labels


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_loss_exact(params: dict[str, np.ndarray], X: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy in float64 (no rounding anywhere)."""
    z1 = X @ params["W1"].T + params["b1"]
    logits = np.maximum(z1, 0.0) @ params["W2"].T + params["b2"]
    zmax = logits.max(axis=1, keepdims=True)
    lse = (zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True)))[:, 0]
    return float(np.mean(lse - logits[np.arange(len(labels)), labels]))


def mlp_forward_backward(
    params: dict[str, np.ndarray],
    batch: tuple[np.ndarray, np.ndarray],
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    policy: QuantPolicy | None = None,
    rng: RngStream | None = None,
    acc: AccumPrecision | str = AccumPrecision.WIDE32,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and parameter gradients for one batch.

    With ``policy.round_forward_backward`` every operator output is rounded
    once to ``fmt``: both matmuls, the bias adds, the fused softmax, the loss,
    the fused softmax-cross-entropy gradient, and each backward matmul and
    bias reduction. ReLU and its mask need no rounding. With rounding off the
    whole pass runs in float64.
    """
    policy = policy or QuantPolicy()
    X, labels = np.asarray(batch[0], dtype=np.float64), np.asarray(batch[1])
    B = X.shape[0]
    W1, b1, W2, b2 = (np.asarray(params[k], dtype=np.float64) for k in MlpSpec.PARAM_NAMES)

    if policy.round_forward_backward:
        def q(v):
            return round_to(v, fmt, mode, rng)

        def mm(a, b):
            return qmatmul(a, b, fmt, mode, acc, rng)

        def rowsum(a):
            return q(accumulate(a, acc))
    else:
        def q(v):
            return np.asarray(v, dtype=np.float64)

        def mm(a, b):
            return a @ b

        def rowsum(a):
            return a.sum(axis=-1)

    z1 = q(mm(X, W1.T) + b1)
    a1 = np.maximum(z1, 0.0)
    logits = q(mm(a1, W2.T) + b2)
    p = q(_softmax(logits))
    zmax = logits.max(axis=1, keepdims=True)
    lse = (zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True)))[:, 0]
    loss = float(q(np.mean(lse - logits[np.arange(B), labels])))
    if not np.isfinite(loss):
        raise NonFiniteError("MLP loss is not finite")

    onehot = np.zeros_like(p)
    onehot[np.arange(B), labels] = 1.0
    dlogits = q((p - onehot) / B)
    grads = {
        "W2": mm(dlogits.T, a1),
        "b2": rowsum(dlogits.T),
    }
    da1 = mm(dlogits, W2)
    dz1 = np.where(z1 > 0, da1, 0.0)
    grads["W1"] = mm(dz1.T, X)
    grads["b1"] = rowsum(dz1.T)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"gradient of {name} is not finite")
    return loss, grads
