"""Compute-graph operators with FMAC semantics.

A 16-bit FMAC unit multiplies 16-bit inputs, accumulates ``a <- a + x*y`` in
a wider accumulator, and rounds once when the result leaves the unit. The
operators here reproduce that: reductions run left to right in the chosen
accumulator precision, then the final value is rounded to the output format
in the requested mode. Elementwise operators compute the exact float64 result
and round it once.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from lprec.errors import NonFiniteError
from lprec.floatsim import (
    FloatFormat,
    RngStream,
    RoundingMode,
    is_representable,
    round_to,
)

__all__ = [
    "AccumPrecision",
    "QTensor",
    "accumulate",
    "qdot",
    "qmatvec",
    "qmatmul",
    "qelementwise",
]


class AccumPrecision(str, Enum):
    WIDE32 = "wide32"
    WIDE64 = "wide64"


@dataclass(frozen=True)
class QTensor:
    """A float64 array whose elements are all representable in ``fmt``."""

    data: np.ndarray
    fmt: FloatFormat

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim not in (1, 2):
            raise ValueError(f"QTensor must be a vector or matrix, got ndim={data.ndim}")
        if not np.all(is_representable(data, self.fmt)):
            raise ValueError(f"QTensor data not representable in {self.fmt.name}")
        object.__setattr__(self, "data", data)

    @classmethod
    def quantize(
        cls,
        values: ArrayLike,
        fmt: FloatFormat,
        mode: RoundingMode | str = RoundingMode.NEAREST,
        rng: RngStream | None = None,
    ) -> QTensor:
        return cls(round_to(np.asarray(values, dtype=np.float64), fmt, mode, rng), fmt)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return self.data if dtype is None else self.data.astype(dtype)

    def __len__(self) -> int:
        return len(self.data)


def _values(a: ArrayLike | QTensor) -> np.ndarray:
    return a.data if isinstance(a, QTensor) else np.asarray(a, dtype=np.float64)


def accumulate(products: np.ndarray, acc: AccumPrecision | str = AccumPrecision.WIDE32) -> np.ndarray:
    """Sum ``products`` over the last axis, left to right, in ``acc`` precision.

    Wide32 rounds the running sum to IEEE binary32 after every add. Products of
    two 16-bit operands are exact in float64, so each step is the fused
    ``fl32(a + x*y)`` of a hardware FMAC.
    """
    acc = AccumPrecision(acc)
    if acc is AccumPrecision.WIDE64:
        # ufunc.accumulate is strictly sequential (np.sum would go pairwise)
        if products.shape[-1] == 0:
            return np.zeros(products.shape[:-1])
        return np.add.accumulate(products, axis=-1)[..., -1]
    # binary32 overflow shows up as inf and is reported by the caller
    with np.errstate(over="ignore"):
        if products.ndim == 1:
            # scalar loop: numpy scalar conversion rounds float64 -> binary32 to nearest even
            acc32 = np.float32(0.0)
            for p in products.tolist():
                acc32 = np.float32(float(acc32) + p)
            return np.float64(acc32)
        total = np.zeros(products.shape[:-1], dtype=np.float32)
        for k in range(products.shape[-1]):
            total = (total.astype(np.float64) + products[..., k]).astype(np.float32)
    return total.astype(np.float64)


def _finish(
    value: np.ndarray, fmt: FloatFormat, mode: RoundingMode | str, rng: RngStream | None
) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError("accumulator holds a non-finite value")
    return round_to(value, fmt, mode, rng)


def qdot(
    x: ArrayLike | QTensor,
    y: ArrayLike | QTensor,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    acc: AccumPrecision | str = AccumPrecision.WIDE32,
    rng: RngStream | None = None,
) -> float:
    """Dot product through one FMAC: wide accumulation, one output rounding."""
    xv, yv = _values(x), _values(y)
    if xv.ndim != 1 or xv.shape != yv.shape:
        raise ValueError(f"qdot needs equal-length vectors, got {xv.shape} and {yv.shape}")
    return float(_finish(accumulate(xv * yv, acc), fmt, mode, rng))


def qmatvec(
    a: ArrayLike | QTensor,
    x: ArrayLike | QTensor,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    acc: AccumPrecision | str = AccumPrecision.WIDE32,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Matrix-vector product; each output element is an independent ``qdot``.

    In stochastic mode draws are taken in row order, one per output element.
    """
    av, xv = _values(a), _values(x)
    if av.ndim != 2 or xv.ndim != 1 or av.shape[1] != xv.shape[0]:
        raise ValueError(f"qmatvec shape mismatch: {av.shape} @ {xv.shape}")
    return _finish(accumulate(av * xv, acc), fmt, mode, rng)


def qmatmul(
    a: ArrayLike | QTensor,
    b: ArrayLike | QTensor,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    acc: AccumPrecision | str = AccumPrecision.WIDE32,
    rng: RngStream | None = None,
) -> np.ndarray:
    """``a @ b`` with one rounding per output element."""
    av, bv = _values(a), _values(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ValueError(f"qmatmul shape mismatch: {av.shape} @ {bv.shape}")
    products = av[:, :, None] * bv[None, :, :]  # (m, k, n)
    return _finish(accumulate(np.moveaxis(products, 1, -1), acc), fmt, mode, rng)


_ELEMENTWISE: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "scale": np.multiply,
    "div": np.divide,
}


def qelementwise(
    op: str,
    a: ArrayLike | QTensor,
    b: ArrayLike | QTensor | float,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Exact float64 ``a op b`` followed by a single rounding.

    ``op`` is one of ``add``, ``sub``, ``mul``, ``scale`` (multiply by a
    scalar) or ``div``.
    """
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    av, bv = _values(a), _values(b)
    if op == "scale" and bv.ndim != 0:
        raise ValueError("scale expects a scalar second operand")
    if bv.ndim and av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    with np.errstate(all="ignore"):
        # float64 carries > 2p+2 bits for every supported format, so rounding
        # the float64 result again is the same as rounding the real result once
        exact = fn(av, bv)
    if not np.all(np.isfinite(exact)):
        raise NonFiniteError(f"{op} produced a non-finite value")
    out = round_to(exact, fmt, mode, rng)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op} overflowed {fmt.name}")
    return out
