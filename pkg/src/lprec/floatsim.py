"""Reduced-precision binary float formats simulated on float64 carriers.

Every value handled here is an ordinary ``float64``; a format only constrains
which of those values are allowed. Rounding maps an arbitrary float64 onto the
representable subset, either to the nearest value (ties to even) or
stochastically between the two neighbours.

Formats follow the IEEE 754 layout: sign bit, ``exponent_bits`` biased
exponent, ``mantissa_bits`` explicit fraction bits, gradual underflow, and the
all-ones exponent reserved for inf/NaN.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from lprec.errors import ConfigError, FormatOverflowError

__all__ = [
    "FloatFormat",
    "RoundingMode",
    "RngStream",
    "BF16",
    "FP16",
    "FP32",
    "E8M5",
    "E8M3",
    "E8M1",
    "PRESETS",
    "parse_format",
    "decode",
    "encode",
    "round_nearest",
    "round_stochastic",
    "round_to",
    "neighbors",
    "machine_epsilon",
    "is_representable",
    "ulp",
]


@dataclass(frozen=True)
class FloatFormat:
    """An ``E<exponent_bits>M<mantissa_bits>`` binary float format.

    ``mantissa_bits`` counts explicit stored fraction bits (the leading 1 of a
    normal number is implicit).
    """

    exponent_bits: int
    mantissa_bits: int

    def __post_init__(self) -> None:
        if not 2 <= self.exponent_bits <= 8:
            raise ConfigError(f"exponent_bits must be in [2, 8], got {self.exponent_bits}")
        if not 1 <= self.mantissa_bits <= 23:
            raise ConfigError(f"mantissa_bits must be in [1, 23], got {self.mantissa_bits}")

    @property
    def name(self) -> str:
        return f"E{self.exponent_bits}M{self.mantissa_bits}"

    def __str__(self) -> str:
        return self.name

    @property
    def width(self) -> int:
        return 1 + self.exponent_bits + self.mantissa_bits

    @cached_property
    def bias(self) -> int:
        return 2 ** (self.exponent_bits - 1) - 1

    @cached_property
    def emin(self) -> int:
        """Unbiased exponent of the smallest normal binade."""
        return 1 - self.bias

    @cached_property
    def emax(self) -> int:
        return self.bias

    @cached_property
    def machine_epsilon(self) -> float:
        return float(np.ldexp(1.0, -self.mantissa_bits - 1))

    @cached_property
    def max_finite(self) -> float:
        return float(np.ldexp(2.0 - np.ldexp(1.0, -self.mantissa_bits), self.emax))

    @cached_property
    def min_positive_normal(self) -> float:
        return float(np.ldexp(1.0, self.emin))

    @cached_property
    def min_positive_subnormal(self) -> float:
        return float(np.ldexp(1.0, self.emin - self.mantissa_bits))

    @cached_property
    def largest_below_one(self) -> float:
        return 1.0 - float(np.ldexp(1.0, -self.mantissa_bits - 1))


BF16 = FloatFormat(8, 7)
FP16 = FloatFormat(5, 10)
FP32 = FloatFormat(8, 23)
E8M5 = FloatFormat(8, 5)
E8M3 = FloatFormat(8, 3)
E8M1 = FloatFormat(8, 1)

PRESETS: dict[str, FloatFormat] = {
    "BF16": BF16,
    "BFLOAT16": BF16,
    "FP16": FP16,
    "FLOAT16": FP16,
    "FP32": FP32,
    "FLOAT32": FP32,
}

_FORMAT_RE = re.compile(r"^E(\d+)M(\d+)$")


def parse_format(spec: str | FloatFormat) -> FloatFormat:
    """Parse ``"E8M7"``-style strings (or a preset alias such as ``"bf16"``)."""
    if isinstance(spec, FloatFormat):
        return spec
    key = spec.strip().upper()
    if key in PRESETS:
        return PRESETS[key]
    m = _FORMAT_RE.match(key)
    if m is None:
        raise ConfigError(f"unrecognised format string {spec!r}; expected E<e>M<m>")
    return FloatFormat(int(m.group(1)), int(m.group(2)))


class RoundingMode(str, Enum):
    NEAREST = "nearest"
    STOCHASTIC = "stochastic"


def machine_epsilon(fmt: FloatFormat) -> float:
    """Largest eps with ``eps*|u| <= |u - v| <= 2*eps*|u|`` for adjacent normals."""
    return fmt.machine_epsilon


# -- counter-based random streams ------------------------------------------

_U64 = (1 << 64) - 1


def _stream_key(*parts: object) -> int:
    """Stable 64-bit id for a tuple of names/ints (platform independent)."""
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class RngStream:
    """Reproducible uniform stream addressed by ``(seed, stream_id, counter)``.

    Backed by numpy's Philox4x64 counter-based generator keyed with
    ``(seed, stream_id)``; ``counter`` is the number of uniforms consumed so
    far, so any position of any stream can be recreated directly. One
    stochastic rounding consumes exactly one uniform per element.

    A stream is single-owner; use distinct ``stream_id`` values for parallel
    consumers.
    """

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0) -> None:
        self.seed = int(seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self._reset(int(counter))

    @classmethod
    def keyed(cls, seed: int, *names: object) -> RngStream:
        """Stream whose id is derived from human-readable names."""
        return cls(seed, _stream_key(*names))

    def _reset(self, counter: int) -> None:
        if counter < 0:
            raise ValueError("counter must be non-negative")
        block, skip = divmod(counter, 4)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key, counter=block))
        if skip:
            self._gen.random(skip)
        self.counter = counter

    def seek(self, counter: int) -> RngStream:
        self._reset(counter)
        return self

    def fork(self, stream_id: int) -> RngStream:
        return RngStream(self.seed, stream_id)

    def uniform(self, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
        """Uniform draws in [0, 1); advances ``counter`` by the number drawn."""
        out = self._gen.random(size)
        self.counter += 1 if size is None else int(np.prod(size))
        return out

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"


# -- rounding ---------------------------------------------------------------


def _spacing(ax: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    """Distance between consecutive representables in the binade of ``|x|``."""
    _, e = np.frexp(ax)
    # frexp gives |x| = f * 2**e with f in [0.5, 1); the binade exponent is e-1
    exp = np.maximum(e - 1, fmt.emin)
    return np.ldexp(1.0, exp - fmt.mantissa_bits)


def _round_nearest_scalar(v: float, fmt: FloatFormat) -> float:
    # same algorithm as the array path; scalars are rounded a few times per
    # training step, where ufunc dispatch would dominate
    if v == 0.0 or not math.isfinite(v):
        return v
    _, e = math.frexp(v)
    s = math.ldexp(1.0, max(e - 1, fmt.emin) - fmt.mantissa_bits)
    q = round(v / s) * s  # round() on a float is ties-to-even
    if abs(q) > fmt.max_finite:
        return math.copysign(math.inf, v)
    return math.copysign(q, v)


def round_nearest(x: ArrayLike, fmt: FloatFormat) -> np.ndarray:
    """Round to the nearest representable value, ties to even.

    Magnitudes at or beyond ``max_finite + ulp/2`` overflow to inf; NaN stays
    NaN. Returns a float64 array (0-d for scalar input).
    """
    if isinstance(x, (float, np.floating)) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return np.float64(_round_nearest_scalar(float(x), fmt))
    x = np.asarray(x, dtype=np.float64)
    # no floating-point exceptions can fire here: inf and NaN pass through the
    # power-of-two scaling unchanged, so no errstate guard is needed
    s = _spacing(np.abs(x), fmt)
    # x / s is exact (power-of-two scaling); np.rint is ties-to-even
    q = np.rint(x / s) * s
    return np.where(np.abs(q) > fmt.max_finite, np.copysign(np.inf, x), q)


def neighbors(x: ArrayLike, fmt: FloatFormat) -> tuple[np.ndarray, np.ndarray]:
    """``(a_l, a_u)``: largest representable <= x and smallest representable >= x."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(x)):
        raise ValueError("neighbors() of NaN")
    if np.any(np.abs(x) > fmt.max_finite):
        raise FormatOverflowError(f"value beyond {fmt.name} max_finite {fmt.max_finite}")
    s = _spacing(np.abs(x), fmt)
    r = x / s
    return np.floor(r) * s, np.ceil(r) * s


def round_stochastic(
    x: ArrayLike,
    fmt: FloatFormat,
    rng: RngStream,
    method: str = "exact",
) -> np.ndarray:
    """Round up to ``a_u`` with probability ``(x - a_l) / (a_u - a_l)``.

    ``method="exact"`` computes the probability from the float64 neighbours.
    ``method="bits"`` is the hardware-style shortcut: add a random integer to
    the discarded low bits of the float64 pattern and truncate. Both consume
    one uniform per element and give the same distribution.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(x)):
        raise FormatOverflowError("stochastic rounding of a non-finite value")
    u = np.asarray(rng.uniform(x.shape if x.shape else None))
    if method == "exact":
        lo, hi = neighbors(x, fmt)
        gap = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            p_up = np.where(gap > 0, (x - lo) / gap, 0.0)
        return np.where(u < p_up, hi, lo)
    if method == "bits":
        return _round_stochastic_bits(x, fmt, u)
    raise ValueError(f"unknown stochastic rounding method {method!r}")


def _round_stochastic_bits(x: np.ndarray, fmt: FloatFormat, u: np.ndarray) -> np.ndarray:
    lo, hi = neighbors(x, fmt)  # range check, and fallback for tiny values
    ax = np.atleast_1d(np.abs(x))
    _, e = np.frexp(ax)
    # float64 fraction bits that lie below the target format's last place
    drop = 52 - fmt.mantissa_bits + np.maximum(fmt.emin - (e - 1), 0)
    tiny = drop > 52
    drop = np.where(tiny, 0, drop).astype(np.uint64)
    span = np.uint64(1) << drop
    r = np.minimum(np.floor(np.atleast_1d(u) * span.astype(np.float64)).astype(np.uint64), span - np.uint64(1))
    bits = np.ascontiguousarray(ax).view(np.uint64)
    rounded = ((bits + r) & ~(span - np.uint64(1))).view(np.float64).reshape(x.shape)
    out = np.copysign(rounded, x)
    if np.any(tiny):
        # below half the smallest subnormal the float64 pattern trick does not apply
        with np.errstate(invalid="ignore", divide="ignore"):
            p_up = np.where(hi > lo, (x - lo) / (hi - lo), 0.0)
        out = np.where(tiny.reshape(x.shape), np.where(u < p_up, hi, lo), out)
    return np.where(x == 0, x, out)


def round_to(
    x: ArrayLike,
    fmt: FloatFormat,
    mode: RoundingMode | str = RoundingMode.NEAREST,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Dispatch on ``mode``; stochastic mode requires ``rng``."""
    mode = RoundingMode(mode)
    if mode is RoundingMode.NEAREST:
        return round_nearest(x, fmt)
    if rng is None:
        raise ValueError("stochastic rounding requires an RngStream")
    return round_stochastic(x, fmt, rng)


def is_representable(x: ArrayLike, fmt: FloatFormat) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return (round_nearest(x, fmt) == x) | np.isnan(x)


def ulp(x: ArrayLike, fmt: FloatFormat) -> np.ndarray:
    """Spacing of the format at ``x`` (upward spacing from the binade of ``|x|``)."""
    return _spacing(np.abs(np.asarray(x, dtype=np.float64)), fmt)


# -- bit patterns -----------------------------------------------------------


def decode(bits: ArrayLike, fmt: FloatFormat) -> np.ndarray:
    """Value of raw ``fmt.width``-bit patterns as float64."""
    b = np.asarray(bits, dtype=np.int64)
    if np.any((b < 0) | (b >= (1 << fmt.width))):
        raise ValueError(f"bit pattern does not fit in {fmt.width} bits")
    m_bits = fmt.mantissa_bits
    sign = np.where((b >> (fmt.width - 1)) & 1, -1.0, 1.0)
    exp = (b >> m_bits) & ((1 << fmt.exponent_bits) - 1)
    frac = (b & ((1 << m_bits) - 1)).astype(np.float64)
    exp_all_ones = (1 << fmt.exponent_bits) - 1
    normal = np.ldexp(1.0 + np.ldexp(frac, -m_bits), exp - fmt.bias)
    subnormal = np.ldexp(frac, fmt.emin - m_bits)
    special = np.where(frac == 0, np.inf, np.nan)
    mag = np.where(exp == 0, subnormal, np.where(exp == exp_all_ones, special, normal))
    return sign * mag


def encode(x: ArrayLike, fmt: FloatFormat) -> np.ndarray:
    """Bit patterns of ``x`` after nearest rounding.

    NaN encodes to the canonical quiet NaN (sign kept, top fraction bit set),
    so NaN payloads do not survive a decode/encode round trip.
    """
    x = round_nearest(x, fmt)
    m_bits = fmt.mantissa_bits
    exp_all_ones = (1 << fmt.exponent_bits) - 1
    sign = np.signbit(x).astype(np.int64) << (fmt.width - 1)
    ax = np.abs(x)
    finite = np.isfinite(ax)
    safe = np.where(finite, ax, 0.0)
    _, e = np.frexp(safe)
    is_normal = safe >= fmt.min_positive_normal
    exp_field = np.where(is_normal, e - 1 + fmt.bias, 0)
    scale_exp = np.where(is_normal, e - 1, fmt.emin)
    frac = np.ldexp(safe, m_bits - scale_exp)
    frac = np.where(is_normal, frac - (1 << m_bits), frac).astype(np.int64)
    out = (exp_field.astype(np.int64) << m_bits) | frac
    out = np.where(np.isinf(ax), exp_all_ones << m_bits, out)
    out = np.where(np.isnan(ax), (exp_all_ones << m_bits) | (1 << (m_bits - 1)), out)
    return sign | out
