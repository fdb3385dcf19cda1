import numpy as np
import pytest

from lprec.floatsim import BF16, FloatFormat, parse_format

LOW_FORMATS = ["E8M7", "E5M10", "E8M5", "E8M3", "E8M1"]


@pytest.fixture(params=LOW_FORMATS)
def fmt(request) -> FloatFormat:
    return parse_format(request.param)


@pytest.fixture
def bf16() -> FloatFormat:
    return BF16


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
