import numpy as np
import pytest

from lprec.errors import NonFiniteError
from lprec.floatsim import BF16, RngStream, is_representable, round_nearest
from lprec.qlinalg import AccumPrecision, QTensor, accumulate, qdot, qelementwise, qmatmul, qmatvec


def test_qdot_examples():
    assert qdot([1.5, 2.5], [2.0, 4.0], BF16) == 13.0
    # the accumulator holds 1 + 2^-9 exactly; the single output rounding ties to even
    assert qdot([1.0, 2.0**-9], [1.0, 1.0], BF16) == 1.0
    assert qdot(np.ones(300), np.ones(300), BF16) == 300.0


def test_qdot_shape_errors():
    with pytest.raises(ValueError):
        qdot([1.0, 2.0], [1.0], BF16)
    with pytest.raises(ValueError):
        qdot(np.ones((2, 2)), np.ones((2, 2)), BF16)


def test_qdot_nonfinite_accumulator():
    with pytest.raises(NonFiniteError):
        qdot([3e38, 3e38], [1e10, 1e10], BF16)


def test_qdot_no_intermediate_16bit_rounding():
    # rounding every partial sum to BF16 would lose each half at the 255.5-style tie
    assert qdot([256.0, 0.5, 0.5, 0.5, 0.5], np.ones(5), BF16) == 258.0


def test_wide32_accumulator_rounds_each_step():
    big, tiny = 2.0**24, 1.0
    products = np.array([big, tiny, tiny])
    assert accumulate(products, AccumPrecision.WIDE32) == big  # each +1 lost in binary32
    assert accumulate(products, AccumPrecision.WIDE64) == big + 2


def test_accumulate_matches_float32_loop(rng):
    p = rng.standard_normal((50, 64))
    ref = []
    for row in p:
        s = np.float32(0)
        for v in row:
            s = np.float32(np.float64(s) + v)
        ref.append(float(s))
    assert np.array_equal(accumulate(p, "wide32"), np.array(ref))
    assert np.array_equal(np.array([accumulate(r, "wide32") for r in p]), np.array(ref))


def test_wide64_sequential_equals_python_sum(rng):
    for _ in range(200):
        p = rng.standard_normal(rng.integers(1, 40)) * 1e3
        s = 0.0
        for v in p:
            s += v
        assert accumulate(p, "wide64") == s


def test_wide32_close_to_wide64(rng):
    eps = BF16.machine_epsilon
    for n in (16, 256, 1024):
        x = round_nearest(rng.standard_normal(n), BF16)
        y = round_nearest(rng.standard_normal(n), BF16)
        exact = accumulate(x * y, "wide64")
        assert abs(accumulate(x * y, "wide32") - exact) <= eps / 4 * max(abs(exact), np.sum(np.abs(x * y)) / np.sqrt(n))


def test_qdot_single_rounding_bound(rng):
    eps = BF16.machine_epsilon
    for _ in range(500):
        n = int(rng.integers(1, 64))
        x = round_nearest(rng.standard_normal(n), BF16)
        y = round_nearest(rng.standard_normal(n), BF16)
        exact = accumulate(x * y, "wide64")
        wide = accumulate(x * y, "wide32")
        got = qdot(x, y, BF16)
        assert abs(got - wide) <= eps * abs(wide)
        assert abs(got - exact) <= eps * abs(exact) + abs(wide - exact) * (1 + eps)


def test_qmatvec_examples():
    assert np.array_equal(qmatvec(np.eye(2), [3.0, 5.0], BF16), [3.0, 5.0])
    assert np.array_equal(qmatvec([[1, 1], [1, -1]], [1.5, 0.5], BF16), [2.0, 1.0])
    assert np.array_equal(qmatvec(np.ones((1, 300)), np.ones(300), BF16), [300.0])
    with pytest.raises(ValueError):
        qmatvec(np.ones((2, 3)), np.ones(2), BF16)


def test_qmatvec_rows_are_qdots(rng):
    a = round_nearest(rng.standard_normal((7, 13)), BF16)
    x = round_nearest(rng.standard_normal(13), BF16)
    assert np.array_equal(qmatvec(a, x, BF16), [qdot(row, x, BF16) for row in a])


def test_qmatmul_matches_columns(rng):
    a = round_nearest(rng.standard_normal((5, 9)), BF16)
    b = round_nearest(rng.standard_normal((9, 4)), BF16)
    out = qmatmul(a, b, BF16)
    cols = np.stack([qmatvec(a, b[:, j], BF16) for j in range(4)], axis=1)
    assert np.array_equal(out, cols)
    assert np.all(is_representable(out, BF16))


def test_wide64_path_equals_direct_sequential(rng):
    for _ in range(100):
        a = rng.standard_normal((3, 8))
        x = rng.standard_normal(8)
        direct = np.array([_seq(row * x) for row in a])
        assert np.array_equal(accumulate(a * x, "wide64"), direct)


def _seq(p):
    s = 0.0
    for v in p:
        s += float(v)
    return s


def test_elementwise_examples():
    assert qelementwise("sub", 256.0, 0.5, BF16) == 256.0
    assert qelementwise("scale", 50.0, 0.01, BF16) == 0.5
    assert np.array_equal(qelementwise("add", [1.0, 2.0], [0.5, 0.25], BF16), [1.5, 2.25])
    assert qelementwise("div", 1.0, 3.0, BF16) == round_nearest(1 / 3, BF16)


def test_elementwise_stochastic_midpoint():
    r = RngStream(11)
    out = np.array([qelementwise("sub", 256.0, 0.5, BF16, "stochastic", r) for _ in range(4000)])
    assert set(np.unique(out)) == {255.0, 256.0}
    assert abs(np.mean(out == 255.0) - 0.5) < 3 * np.sqrt(0.25 / 4000)


def test_elementwise_errors():
    with pytest.raises(ValueError):
        qelementwise("pow", 1.0, 2.0, BF16)
    with pytest.raises(ValueError):
        qelementwise("add", [1.0, 2.0], [1.0, 2.0, 3.0], BF16)
    with pytest.raises(ValueError):
        qelementwise("scale", [1.0, 2.0], [1.0, 2.0], BF16)
    with pytest.raises(NonFiniteError):
        qelementwise("mul", 3e38, 3e38, BF16)
    with pytest.raises(NonFiniteError):
        qelementwise("div", 1.0, 0.0, BF16)


def test_qtensor_validation():
    t = QTensor.quantize([0.1, 0.2], BF16)
    assert t.shape == (2,) and len(t) == 2
    assert np.array_equal(np.asarray(t), round_nearest([0.1, 0.2], BF16))
    with pytest.raises(ValueError):
        QTensor(np.array([0.1]), BF16)
    with pytest.raises(ValueError):
        QTensor(np.zeros((2, 2, 2)), BF16)
    assert qdot(t, t, BF16) == qdot(t.data, t.data, BF16)
