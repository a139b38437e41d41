import numpy as np
import pytest

from peddet.errors import DimensionError
from peddet.signal import (
    boxcar_backward,
    boxcar_downsample,
    conv_full_adjoint,
    conv_valid,
    corr_same,
    pooled_shape,
    valid_shape,
)


def conv_valid_loop(x, k):
    """Independent quadruple-loop reference for valid cross-correlation."""
    p, q = x.shape
    m, mw = k.shape
    out = np.zeros((p - m + 1, q - mw + 1))
    for r in range(out.shape[0]):
        for c in range(out.shape[1]):
            acc = 0.0
            for u in range(m):
                for v in range(mw):
                    acc += x[r + u, c + v] * k[u, v]
            out[r, c] = acc
    return out


def test_conv_identity_kernel():
    x = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(conv_valid(x, np.array([[1.0]])), x)


def test_conv_zero_kernel():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 7))
    out = conv_valid(x, np.zeros((3, 3)))
    assert out.shape == (3, 5)
    assert np.all(out == 0)


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(42)
    x = rng.standard_normal((8, 8))
    k = rng.standard_normal((3, 3))
    assert np.allclose(conv_valid(x, k), conv_valid_loop(x, k), rtol=0, atol=1e-12)


def test_conv_rectangular_kernel_matches_loop():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((9, 6))
    k = rng.standard_normal((4, 2))
    assert np.allclose(conv_valid(x, k), conv_valid_loop(x, k), atol=1e-12)


def test_conv_kernel_too_large():
    with pytest.raises(DimensionError):
        conv_valid(np.zeros((2, 2)), np.zeros((3, 3)))


def test_conv_linearity():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.standard_normal((7, 9))
        y = rng.standard_normal((7, 9))
        k = rng.standard_normal((3, 3))
        a, b = rng.standard_normal(2)
        lhs = conv_valid(a * x + b * y, k)
        rhs = a * conv_valid(x, k) + b * conv_valid(y, k)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_adjoint_single_cell():
    rng = np.random.default_rng(1)
    k = rng.standard_normal((4, 4))
    s = 2.5
    out = conv_full_adjoint(np.array([[s]]), k)
    assert out.shape == (4, 4)
    assert np.allclose(out, s * k)


def test_adjoint_delta_kernel_zero_pads():
    rng = np.random.default_rng(2)
    y = rng.standard_normal((4, 5))
    for pos in [(0, 0), (1, 2)]:
        k = np.zeros((3, 3))
        k[pos] = 1.0
        out = conv_full_adjoint(y, k)
        assert out.shape == (6, 7)
        expect = np.zeros((6, 7))
        expect[pos[0] : pos[0] + 4, pos[1] : pos[1] + 5] = y
        assert np.allclose(out, expect)


def test_adjoint_identity_fixed_instance():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((6, 6))
    k = rng.standard_normal((3, 3))
    y = rng.standard_normal((4, 4))
    lhs = np.sum(conv_valid(x, k) * y)
    rhs = np.sum(x * conv_full_adjoint(y, k))
    assert abs(lhs - rhs) / max(abs(lhs), abs(rhs)) < 1e-10


def test_adjoint_identity_random_shapes():
    rng = np.random.default_rng(99)
    for _ in range(100):
        p = int(rng.integers(2, 12))
        q = int(rng.integers(2, 12))
        m = int(rng.integers(1, min(p, q) + 1))
        x = rng.standard_normal((p, q))
        k = rng.standard_normal((m, m))
        y = rng.standard_normal((p - m + 1, q - m + 1))
        lhs = np.sum(conv_valid(x, k) * y)
        rhs = np.sum(x * conv_full_adjoint(y, k))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), abs(rhs))


def test_boxcar_simple():
    out = boxcar_downsample(np.array([[1.0, 2.0], [3.0, 4.0]]), 2, 2)
    assert np.allclose(out, [[2.5]])


def test_boxcar_constant_map():
    for w, s in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        out = boxcar_downsample(np.full((3, 6, 7), 4.25), w, s)
        assert np.allclose(out, 4.25)


def test_boxcar_ramp_oracle():
    x = np.arange(16.0).reshape(4, 4)
    out = boxcar_downsample(x, 2, 2)
    assert np.allclose(out, [[2.5, 4.5], [10.5, 12.5]])


def test_boxcar_identity():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 5, 6))
    assert np.array_equal(boxcar_downsample(x, 1, 1), x)


def test_boxcar_window_mean_oracle_random():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((7, 9))
    w, s = 3, 2
    out = boxcar_downsample(x, w, s)
    oh, ow = pooled_shape((7, 9), w, s)
    assert out.shape == (oh, ow)
    for r in range(oh):
        for c in range(ow):
            assert np.isclose(out[r, c], x[r * s : r * s + w, c * s : c * s + w].mean())


def test_boxcar_drops_partial_windows():
    x = np.arange(25.0).reshape(5, 5)
    out = boxcar_downsample(x, 2, 2)
    assert out.shape == (2, 2)


def test_boxcar_window_too_large():
    with pytest.raises(DimensionError):
        boxcar_downsample(np.zeros((3, 3)), 4, 1)


def test_output_shapes_closed_form():
    rng = np.random.default_rng(6)
    for p, q, m in [(5, 5, 3), (8, 6, 4), (10, 12, 1), (7, 7, 7)]:
        x = rng.standard_normal((p, q))
        k = rng.standard_normal((m, m))
        assert conv_valid(x, k).shape == valid_shape((p, q), m)
        y = rng.standard_normal(valid_shape((p, q), m))
        assert conv_full_adjoint(y, k).shape == (p, q)
    for h, wd, w, s in [(6, 6, 2, 2), (7, 9, 3, 2), (5, 5, 5, 1), (9, 4, 2, 3)]:
        x = rng.standard_normal((2, h, wd))
        assert boxcar_downsample(x, w, s).shape == (2,) + pooled_shape((h, wd), w, s)


def test_boxcar_backward_is_adjoint():
    rng = np.random.default_rng(8)
    for w, s in [(2, 2), (3, 2), (2, 3), (1, 1)]:
        x = rng.standard_normal((2, 7, 8))
        out = boxcar_downsample(x, w, s)
        g = rng.standard_normal(out.shape)
        back = boxcar_backward(g, x.shape, w, s)
        assert abs(np.sum(out * g) - np.sum(x * back)) < 1e-10


def test_corr_same_shape_and_center():
    x = np.zeros((7, 7))
    x[3, 3] = 1.0
    k = np.arange(9.0).reshape(3, 3)
    k = k / k.sum()
    out = corr_same(x, k)
    assert out.shape == (7, 7)
    # impulse response reproduces the flipped kernel around the center
    assert np.isclose(out[3, 3], k[1, 1])
    assert np.isclose(out[2, 3], k[2, 1])


def test_outputs_finite_on_random_inputs():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((3, 10, 11)) * 1e6
    k = rng.standard_normal((3, 3))
    assert np.all(np.isfinite(conv_valid(x[0], k)))
    assert np.all(np.isfinite(boxcar_downsample(x, 2, 2)))
