"""Dense 2-D signal primitives shared by every other module.

Feature map stacks are plain float64 ndarrays of shape (n, h, w); single
maps are 2-D arrays. The convolution here is cross-correlation (no kernel
flip): learned filters absorb the orientation and filter dumps stay
directly interpretable. `conv_full_adjoint` is the exact adjoint of
`conv_valid` with respect to the input map, which is what the energy
gradients and the code-to-input reconstruction need.

All arithmetic is 64-bit; callers downcast only at the checkpoint
boundary.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError


def as_stack(x) -> np.ndarray:
    """Coerce to a float64 (n, h, w) stack; 2-D input becomes a 1-map stack."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3:
        raise DimensionError(f"expected 2-D map or 3-D stack, got shape {a.shape}")
    return a


def _windows(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """View of all kh x kw patches of a 2-D map, shape (oh, ow, kh, kw)."""
    p, q = x.shape
    if kh > p or kw > q:
        raise DimensionError(f"kernel {kh}x{kw} larger than map {p}x{q}")
    return sliding_window_view(x, (kh, kw))


def conv_valid(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Valid-mode cross-correlation of a 2-D map with a 2-D kernel.

    out[r, c] = sum_{u,v} x[r+u, c+v] * k[u, v], output shape
    (p-kh+1, q-kw+1).
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return np.tensordot(_windows(x, *k.shape), k, axes=([2, 3], [0, 1]))


def conv_valid_bank(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of one map against a (e, kh, kw) kernel bank.

    Returns (e, oh, ow). Equivalent to stacking conv_valid per kernel but
    shares the patch extraction.
    """
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    w = _windows(x, kernels.shape[1], kernels.shape[2])
    out = np.tensordot(w, kernels, axes=([2, 3], [1, 2]))
    return np.ascontiguousarray(np.moveaxis(out, 2, 0))


def conv_full_adjoint(y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Adjoint of conv_valid w.r.t. its input map.

    For y of shape (p-kh+1, q-kw+1) returns a p x q map satisfying
    <conv_valid(x, k), y> == <x, conv_full_adjoint(y, k)> for every x.
    This is the full-mode true convolution of y with k.
    """
    y = np.asarray(y, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    kh, kw = k.shape
    yp = np.pad(y, ((kh - 1, kh - 1), (kw - 1, kw - 1)))
    return np.tensordot(_windows(yp, kh, kw), k[::-1, ::-1], axes=([2, 3], [0, 1]))


def conv_full_adjoint_bank(y: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """conv_full_adjoint of one map against a (e, kh, kw) bank -> (e, p, q)."""
    y = np.asarray(y, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    kh, kw = kernels.shape[1], kernels.shape[2]
    yp = np.pad(y, ((kh - 1, kh - 1), (kw - 1, kw - 1)))
    w = _windows(yp, kh, kw)
    out = np.tensordot(w, kernels[:, ::-1, ::-1], axes=([2, 3], [1, 2]))
    return np.ascontiguousarray(np.moveaxis(out, 2, 0))


def corr_same(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Same-size cross-correlation with zero padding; kernel sides must be odd.

    The kernel is centered on each output location. Used by the contrast
    normalization stage, whose 9x9 Gaussian is symmetric, making this
    operator self-adjoint up to the zero padding.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    kh, kw = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(f"same-mode kernel sides must be odd, got {kh}x{kw}")
    xp = np.pad(x, ((kh // 2, kh // 2), (kw // 2, kw // 2)))
    return np.tensordot(_windows(xp, kh, kw), k, axes=([2, 3], [0, 1]))


def boxcar_downsample(x: np.ndarray, w: int, s: int) -> np.ndarray:
    """Average pooling with a w x w boxcar and stride s in both directions.

    Windows start at multiples of s; trailing rows/columns that do not
    fill a window are dropped. Accepts a stack (n, h, w) or a single 2-D
    map and preserves the input's dimensionality.
    """
    if w < 1 or s < 1:
        raise DimensionError(f"window {w} and stride {s} must be >= 1")
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 2
    stack = as_stack(a)
    n, h, wd = stack.shape
    if w > h or w > wd:
        raise DimensionError(f"pool window {w} exceeds map size {h}x{wd}")
    oh = (h - w) // s + 1
    ow = (wd - w) // s + 1
    v = sliding_window_view(stack, (w, w), axis=(1, 2))[:, ::s, ::s]
    out = v[:, :oh, :ow].mean(axis=(3, 4))
    return out[0] if single else out


def boxcar_backward(grad_out: np.ndarray, in_shape: tuple, w: int, s: int) -> np.ndarray:
    """Adjoint of boxcar_downsample: spread each output gradient uniformly
    over its w x w input window (dropped trailing cells receive zero)."""
    g = as_stack(grad_out)
    n, oh, ow = g.shape
    out = np.zeros((n,) + tuple(in_shape[-2:]), dtype=np.float64)
    share = g / (w * w)
    for u in range(w):
        for v in range(w):
            out[:, u : u + oh * s : s, v : v + ow * s : s] += share
    if len(in_shape) == 2:
        return out[0]
    return out


def valid_shape(in_shape: tuple, m: int) -> tuple:
    """Output (h, w) of a valid m x m correlation over an (h, w) map."""
    return (in_shape[0] - m + 1, in_shape[1] - m + 1)


def pooled_shape(in_shape: tuple, w: int, s: int) -> tuple:
    """Output (h, w) of boxcar_downsample over an (h, w) map."""
    return ((in_shape[0] - w) // s + 1, (in_shape[1] - w) // s + 1)
