"""Between-layer non-linearities: abs rectification, local contrast
normalization, boxcar down-sampling.

LCN subtracts a Gaussian-weighted local mean taken across all feature
maps, then divides by the local weighted standard deviation floored at
its per-sample mean:

    v_i   = x_i - sum_i' (w/n) (*) x_i'
    sigma = sqrt( sum_i (w/n) (*) v_i^2 )
    y_i   = v_i / max(c, sigma),   c = mean(sigma) over all locations

where (*) is same-size correlation and the 9x9 Gaussian w sums to 1 over
positions (so to 1 over positions and maps after the /n split). Near
borders the kernel is renormalized over its in-bounds mass, which keeps
the operation well defined even on maps smaller than the kernel. The
back-propagation helpers treat the divisive denominator as a constant of
the forward pass; only the subtractive path carries gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import as_stack, boxcar_downsample, corr_same


def gaussian_kernel(size: int = 9, sigma: float = 1.591) -> np.ndarray:
    """Odd-sized 2-D Gaussian with taps normalized to sum to 1."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    r = np.arange(size) - size // 2
    g1 = np.exp(-0.5 * (r / sigma) ** 2)
    k = np.outer(g1, g1)
    return k / k.sum()


@dataclass
class LcnConfig:
    """Gaussian weighting plus the floor for degenerate denominators."""

    gaussian: np.ndarray = field(default_factory=gaussian_kernel)
    epsilon: float = 1e-8

    def __post_init__(self):
        self.gaussian = np.asarray(self.gaussian, dtype=np.float64)
        if self.gaussian.ndim != 2 or np.any(self.gaussian < 0):
            raise ValueError("gaussian must be a non-negative 2-D kernel")
        if abs(float(self.gaussian.sum()) - 1.0) > 1e-12:
            raise ValueError("gaussian taps must sum to 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


def abs_rectify(x: np.ndarray) -> np.ndarray:
    """Elementwise absolute value; shape preserved."""
    a = np.asarray(x, dtype=np.float64)
    as_stack(a)  # shape validation only
    return np.abs(a)


def _border_mass(shape, kernel) -> np.ndarray:
    """In-bounds kernel mass per location (1 in the interior)."""
    return corr_same(np.ones(shape), kernel)


def _weighted_mean(stack: np.ndarray, kernel: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Across-map Gaussian mean with border renormalization."""
    return corr_same(stack.mean(axis=0), kernel) / mass


@dataclass
class LcnCache:
    """Forward intermediates needed by the frozen-denominator backward."""

    denom: np.ndarray
    dead: np.ndarray
    mass: np.ndarray


def lcn_forward(x: np.ndarray, cfg: LcnConfig, frozen: LcnCache = None):
    """LCN with cache; pass a previous cache to reuse its denominators."""
    x = as_stack(x)
    g = cfg.gaussian
    if frozen is not None:
        mass = frozen.mass
    else:
        mass = _border_mass(x.shape[1:], g)
    mean = _weighted_mean(x, g, mass)
    v = x - mean[None]
    if frozen is not None:
        denom, dead = frozen.denom, frozen.dead
    else:
        var = corr_same((v * v).mean(axis=0), g) / mass
        sigma = np.sqrt(np.maximum(var, 0.0))
        c = float(sigma.mean())
        denom = np.maximum(c, sigma)
        dead = denom < cfg.epsilon
    y = np.where(dead[None], 0.0, v / np.where(dead[None], 1.0, denom[None]))
    return y, LcnCache(denom=denom, dead=dead, mass=mass)


def lcn(x: np.ndarray, cfg: LcnConfig = None) -> np.ndarray:
    """Subtractive then divisive local contrast normalization."""
    y, _ = lcn_forward(x, cfg or LcnConfig())
    return y


def lcn_backward(grad_y: np.ndarray, cfg: LcnConfig, cache: LcnCache) -> np.ndarray:
    """Gradient w.r.t. x with the denominator held constant.

    dv_i = dy_i / denom (zero where the floor zeroed the output), then the
    subtractive stage routes the across-map mean back through the
    (symmetric) Gaussian.
    """
    grad_y = as_stack(grad_y)
    n = grad_y.shape[0]
    dv = np.where(cache.dead[None], 0.0, grad_y / np.where(cache.dead[None], 1.0, cache.denom[None]))
    flipped = cfg.gaussian[::-1, ::-1]
    pooled = corr_same(dv.sum(axis=0) / cache.mass, flipped) / n
    return dv - pooled[None]


def transform_stack(x: np.ndarray, lcn_cfg: LcnConfig, w: int, s: int) -> np.ndarray:
    """abs_rectify -> lcn -> boxcar_downsample, in that order exactly."""
    return boxcar_downsample(lcn(abs_rectify(x), lcn_cfg), w, s)
