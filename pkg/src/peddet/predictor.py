"""Feed-forward encoder approximating the optimal sparse code.

Each output map j is a gain-scaled tanh over the summed valid
correlations of its wired input maps:

    out_j = g_j * tanh( sum_{i in inputs_of(j)} corr(x_i, k[j,i]) + b_j )

The same parameter layout carries both the encoder-to-code training
objective (squared distance to a fixed target code) and the supervised
fine-tuning path, so the backward helpers here accept an arbitrary
upstream gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .signal import as_stack, conv_full_adjoint_bank, conv_valid_bank, valid_shape
from .sparse import ConnectionTable


@dataclass
class PredictorParams:
    """Edge-indexed kernel bank plus per-output gain and bias.

    kernels: (n_edges, m, m), same edge order as the connection table;
    gain, bias: (n_out,).
    """

    kernels: np.ndarray
    gain: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.gain = np.asarray(self.gain, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernels.ndim != 3:
            raise DimensionError(f"kernel bank must be 3-D, got {self.kernels.shape}")
        if self.gain.shape != self.bias.shape or self.gain.ndim != 1:
            raise DimensionError("gain and bias must be 1-D of equal length")

    def check(self, table: ConnectionTable):
        if self.kernels.shape[0] != table.n_edges:
            raise DimensionError(
                f"{self.kernels.shape[0]} kernels for {table.n_edges} table edges"
            )
        if self.gain.shape[0] != table.n_out:
            raise DimensionError(f"{self.gain.shape[0]} gains for {table.n_out} outputs")

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.kernels.copy(), self.gain.copy(), self.bias.copy())


def init_predictor(table: ConnectionTable, m: int, rng) -> PredictorParams:
    """Kernels uniform in +-1/sqrt(fan_in * m^2) where fan_in is the number
    of input maps wired into the output; gains 1, biases 0."""
    kernels = np.empty((table.n_edges, m, m))
    for j in range(table.n_out):
        es = table.edges_into_output(j)
        bound = 1.0 / np.sqrt(len(es) * m * m)
        kernels[es] = rng.uniform(-bound, bound, size=(len(es), m, m))
    return PredictorParams(kernels, np.ones(table.n_out), np.zeros(table.n_out))


def preactivation(x: np.ndarray, table: ConnectionTable, params: PredictorParams) -> np.ndarray:
    """Summed edge correlations plus bias, before tanh and gain."""
    x = as_stack(x)
    params.check(table)
    if x.shape[0] != table.n_in:
        raise DimensionError(f"{x.shape[0]} input maps for table with {table.n_in}")
    m = params.kernels.shape[1]
    oh, ow = valid_shape(x.shape[1:], m)
    if oh < 1 or ow < 1:
        raise DimensionError(f"kernel {m}x{m} larger than maps {x.shape[1:]}")
    s = np.zeros((table.n_out, oh, ow))
    for i in range(table.n_in):
        es = table.edges_from_input(i)
        j_idx = [table.edges[e][1] for e in es]
        s[j_idx] += conv_valid_bank(x[i], params.kernels[es])
    return s + params.bias[:, None, None]


def predict(x: np.ndarray, table: ConnectionTable, params: PredictorParams) -> np.ndarray:
    """Encoder output stack, one (p-m+1, q-m+1) map per table output."""
    s = preactivation(x, table, params)
    return params.gain[:, None, None] * np.tanh(s)


def prediction_energy(target: np.ndarray, predicted: np.ndarray) -> float:
    """Squared Frobenius distance between code stacks."""
    target = as_stack(target)
    predicted = as_stack(predicted)
    if target.shape != predicted.shape:
        raise DimensionError(f"shape mismatch {target.shape} vs {predicted.shape}")
    d = target - predicted
    return float(np.sum(d * d))


def backward(x: np.ndarray, table: ConnectionTable, params: PredictorParams,
             preact: np.ndarray, grad_out: np.ndarray, need_input_grad: bool = False):
    """Chain an upstream gradient on the encoder output through tanh.

    Returns (PredictorParams-shaped gradient, grad w.r.t. x or None).
    `preact` must be the preactivation(x, ...) of the same forward pass.
    """
    x = as_stack(x)
    th = np.tanh(preact)
    grad_gain = np.sum(grad_out * th, axis=(1, 2))
    g_pre = grad_out * params.gain[:, None, None] * (1.0 - th * th)
    grad_bias = np.sum(g_pre, axis=(1, 2))
    grad_k = np.empty_like(params.kernels)
    for i in range(table.n_in):
        es = table.edges_from_input(i)
        j_idx = [table.edges[e][1] for e in es]
        grad_k[es] = conv_valid_bank(x[i], g_pre[j_idx])
    grad_x = None
    if need_input_grad:
        grad_x = np.zeros_like(x)
        for j in range(table.n_out):
            es = table.edges_into_output(j)
            i_idx = [table.edges[e][0] for e in es]
            grad_x[i_idx] += conv_full_adjoint_bank(g_pre[j], params.kernels[es])
    return PredictorParams(grad_k, grad_gain, grad_bias), grad_x


def predictor_gradient(x: np.ndarray, target: np.ndarray, table: ConnectionTable,
                       params: PredictorParams) -> PredictorParams:
    """Gradient of prediction_energy(target, predict(x)) w.r.t. g, k, b."""
    target = as_stack(target)
    s = preactivation(x, table, params)
    predicted = params.gain[:, None, None] * np.tanh(s)
    if predicted.shape != target.shape:
        raise DimensionError(f"target {target.shape} vs prediction {predicted.shape}")
    grad_out = -2.0 * (target - predicted)
    grads, _ = backward(x, table, params, s, grad_out)
    return grads
