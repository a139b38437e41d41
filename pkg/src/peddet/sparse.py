"""Convolutional sparse coding with connection tables.

A layer reconstructs each input map i from the code maps j wired to it:

    recon_i = sum_{j in outputs_of(i)} place(z_j, D[i,j])

where `place` is the full-mode adjoint of valid correlation, so codes of
size (p-m+1, q-m+1) reconstruct a p x q input exactly. The energy being
minimized over z is

    sum_i || x_i - recon_i ||^2 + lam * ||z||_1

(no 1/2 factor on the quadratic term; lam is scaled accordingly).
Inference runs FISTA with an auto step size from power iteration;
dictionary updates use the analytic gradient of the quadratic term with
the code held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError
from .signal import (
    as_stack,
    conv_full_adjoint_bank,
    conv_valid_bank,
    valid_shape,
)

_POWER_ITERS = 20
_POWER_SEED = 1234


@dataclass(frozen=True)
class ConnectionTable:
    """Bipartite wiring between input maps and output (code) maps.

    `edges` is an ordered tuple of (input index i, output index j) pairs;
    the order defines the layout of every edge-indexed kernel bank
    (dictionary and predictor filters). Every output must be fed by at
    least one input and every input must be reconstructed by at least one
    output.
    """

    n_in: int
    n_out: int
    edges: tuple = ()
    _by_in: dict = field(init=False, repr=False, compare=False, default=None)
    _by_out: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(set(edges)) != len(edges):
            raise DimensionError("duplicate edges in connection table")
        by_in = {i: [] for i in range(self.n_in)}
        by_out = {j: [] for j in range(self.n_out)}
        for e, (i, j) in enumerate(edges):
            if not (0 <= i < self.n_in and 0 <= j < self.n_out):
                raise DimensionError(f"edge ({i},{j}) outside table {self.n_in}x{self.n_out}")
            by_in[i].append(e)
            by_out[j].append(e)
        for i, es in by_in.items():
            if not es:
                raise DimensionError(f"input map {i} has no reconstructing outputs")
        for j, es in by_out.items():
            if not es:
                raise DimensionError(f"output map {j} has no feeding inputs")
        object.__setattr__(self, "_by_in", {i: np.array(es) for i, es in by_in.items()})
        object.__setattr__(self, "_by_out", {j: np.array(es) for j, es in by_out.items()})

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edges_from_input(self, i: int) -> np.ndarray:
        """Edge indices whose input side is map i."""
        return self._by_in[i]

    def edges_into_output(self, j: int) -> np.ndarray:
        """Edge indices whose output side is code map j."""
        return self._by_out[j]

    def inputs_of(self, j: int):
        """The set P_j: input map indices feeding output j."""
        return [self.edges[e][0] for e in self._by_out[j]]

    def outputs_of(self, i: int):
        """The inverse view: output map indices reconstructing input i."""
        return [self.edges[e][1] for e in self._by_in[i]]


def full_table(n_in: int, n_out: int) -> ConnectionTable:
    """All-to-all wiring, edges ordered by (output, input)."""
    edges = tuple((i, j) for j in range(n_out) for i in range(n_in))
    return ConnectionTable(n_in, n_out, edges)


def random_sparse_table(n_in: int, n_out: int, drop_fraction: float, rng) -> ConnectionTable:
    """Full table with a random fraction of edges removed.

    Retries the draw (deterministically from `rng`) until no input or
    output map is left orphaned.
    """
    all_edges = [(i, j) for j in range(n_out) for i in range(n_in)]
    n_drop = int(round(drop_fraction * len(all_edges)))
    for _ in range(100):
        drop = set(map(int, rng.choice(len(all_edges), size=n_drop, replace=False)))
        kept = tuple(e for k, e in enumerate(all_edges) if k not in drop)
        try:
            return ConnectionTable(n_in, n_out, kept)
        except DimensionError:
            continue
    raise DimensionError("could not draw a sparse table without orphan maps")


@dataclass
class FistaConfig:
    """Solver knobs: iteration cap, relative-objective stopping tolerance,
    and the gradient step size ('auto' = 1/L from power iteration)."""

    max_iters: int = 200
    tol: float = 1e-6
    step: float | str = "auto"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.step != "auto" and not self.step > 0:
            raise ValueError("step must be > 0 or 'auto'")


@dataclass
class FistaResult:
    """Best iterate found plus the bookkeeping the caller may report."""

    code: np.ndarray
    objective: float
    iterations: int
    converged: bool


def check_dictionary(D: np.ndarray, table: ConnectionTable, m: int = None):
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 3 or D.shape[0] != table.n_edges or D.shape[1] != D.shape[2]:
        raise DimensionError(
            f"dictionary shape {D.shape} does not match {table.n_edges} edges of square filters"
        )
    if m is not None and D.shape[1] != m:
        raise DimensionError(f"dictionary filter size {D.shape[1]} != declared {m}")
    return D


def code_shape(x_shape: tuple, table: ConnectionTable, m: int) -> tuple:
    return (table.n_out,) + valid_shape(x_shape[-2:], m)


def reconstruct(z: np.ndarray, D: np.ndarray, table: ConnectionTable, x_shape: tuple) -> np.ndarray:
    """Sum the full-mode placements of every code map through its edges."""
    z = as_stack(z)
    recon = np.zeros((table.n_in,) + tuple(x_shape[-2:]), dtype=np.float64)
    for j in range(table.n_out):
        es = table.edges_into_output(j)
        contrib = conv_full_adjoint_bank(z[j], D[es])
        i_idx = [table.edges[e][0] for e in es]
        recon[i_idx] += contrib
    return recon


def _code_gradient_quadratic(residual: np.ndarray, D: np.ndarray, table: ConnectionTable,
                             zshape: tuple) -> np.ndarray:
    """Gradient of ||x - recon||^2 w.r.t. z given residual = x - recon."""
    grad = np.zeros(zshape, dtype=np.float64)
    for i in range(table.n_in):
        es = table.edges_from_input(i)
        contrib = conv_valid_bank(residual[i], D[es])
        j_idx = [table.edges[e][1] for e in es]
        grad[j_idx] += contrib
    return -2.0 * grad


def coding_energy(x: np.ndarray, z: np.ndarray, D: np.ndarray, table: ConnectionTable,
                  lam: float) -> float:
    """Reconstruction error plus l1 penalty: sum_i ||x_i - recon_i||^2 + lam*||z||_1."""
    x = as_stack(x)
    z = as_stack(z)
    D = check_dictionary(D, table)
    expect = code_shape(x.shape, table, D.shape[1])
    if x.shape[0] != table.n_in or z.shape != expect:
        raise DimensionError(
            f"inconsistent shapes: x {x.shape}, z {z.shape}, expected code {expect}"
        )
    r = x - reconstruct(z, D, table, x.shape)
    return float(np.sum(r * r) + lam * np.sum(np.abs(z)))


def soft_threshold(v, tau):
    """Proximal map of tau*|.|: sign(v) * max(|v| - tau, 0). Elementwise."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("threshold must be >= 0")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def _estimate_lipschitz(D: np.ndarray, table: ConnectionTable, x_shape: tuple,
                        zshape: tuple) -> float:
    """2 * largest eigenvalue of the composed code->recon->code operator,
    from a fixed-seed power iteration. Slightly inflated because power
    iteration approaches the norm from below."""
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(zshape)
    v /= np.linalg.norm(v)
    lam_max = 0.0
    for _ in range(_POWER_ITERS):
        av = reconstruct(v, D, table, x_shape)
        w = 0.5 * _code_gradient_quadratic(-av, D, table, zshape)  # A^T A v
        lam_max = np.linalg.norm(w)
        if lam_max <= 1e-300:
            return 0.0
        v = w / lam_max
    return 2.0 * lam_max * 1.01


def fista_infer(x: np.ndarray, D: np.ndarray, table: ConnectionTable, lam: float,
                cfg: FistaConfig = None, return_info: bool = False):
    """Minimize coding_energy over the code stack z by FISTA.

    Momentum sequence t_1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2; the
    gradient step on the quadratic term uses the valid/full correlation
    adjoint pair. FISTA is not monotone, so the best-objective iterate
    seen is tracked and returned. Stops when the relative objective
    change drops below cfg.tol or at cfg.max_iters.

    Raises DivergenceError (naming the iteration) if the objective goes
    non-finite, which signals a step size that is too large.
    """
    cfg = cfg or FistaConfig()
    x = as_stack(x)
    D = check_dictionary(D, table)
    if lam < 0:
        raise ValueError("sparsity weight must be >= 0")
    zshape = code_shape(x.shape, table, D.shape[1])
    if zshape[1] < 1 or zshape[2] < 1:
        raise DimensionError(f"filters {D.shape[1]}x{D.shape[1]} too large for input {x.shape}")

    if cfg.step == "auto":
        lip = _estimate_lipschitz(D, table, x.shape, zshape)
        step = 1.0 / lip if lip > 0 else 1.0
    else:
        step = float(cfg.step)

    z = np.zeros(zshape)
    z_prev = z
    y = z
    t = 1.0
    best = coding_energy(x, z, D, table, lam)
    best_z = z
    f_prev = best
    iterations = 0
    converged = False
    for k in range(1, cfg.max_iters + 1):
        iterations = k
        residual = x - reconstruct(y, D, table, x.shape)
        grad = _code_gradient_quadratic(residual, D, table, zshape)
        z = soft_threshold(y - step * grad, step * lam)
        f = coding_energy(x, z, D, table, lam)
        if not np.isfinite(f):
            raise DivergenceError(f"non-finite objective at FISTA iteration {k}")
        if f < best:
            best, best_z = f, z
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = z + ((t - 1.0) / t_next) * (z - z_prev)
        z_prev, t = z, t_next
        if abs(f - f_prev) <= cfg.tol * max(1.0, abs(f_prev)):
            converged = True
            break
        f_prev = f

    result = FistaResult(code=best_z, objective=best, iterations=iterations, converged=converged)
    if return_info:
        return best_z, result
    return best_z


def dictionary_gradient(x: np.ndarray, z: np.ndarray, D: np.ndarray,
                        table: ConnectionTable) -> np.ndarray:
    """Gradient of the reconstruction term w.r.t. every edge filter, with
    the code held fixed. The l1 penalty contributes nothing.

    For edge (i, j): dE/dD = -2 * conv_valid(residual_i, z_j) with the
    code map acting as the correlation kernel.
    """
    x = as_stack(x)
    z = as_stack(z)
    D = check_dictionary(D, table)
    r = x - reconstruct(z, D, table, x.shape)
    grad = np.empty_like(D)
    for i in range(table.n_in):
        es = table.edges_from_input(i)
        j_idx = [table.edges[e][1] for e in es]
        grad[es] = -2.0 * conv_valid_bank(r[i], z[j_idx])
    return grad
