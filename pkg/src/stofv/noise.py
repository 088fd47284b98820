"""Multiplicative noise with compact support and reproducible Wiener paths.

The built-in noise family is separable,

    g_k(x, u) = sigma_k * max(1 - u^2, 0)^q * trig(2 pi kappa_k . x),

which vanishes for |u| >= 1, has sum_k |g_k|^2 <= D0 := sum_k sigma_k^2,
and admits exact per-cell averages through a single spatial factor per
mode and cell.

All randomness is drawn from a counter-based Philox generator keyed by a
64-bit seed; the counter encodes (path, step, mode, purpose/level), so
ensemble members, refinement levels and Brownian-bridge refinements never
share or reorder streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import TorusGrid, quadrature_nodes

_MASK = (1 << 64) - 1

# purpose codes in the fourth counter word (upper half)
_PURPOSE_INCREMENT = 0
_PURPOSE_BRIDGE = 1


@dataclass(frozen=True)
class ModeSpec:
    """One separable noise mode."""

    sigma: float
    freq: tuple[int, ...]
    kind: str = "sin"  # 'sin' or 'cos'
    q: int = 1

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError(f"mode kind must be 'sin' or 'cos', got {self.kind!r}")
        if self.q < 1:
            raise ValueError("mode exponent q must be >= 1")

    def spatial(self, x: np.ndarray) -> np.ndarray:
        """x has shape (..., dim); returns trig(2 pi kappa . x)."""
        phase = 2.0 * np.pi * (np.asarray(x) @ np.asarray(self.freq, dtype=float))
        return np.sin(phase) if self.kind == "sin" else np.cos(phase)

    def profile(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.maximum(1.0 - u * u, 0.0) ** self.q

    def value(self, x: np.ndarray, u) -> np.ndarray:
        return self.sigma * self.profile(u) * self.spatial(x)


@dataclass(frozen=True)
class NoiseModel:
    """Finite family of separable modes; zero noise is the empty family."""

    dim: int
    modes: tuple[ModeSpec, ...] = ()

    @property
    def k_max(self) -> int:
        return len(self.modes)

    @property
    def d0(self) -> float:
        """sum_k sigma_k^2; bounds G^2(x, u) everywhere."""
        return sum(m.sigma**2 for m in self.modes)

    @property
    def d1(self) -> float:
        """Spatial-regularity constant: with cell diameter sqrt(N) h the
        per-cell average satisfies sum_k |g_{k,K}(u) - g_k(x,u)|^2 <= d1 h^2."""
        return self.dim * sum(
            (m.sigma * 2.0 * np.pi * np.linalg.norm(m.freq)) ** 2 for m in self.modes
        )

    def g_squared(self, x: np.ndarray, u) -> np.ndarray:
        out = 0.0
        for m in self.modes:
            out = out + m.value(x, u) ** 2
        return np.asarray(out, dtype=float)


@dataclass(frozen=True)
class CellNoiseTable:
    """Per-cell averaged modes g_{k,K}(u) = factor_{k,K} * sigma_k * profile(u).

    The spatial factors are fixed quadrature averages of each mode's
    spatial part over each cell; evaluation in u is lazy and vectorized.
    Immutable and freely shareable.
    """

    model: NoiseModel
    grid: TorusGrid
    factors: np.ndarray  # (k_max, n_cells)

    def eval_mode(self, k: int, u_cells: np.ndarray) -> np.ndarray:
        """g_{k,K}(u_K) for a per-cell state vector (or broadcastable u)."""
        m = self.model.modes[k]
        return m.sigma * m.profile(u_cells) * self.factors[k]

    def eval_all(self, u_cells: np.ndarray) -> np.ndarray:
        """All modes at once: shape (k_max, n_cells)."""
        if self.model.k_max == 0:
            return np.zeros((0, self.grid.n_cells))
        return np.stack([self.eval_mode(k, u_cells) for k in range(self.model.k_max)])

    def g_squared(self, u_cells: np.ndarray) -> np.ndarray:
        """G^2_K(u_K) = sum_k |g_{k,K}(u_K)|^2, shape (n_cells,)."""
        if self.model.k_max == 0:
            return np.zeros(np.broadcast_shapes(np.shape(u_cells), (self.grid.n_cells,)))
        g = self.eval_all(u_cells)
        return np.sum(g * g, axis=0)

    def eval_u_grid(self, k: int, us: np.ndarray) -> np.ndarray:
        """g_{k,K}(u) on a common u grid: shape (n_cells, len(us))."""
        m = self.model.modes[k]
        return m.sigma * np.outer(self.factors[k], m.profile(us))


def build_cell_table(
    model: NoiseModel, grid: TorusGrid, quad_order: int = 3
) -> CellNoiseTable:
    """Average each mode's spatial part over every cell by Gauss-Legendre."""
    if model.dim != grid.dim:
        raise ValueError("noise model dimension does not match grid dimension")
    if model.k_max == 0:
        return CellNoiseTable(model, grid, np.zeros((0, grid.n_cells)))
    nodes, w = quadrature_nodes(grid, quad_order)
    factors = np.stack([m.spatial(nodes) @ w for m in model.modes])
    return CellNoiseTable(model, grid, factors)


def _generator(seed: int, word0: int, word1: int, word2: int, word3: int):
    key = np.array([seed & _MASK, 0x5F0F1E2D3C4B5A69], dtype=np.uint64)
    counter = np.array(
        [word0 & _MASK, word1 & _MASK, word2 & _MASK, word3 & _MASK], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def sample_increments(seed: int, step: int, k_max: int, path: int = 0) -> np.ndarray:
    """Standard normal variates X^{n+1}_k, a pure function of
    (seed, path, step, k).  Same arguments give a bit-identical vector."""
    if k_max == 0:
        return np.zeros(0)
    gen = _generator(seed, path, step, 0, _PURPOSE_INCREMENT << 32)
    return gen.standard_normal(k_max)


def couple_time_refinement(dts_fine: np.ndarray, x_fine: np.ndarray) -> np.ndarray:
    """Coarse-step increment from the fine substeps tiling it.

    ``dts_fine`` has shape (j,), ``x_fine`` shape (j, k_max).  Returns
    sum_j sqrt(dt_j) X_j / sqrt(sum_j dt_j), marginally N(0, 1) per mode.
    """
    dts_fine = np.asarray(dts_fine, dtype=float)
    x_fine = np.asarray(x_fine, dtype=float)
    if dts_fine.ndim != 1 or x_fine.shape[0] != dts_fine.shape[0]:
        raise ValueError("substep increments do not tile the coarse step")
    total = dts_fine.sum()
    if total <= 0:
        raise ValueError("coarse step must have positive length")
    return (np.sqrt(dts_fine) @ x_fine) / np.sqrt(total)


def brownian_bridge(
    seed: int,
    step: int,
    k: int,
    dt: float,
    endpoint: float,
    levels: int,
    path: int = 0,
) -> np.ndarray:
    """Dyadic Brownian-bridge refinement of one step's increment.

    Returns beta(t_n + j dt/2^levels) - beta(t_n) for j = 0..2^levels,
    conditioned on the step's endpoint increment.  Midpoint draws are keyed
    by (seed, path, step, k, level), so refining further never changes the
    coarser values.
    """
    vals = np.array([0.0, endpoint])
    tau = dt
    for level in range(1, levels + 1):
        n_mid = vals.size - 1
        gen = _generator(seed, path, step, k, (_PURPOSE_BRIDGE << 32) | level)
        z = gen.standard_normal(n_mid)
        mids = 0.5 * (vals[:-1] + vals[1:]) + np.sqrt(tau / 4.0) * z
        out = np.empty(2 * n_mid + 1)
        out[0::2] = vals
        out[1::2] = mids
        vals = out
        tau /= 2.0
    return vals
