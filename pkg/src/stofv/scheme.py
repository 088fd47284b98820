"""Explicit finite-volume time stepper with splitting.

One step from v^n is a deterministic conservative update to the half
state v^{n+1/2},

    |K| (v^{n+1/2}_K - v^n_K) + dt * sum_L A_{K->L}(v^n_K, v^n_L) = 0,

followed by a stochastic Euler update with coefficients frozen at v^n
(not at the half state),

    v^{n+1}_K = v^{n+1/2}_K + sqrt(dt) * sum_k g_{k,K}(v^n_K) X^{n+1}_k.

Time grids are uniform with the last step trimmed so the steps sum to T
exactly; the step size comes from the strong CFL bound
dt = (1 - theta) * alpha^2 * h / (2 L_A).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux import MonotoneFaceFlux
from .mesh import TorusGrid, cell_average
from .noise import CellNoiseTable, brownian_bridge, sample_increments


class CFLError(ValueError):
    """Raised when a requested time step violates the CFL restriction."""


class BlowUpError(RuntimeError):
    """Raised when a state stops being finite."""


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t_0 < ... < t_{N_T} = T with steps dts[n] = t_{n+1} - t_n."""

    t_final: float
    times: np.ndarray
    dts: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.dts)

    @property
    def dt_max(self) -> float:
        return float(self.dts.max())


def cfl_time_grid(grid: TorusGrid, l_a: float, theta: float, t_final: float) -> TimeGrid:
    """Uniform steps dt = (1 - theta) alpha^2 h / (2 L_A), last step trimmed.

    The weaker per-step restriction dt * |dK|/|K| * L_A <= 1 follows and is
    asserted here as well.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if t_final <= 0.0:
        raise ValueError(f"final time must be positive, got {t_final}")
    if l_a <= 0.0:
        raise ValueError(f"Lipschitz constant must be positive, got {l_a}")
    dt = (1.0 - theta) * grid.alpha**2 * grid.h / (2.0 * l_a)
    dt = min(dt, 1.0)
    if dt * grid.boundary_area / grid.cell_volume * l_a > 1.0 + 1e-12:
        raise CFLError("strong CFL step fails the per-step flux budget")
    n_full = int(np.floor(t_final / dt + 1e-12))
    times = np.arange(n_full + 1) * dt
    if t_final - times[-1] > 1e-12 * max(t_final, 1.0):
        times = np.append(times, t_final)
    times[-1] = t_final
    return TimeGrid(t_final=t_final, times=times, dts=np.diff(times))


@dataclass(frozen=True)
class State:
    """Per-cell values at one time level."""

    grid: TorusGrid
    values: np.ndarray
    step: int
    time: float


@dataclass(frozen=True)
class StepRecord:
    """Everything one step read and produced."""

    step: int
    time: float
    dt: float
    v_pre: np.ndarray
    v_half: np.ndarray
    v_post: np.ndarray
    increments: np.ndarray  # (k_max,)


def init_state(u0: Callable[[np.ndarray], np.ndarray], grid: TorusGrid,
               quad_order: int = 3) -> State:
    """Project initial data onto cell constants by cell averaging.

    The projection is orthogonal in L^2, so it does not increase the norm.
    Warns when sampled data leaves [-1, 1], where the noise is supported.
    """
    values = cell_average(u0, grid, quad_order)
    if np.max(np.abs(values)) > 1.0 + 1e-12:
        warnings.warn("initial data exits [-1, 1]; noise vanishes outside",
                      stacklevel=2)
    return State(grid=grid, values=values, step=0, time=0.0)


def check_cfl(grid: TorusGrid, dt: float, l_bound: float) -> None:
    if dt * grid.boundary_area / grid.cell_volume * l_bound > 1.0 + 1e-12:
        raise CFLError(
            f"dt={dt} violates dt*|dK|/|K|*L={dt * grid.boundary_area / grid.cell_volume * l_bound:.6g} <= 1"
        )


def deterministic_half_step(
    values: np.ndarray,
    dt: float,
    nf: MonotoneFaceFlux,
    grid: TorusGrid,
    neighbors: np.ndarray | None = None,
) -> np.ndarray:
    """Conservative update v -> v - (dt/|K|) sum over faces of |K|L| F."""
    check_cfl(grid, dt, nf.lipschitz_bound())
    if neighbors is None:
        neighbors = grid.neighbor_table()
    total = np.zeros_like(values)
    col = 0
    for axis in range(grid.dim):
        for sign in (-1, 1):
            total += nf.value(values, values[neighbors[:, col]], axis, sign)
            col += 1
    return values - dt * grid.face_area / grid.cell_volume * total


def stochastic_step(
    v_half: np.ndarray,
    v_pre: np.ndarray,
    dt: float,
    table: CellNoiseTable,
    increments: np.ndarray,
) -> np.ndarray:
    """Euler noise update; coefficients evaluate at the pre-step state."""
    if table.model.k_max == 0:
        return v_half.copy()
    g = table.eval_all(v_pre)  # (k_max, n_cells)
    return v_half + np.sqrt(dt) * (increments @ g)


@dataclass(frozen=True)
class Trajectory:
    """A complete run: states at every time level, optional step records."""

    grid: TorusGrid
    time_grid: TimeGrid
    states: np.ndarray  # (n_steps + 1, n_cells)
    seed: int
    path: int
    records: tuple[StepRecord, ...] | None = None

    def state(self, n: int) -> State:
        return State(self.grid, self.states[n], n, float(self.time_grid.times[n]))

    def value_at(self, t: float) -> np.ndarray:
        """Left-constant-in-time reading: v(t) = v^n for t in [t_n, t_{n+1})."""
        times = self.time_grid.times
        if t < times[0] or t > times[-1]:
            raise ValueError(f"time {t} outside [0, {times[-1]}]")
        if t >= times[-1]:
            return self.states[-1]
        n = int(np.searchsorted(times, t, side="right")) - 1
        return self.states[n]


def run(
    state0: State,
    time_grid: TimeGrid,
    nf: MonotoneFaceFlux,
    table: CellNoiseTable,
    seed: int,
    path: int = 0,
    keep_records: bool = False,
    increments_for_step: Callable[[int], np.ndarray] | None = None,
) -> Trajectory:
    """Advance the scheme over the whole time grid.

    Increments for step n are drawn from the counter-based generator at
    (seed, path, n) before the step consumes them; ``increments_for_step``
    overrides the draw (used by coupled refinement studies).
    """
    grid = state0.grid
    check_cfl(grid, time_grid.dt_max, nf.lipschitz_bound())
    neighbors = grid.neighbor_table()
    k_max = table.model.k_max
    states = np.empty((time_grid.n_steps + 1, grid.n_cells))
    states[0] = state0.values
    records: list[StepRecord] = []
    v = state0.values.copy()
    for n, dt in enumerate(time_grid.dts):
        if increments_for_step is not None:
            x = np.asarray(increments_for_step(n), dtype=float)
        else:
            x = sample_increments(seed, n, k_max, path)
        v_half = deterministic_half_step(v, float(dt), nf, grid, neighbors)
        v_next = stochastic_step(v_half, v, float(dt), table, x)
        if not np.all(np.isfinite(v_next)):
            raise BlowUpError(f"non-finite state after step {n}")
        if keep_records:
            records.append(StepRecord(
                step=n, time=float(time_grid.times[n]), dt=float(dt),
                v_pre=v.copy(), v_half=v_half, v_post=v_next, increments=x,
            ))
        states[n + 1] = v_next
        v = v_next
    return Trajectory(
        grid=grid, time_grid=time_grid, states=states, seed=seed, path=path,
        records=tuple(records) if keep_records else None,
    )


def v_sharp(record: StepRecord, table: CellNoiseTable,
            beta: np.ndarray) -> np.ndarray:
    """Intra-step state v^{1/2}_K + sum_k g_{k,K}(v^n_K) (beta_k(t) - beta_k(t_n)).

    ``beta`` holds the per-mode Brownian displacements since t_n, shape
    (k_max,).  With beta = sqrt(dt) X this returns v^{n+1}.
    """
    if table.model.k_max == 0:
        return record.v_half.copy()
    g = table.eval_all(record.v_pre)
    return record.v_half + np.asarray(beta, dtype=float) @ g


def bridge_for_record(record: StepRecord, seed: int, levels: int,
                      path: int = 0) -> np.ndarray:
    """Brownian displacements on the step's dyadic grid, shape
    (k_max, 2^levels + 1), conditioned on the step's realized endpoint."""
    k_max = record.increments.shape[0]
    out = np.empty((k_max, 2**levels + 1))
    for k in range(k_max):
        endpoint = np.sqrt(record.dt) * record.increments[k]
        out[k] = brownian_bridge(seed, record.step, k, record.dt, endpoint,
                                 levels, path)
    return out
