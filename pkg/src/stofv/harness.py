"""Experiment drivers: exact references, convergence tables, ensembles,
and coupled-path self-convergence across nested grids.

Stochastic studies couple refinement levels through a single Brownian
path: increments are drawn once on the finest time grid and assembled
into coarse increments by Gaussian aggregation, so differences between
levels measure discretization error only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux import MonotoneFaceFlux
from .mesh import TorusGrid, build_grid, cell_average, prolong, refine
from .noise import (CellNoiseTable, NoiseModel, build_cell_table,
                    couple_time_refinement, sample_increments)
from .scheme import (State, TimeGrid, Trajectory, cfl_time_grid, init_state,
                     run)


# ---------------------------------------------------------------------------
# exact reference solutions (zero noise)

def _frac(y):
    return np.mod(y, 1.0)


def exact_solution(kind: str, params: dict, x, t: float):
    """Entropy solution of a reference problem, periodized in x.

    kinds:
      linear_advection: params velocity c (scalar, 1D) and u0 callable.
      burgers_riemann: params u_l > u_r, x0; decreasing jump at x0
        travels as a shock at speed (u_l + u_r)/2 while the complementary
        increasing jump at x0 + 1/2 opens into a rarefaction fan.  Valid
        while the waves stay apart (t <= roughly 1/2 for (1, 0)).
      burgers_rarefaction: params u_l < u_r, x0; the same torus solution
        seen from the fan side (increasing jump placed at x0).
    """
    x = np.asarray(x, dtype=float)
    if kind == "linear_advection":
        c = float(params.get("velocity", 1.0))
        u0 = params["u0"]
        return u0(_frac(x - c * t))
    if kind == "burgers_rarefaction":
        swapped = dict(params)
        swapped["u_l"] = float(params.get("u_r", 1.0))
        swapped["u_r"] = float(params.get("u_l", 0.0))
        swapped["x0"] = float(params.get("x0", 0.25)) - 0.5
        return exact_solution("burgers_riemann", swapped, x, t)
    if kind != "burgers_riemann":
        raise ValueError(f"unknown reference kind {kind!r}")
    u_l = float(params.get("u_l", 1.0))
    u_r = float(params.get("u_r", 0.0))
    if u_l <= u_r:
        raise ValueError("burgers_riemann needs u_l > u_r")
    x0 = float(params.get("x0", 0.25))
    y = _frac(x - x0)
    if t == 0.0:
        return np.where(y < 0.5, u_r, u_l)
    s = 0.5 * (u_l + u_r)
    # region boundaries in the frame y = frac(x - x0):
    # shock from y=0 at speed s; fan centered at y=1/2 with edges u_r t, u_l t
    shock = s * t
    fan_lo = 0.5 + u_r * t
    fan_hi = 0.5 + u_l * t
    out = np.empty_like(y)
    left_of_shock = y < shock  # wrapped tail of the u_l plateau
    in_plateau_r = (y >= shock) & (y < fan_lo)
    in_fan = (y >= fan_lo) & (y <= fan_hi)
    out[left_of_shock] = u_l
    out[in_plateau_r] = u_r
    out[in_fan] = (y[in_fan] - 0.5) / t
    out[y > fan_hi] = u_l
    return out


def riemann_initial(params: dict) -> Callable:
    """Initial data matching exact_solution('burgers_riemann', params)."""
    def u0(x):
        return exact_solution("burgers_riemann", params, x, 0.0)
    return u0


def upwind_linear_reference(v0: np.ndarray, c: float, grid: TorusGrid,
                            time_grid: TimeGrid) -> np.ndarray:
    """Directly coded first-order upwind scheme for 1D advection at speed c;
    the monotone schemes must reproduce it exactly for linear flux."""
    v = v0.copy()
    m = grid.m
    for dt in time_grid.dts:
        lam = dt / grid.h
        if c >= 0:
            v = v - lam * c * (v - np.roll(v, 1))
        else:
            v = v - lam * c * (np.roll(v, -1) - v)
    return v


# ---------------------------------------------------------------------------
# convergence tables

@dataclass(frozen=True)
class TableRow:
    level: int
    m: int
    h: float
    dt: float
    n_paths: int
    p: int
    error: float
    stderr: float
    order: float  # log2 ratio against previous row; nan for the first


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[TableRow, ...]
    meta: dict = field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    @property
    def orders(self) -> np.ndarray:
        return np.array([r.order for r in self.rows])


TABLE_COLUMNS = ("level", "m", "h", "dt", "M", "p", "error", "stderr", "order")


def write_table_csv(table: ConvergenceTable, path,
                    header_lines: Sequence[str] = ()):
    with open(path, "w", newline="\n") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        f.write(",".join(TABLE_COLUMNS) + "\n")
        for r in table.rows:
            f.write(",".join([
                str(r.level), str(r.m), format(r.h, ".17g"),
                format(r.dt, ".17g"), str(r.n_paths), str(r.p),
                format(r.error, ".17g"), format(r.stderr, ".17g"),
                format(r.order, ".17g"),
            ]) + "\n")


def _orders(errors: Sequence[float]) -> list[float]:
    out = [float("nan")]
    for a, b in zip(errors, errors[1:]):
        out.append(float(np.log2(a / b)) if a > 0 and b > 0 else float("nan"))
    return out


def deterministic_convergence(
    m_list: Sequence[int],
    nf_for_grid: Callable[[TorusGrid], MonotoneFaceFlux],
    u0: Callable,
    exact: Callable[[np.ndarray, float], np.ndarray],
    t_final: float,
    theta: float = 0.5,
    p: int = 1,
    dim: int = 1,
    quad_order: int = 5,
) -> ConvergenceTable:
    """L^p errors at the final time against an exact solution, zero noise.

    The error compares cell values with cell averages of the exact
    solution, weighted by cell volume.
    """
    rows = []
    errors = []
    for level, m in enumerate(m_list):
        grid = build_grid(dim, m)
        nf = nf_for_grid(grid)
        tg = cfl_time_grid(grid, nf.flux.la, theta, t_final)
        state0 = init_state(u0, grid, quad_order)
        table = build_cell_table(NoiseModel(dim), grid)
        traj = run(state0, tg, nf, table, seed=0)
        ref = cell_average(lambda x: exact(x, t_final), grid, quad_order)
        diff = np.abs(traj.states[-1] - ref) ** p
        err = float((grid.cell_volume * diff.sum()) ** (1.0 / p))
        errors.append(err)
        rows.append((level, m, grid.h, float(tg.dts[0]), 1, p, err, 0.0))
    orders = _orders(errors)
    return ConvergenceTable(tuple(
        TableRow(*row, order=orders[i]) for i, row in enumerate(rows)))


# ---------------------------------------------------------------------------
# Monte Carlo ensembles

@dataclass(frozen=True)
class EnsembleStats:
    """Final-time L^p moment estimate over independent paths."""

    n_paths: int
    p: int
    lp_mean: float
    lp_se: float
    final_energy_mean: float
    trajectories: tuple[Trajectory, ...] | None = None


def mc_ensemble(
    state0: State,
    time_grid: TimeGrid,
    nf: MonotoneFaceFlux,
    table: CellNoiseTable,
    seed: int,
    n_paths: int,
    p: int = 2,
    keep_records: bool = False,
    keep_trajectories: bool = False,
) -> EnsembleStats:
    """Run independent paths with disjoint counter streams (path index
    feeds the generator, so results do not depend on schedule)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    vol = state0.grid.cell_volume
    lp = np.empty(n_paths)
    energy = np.empty(n_paths)
    trajs = []
    for j in range(n_paths):
        traj = run(state0, time_grid, nf, table, seed=seed, path=j,
                   keep_records=keep_records)
        lp[j] = vol * float(np.sum(np.abs(traj.states[-1]) ** p))
        energy[j] = 0.5 * vol * float(np.sum(traj.states[-1] ** 2))
        if keep_trajectories:
            trajs.append(traj)
    se = float(lp.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return EnsembleStats(
        n_paths=n_paths, p=p, lp_mean=float(lp.mean()), lp_se=se,
        final_energy_mean=float(energy.mean()),
        trajectories=tuple(trajs) if keep_trajectories else None)


# ---------------------------------------------------------------------------
# coupled-path self-convergence

def _split_time_grid(tg: TimeGrid, factor: int) -> TimeGrid:
    """Refine every step into ``factor`` equal substeps."""
    times = [0.0]
    for n in range(tg.n_steps):
        dt = tg.dts[n] / factor
        base = tg.times[n]
        for j in range(1, factor + 1):
            times.append(base + j * dt)
    times = np.asarray(times)
    times[-1] = tg.t_final
    return TimeGrid(t_final=tg.t_final, times=times, dts=np.diff(times))


def _coupled_increments(seed: int, path: int, k_max: int,
                        fine_tg: TimeGrid, factor: int) -> Callable[[int], np.ndarray]:
    """Increment provider for a level whose every step tiles ``factor``
    steps of the finest time grid, where the increments are drawn."""
    if factor == 1:
        return lambda n: sample_increments(seed, n, k_max, path)

    def provider(n: int) -> np.ndarray:
        lo = n * factor
        dts = fine_tg.dts[lo:lo + factor]
        x = np.stack([sample_increments(seed, q, k_max, path)
                      for q in range(lo, lo + factor)])
        return couple_time_refinement(dts, x)

    return provider


def _space_time_l1(coarse: Trajectory, fine: Trajectory,
                   children: np.ndarray) -> float:
    """||v_coarse - v_fine||_{L^1(torus x (0,T))} with the coarse field
    prolonged cell-constant in space and both fields left-constant in
    time on the fine time grid (which splits each coarse step in two)."""
    fine_grid = fine.grid
    total = 0.0
    for q in range(fine.time_grid.n_steps):
        vc = prolong(coarse.states[q // 2], children, fine_grid)
        diff = np.abs(vc - fine.states[q])
        total += float(fine.time_grid.dts[q]) * fine_grid.cell_volume * float(diff.sum())
    return total


def coupled_refinement_study(
    dim: int,
    m_list: Sequence[int],
    nf_for_grid: Callable[[TorusGrid], MonotoneFaceFlux],
    model: NoiseModel,
    u0: Callable,
    t_final: float,
    theta: float,
    n_paths: int,
    seed: int,
    p: int = 1,
    quad_order: int = 5,
) -> ConvergenceTable:
    """E ||v_h - v_{h/2}||_{L^1(torus x (0,T))} across nested grids on a
    shared Brownian path per ensemble member.

    Grids must double: the coarse time grid is built by the CFL rule on
    the coarsest level and each finer level splits every step in two, so
    coarse increments are exact Gaussian aggregates of the fine ones.
    """
    m_list = list(m_list)
    for a, b in zip(m_list, m_list[1:]):
        if b != 2 * a:
            raise ValueError("mesh sizes must double between levels")
    grids = [build_grid(dim, m) for m in m_list]
    children_maps = []
    for g in grids[:-1]:
        fine, children = refine(g)
        children_maps.append(children)
    nfs = [nf_for_grid(g) for g in grids]
    la = nfs[0].flux.la
    base_tg = cfl_time_grid(grids[0], la, theta, t_final)
    tgs = [_split_time_grid(base_tg, 2**i) if i else base_tg
           for i in range(len(grids))]
    finest_tg = tgs[-1]
    factors = [2 ** (len(grids) - 1 - i) for i in range(len(grids))]
    states0 = [init_state(u0, g, quad_order) for g in grids]
    tables = [build_cell_table(model, g) for g in grids]
    k_max = model.k_max

    n_pairs = len(grids) - 1
    errs = np.zeros((n_paths, n_pairs))
    for j in range(n_paths):
        trajs = []
        for i, g in enumerate(grids):
            provider = _coupled_increments(seed, j, k_max, finest_tg, factors[i])
            trajs.append(run(states0[i], tgs[i], nfs[i], tables[i], seed=seed,
                             path=j, increments_for_step=provider))
        for i in range(n_pairs):
            errs[j, i] = _space_time_l1(trajs[i], trajs[i + 1], children_maps[i])

    means = errs.mean(axis=0)
    ses = (errs.std(axis=0, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 \
        else np.zeros(n_pairs)
    orders = _orders(list(means))
    rows = []
    for i in range(n_pairs):
        rows.append(TableRow(
            level=i, m=m_list[i], h=grids[i].h, dt=float(tgs[i].dts[0]),
            n_paths=n_paths, p=p, error=float(means[i]), stderr=float(ses[i]),
            order=orders[i]))
    return ConvergenceTable(tuple(rows), meta={"seed": seed})
