"""Unit tests for the split time stepping scheme."""

import numpy as np
import pytest

from stofv.flux import MonotoneFaceFlux, burgers, make_flux
from stofv.mesh import build_grid
from stofv.noise import ModeSpec, NoiseModel, build_cell_table
from stofv.scheme import (BlowUpError, CFLError, TimeGrid, cfl_time_grid,
                          check_cfl, deterministic_half_step, init_state, run,
                          stochastic_step, v_sharp, bridge_for_record)


def _setup(m=16, dim=1, sigma=0.2, kind="godunov"):
    grid = build_grid(dim, m)
    nf = MonotoneFaceFlux(kind, burgers(dim))
    modes = (ModeSpec(sigma=sigma, freq=(1,) * dim, kind="sin", q=1),) if sigma else ()
    table = build_cell_table(NoiseModel(dim, modes), grid)
    return grid, nf, table


def test_cfl_time_grid_step_size():
    # dt = (1 - theta) alpha^2 h / (2 L_A)
    grid = build_grid(1, 16)
    tg = cfl_time_grid(grid, l_a=1.0, theta=0.5, t_final=0.5)
    assert tg.dts[0] == pytest.approx(0.5 * 0.25 * grid.h / 2)
    assert tg.dts.sum() == pytest.approx(0.5)
    assert tg.times[0] == 0.0
    assert tg.times[-1] == pytest.approx(0.5)
    assert tg.n_steps == len(tg.dts)


def test_check_cfl_raises():
    grid = build_grid(1, 16)
    with pytest.raises(CFLError):
        check_cfl(grid, dt=1.0, l_bound=1.0)
    check_cfl(grid, dt=grid.h / 4, l_bound=1.0)


def test_two_cell_half_step_oracle():
    # m=2 Burgers with v = (1, 0), dt = 1/32: the only nonzero face flux
    # is F(1,0) = 1/2 through both faces, so each cell changes by
    # dt * |dK| / |K| * 1/2 / 2 = 1/32 exactly
    grid = build_grid(1, 2)
    nf = MonotoneFaceFlux("godunov", burgers(1))
    v = np.array([1.0, 0.0])
    v_half = deterministic_half_step(v, 1.0 / 32.0, nf, grid)
    assert v_half[0] == 31.0 / 32.0
    assert v_half[1] == 1.0 / 32.0


def test_half_step_conserves_mass():
    grid, nf, _ = _setup(m=32)
    rng = np.random.default_rng(0)
    v = rng.uniform(-1, 1, grid.n_cells)
    v_half = deterministic_half_step(v, grid.h / 8, nf, grid)
    assert v_half.sum() == pytest.approx(v.sum(), abs=1e-12)


def test_half_step_max_principle_and_monotone():
    grid, nf, _ = _setup(m=32)
    rng = np.random.default_rng(1)
    v = rng.uniform(-1, 1, grid.n_cells)
    dt = grid.h / 8
    v_half = deterministic_half_step(v, dt, nf, grid)
    assert v_half.min() >= v.min() - 1e-14
    assert v_half.max() <= v.max() + 1e-14
    # monotone: raising the data nowhere lowers the update
    w = v + rng.uniform(0, 0.2, grid.n_cells)
    w_half = deterministic_half_step(w, dt, nf, grid)
    assert np.all(w_half >= v_half - 1e-14)


def test_stochastic_step_zero_noise_identity():
    grid, nf, table = _setup(sigma=0.0)
    v = np.linspace(-1, 1, grid.n_cells)
    out = stochastic_step(v, v, 0.01, table, np.zeros((0,)))
    assert np.array_equal(out, v)


def test_stochastic_step_frozen_coefficients():
    # coefficients are evaluated at the pre-step state, not the half step
    grid, nf, table = _setup()
    rng = np.random.default_rng(2)
    v_pre = rng.uniform(-0.9, 0.9, grid.n_cells)
    v_half = v_pre + 0.01
    x = np.array([1.0])
    dt = 0.01
    out = stochastic_step(v_half, v_pre, dt, table, x)
    expect = v_half + np.sqrt(dt) * table.eval_all(v_pre)[0]
    assert np.allclose(out, expect, atol=1e-15)


def test_init_state_projection_and_warning():
    grid = build_grid(1, 8)
    state = init_state(lambda x: 0.5 * np.sin(2 * np.pi * x[..., 0]), grid)
    assert state.values.shape == (8,)
    assert state.time == 0.0
    with pytest.warns(UserWarning):
        init_state(lambda x: np.full(x.shape[:-1], 1.5), grid)


def test_run_reproducible_and_shapes():
    grid, nf, table = _setup()
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.1)
    state0 = init_state(lambda x: 0.8 * np.sin(2 * np.pi * x[..., 0]), grid)
    t1 = run(state0, tg, nf, table, seed=11)
    t2 = run(state0, tg, nf, table, seed=11)
    assert np.array_equal(t1.states, t2.states)
    assert t1.states.shape == (tg.n_steps + 1, grid.n_cells)
    t3 = run(state0, tg, nf, table, seed=12)
    assert not np.array_equal(t1.states, t3.states)


def test_run_paths_differ():
    grid, nf, table = _setup()
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.05)
    state0 = init_state(lambda x: 0.5 * np.sin(2 * np.pi * x[..., 0]), grid)
    a = run(state0, tg, nf, table, seed=0, path=0)
    b = run(state0, tg, nf, table, seed=0, path=1)
    assert not np.array_equal(a.states, b.states)


def test_value_at_left_constant():
    grid, nf, table = _setup()
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.05)
    state0 = init_state(lambda x: 0.5 * np.sin(2 * np.pi * x[..., 0]), grid)
    traj = run(state0, tg, nf, table, seed=0)
    assert np.array_equal(traj.value_at(0.0), traj.states[0])
    mid = 0.5 * (tg.times[3] + tg.times[4])
    assert np.array_equal(traj.value_at(mid), traj.states[3])
    assert np.array_equal(traj.value_at(tg.t_final), traj.states[-1])
    with pytest.raises(ValueError):
        traj.value_at(tg.t_final + 1.0)


def test_run_rejects_cfl_violation():
    grid, nf, table = _setup()
    tg = TimeGrid(t_final=1.0, times=np.array([0.0, 1.0]), dts=np.array([1.0]))
    state0 = init_state(lambda x: 0.5 * np.sin(2 * np.pi * x[..., 0]), grid)
    with pytest.raises(CFLError):
        run(state0, tg, nf, table, seed=0)


def test_run_detects_blowup():
    grid = build_grid(1, 8)
    nf = MonotoneFaceFlux("godunov", burgers(1))
    # an absurd noise amplitude kicks the state far outside the support,
    # then the quadratic flux overflows on the next half step
    table = build_cell_table(
        NoiseModel(1, (ModeSpec(sigma=1e200, freq=(1,), kind="sin", q=1),)),
        grid)
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.05)
    state0 = init_state(lambda x: 0.5 * np.sin(2 * np.pi * x[..., 0]), grid)
    with pytest.raises(BlowUpError), np.errstate(all="ignore"):
        run(state0, tg, nf, table, seed=0)


def test_v_sharp_endpoint_matches_post_state():
    grid, nf, table = _setup()
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.02)
    state0 = init_state(lambda x: 0.8 * np.sin(2 * np.pi * x[..., 0]), grid)
    traj = run(state0, tg, nf, table, seed=3, keep_records=True)
    rec = traj.records[1]
    end = v_sharp(rec, table, np.sqrt(rec.dt) * rec.increments)
    assert np.allclose(end, rec.v_post, atol=1e-15)
    start = v_sharp(rec, table, np.zeros(table.model.k_max))
    assert np.array_equal(start, rec.v_half)


def test_bridge_for_record_consistent_with_increments():
    grid, nf, table = _setup()
    tg = cfl_time_grid(grid, 1.0, 0.5, 0.02)
    state0 = init_state(lambda x: 0.8 * np.sin(2 * np.pi * x[..., 0]), grid)
    traj = run(state0, tg, nf, table, seed=3, keep_records=True)
    rec = traj.records[0]
    bridge = bridge_for_record(rec, seed=3, levels=3)
    assert bridge.shape == (table.model.k_max, 9)
    assert np.allclose(bridge[:, -1], np.sqrt(rec.dt) * rec.increments)
    assert np.all(bridge[:, 0] == 0.0)
