"""Checks of the identities and bounds the scheme satisfies.

Per step, the deterministic half step obeys an exact energy balance: the
dissipation integral makes up precisely the L^2 drop.  In expectation the
noise input closes the balance over a run.  The summed face-wise entropy
flux jumps (weak-BV sums) and the time-difference sums are controlled by
the initial energy and the noise constant.  All checks compute both sides
independently; nothing is rearranged to cancel by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flux import MonotoneFaceFlux
from .kinetic import (DissipationMeasure, composite_gauss, dissipation,
                      entropy_flux, conj_entropy_flux, _level_branches,
                      _sonic_all, m_delta_moment)
from .noise import CellNoiseTable
from .scheme import Trajectory


def step_measures(traj: Trajectory, nf: MonotoneFaceFlux,
                  order: int = 5) -> list[DissipationMeasure]:
    """Dissipation measures of every recorded step."""
    if traj.records is None:
        raise ValueError("trajectory was run without keep_records")
    neighbors = traj.grid.neighbor_table()
    return [
        dissipation(r.v_pre, r.v_half, r.dt, nf, traj.grid, neighbors, order)
        for r in traj.records
    ]


@dataclass(frozen=True)
class EnergyLedger:
    """Per-step energy accounting of one path.

    residual[n] = half_energy_post[n] + dissipation[n] - half_energy_pre[n]
    vanishes identically (up to quadrature rounding); noise_input[n] is the
    expected post-noise energy kick (dt/2) sum |K| G^2_K(v^n_K).
    """

    steps: np.ndarray
    times: np.ndarray
    half_energy_pre: np.ndarray
    half_energy_post: np.ndarray
    dissipation: np.ndarray
    noise_input: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def total_dissipation(self) -> float:
        return float(self.dissipation.sum())

    @property
    def total_noise_input(self) -> float:
        return float(self.noise_input.sum())

    def rows(self):
        for i in range(len(self.steps)):
            yield (int(self.steps[i]), float(self.times[i]),
                   float(self.half_energy_pre[i]), float(self.half_energy_post[i]),
                   float(self.dissipation[i]), float(self.noise_input[i]),
                   float(self.residual[i]))


LEDGER_COLUMNS = ("n", "t_n", "half_energy_pre", "half_energy_post",
                  "dissipation", "noise_input", "residual")


def energy_ledger(traj: Trajectory, nf: MonotoneFaceFlux,
                  table: CellNoiseTable,
                  measures: Sequence[DissipationMeasure] | None = None) -> EnergyLedger:
    """Evaluate the per-step energy balance of one recorded path."""
    if traj.records is None:
        raise ValueError("trajectory was run without keep_records")
    if measures is None:
        measures = step_measures(traj, nf)
    vol = traj.grid.cell_volume
    n_rec = len(traj.records)
    pre = np.empty(n_rec)
    post = np.empty(n_rec)
    diss = np.empty(n_rec)
    noise = np.empty(n_rec)
    for i, (rec, meas) in enumerate(zip(traj.records, measures)):
        pre[i] = 0.5 * vol * np.sum(rec.v_pre**2)
        post[i] = 0.5 * vol * np.sum(rec.v_half**2)
        diss[i] = rec.dt * meas.total()
        noise[i] = 0.5 * rec.dt * vol * np.sum(table.g_squared(rec.v_pre))
    return EnergyLedger(
        steps=np.array([r.step for r in traj.records]),
        times=np.array([r.time for r in traj.records]),
        half_energy_pre=pre, half_energy_post=post, dissipation=diss,
        noise_input=noise, residual=post + diss - pre)


def write_ledger_csv(ledger: EnergyLedger, path, header_lines: Sequence[str] = ()):
    """17-significant-digit CSV with LF endings; extra header lines are
    written as leading '#' comments."""
    with open(path, "w", newline="\n") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        f.write(",".join(LEDGER_COLUMNS) + "\n")
        for row in ledger.rows():
            n, rest = row[0], row[1:]
            f.write(str(n) + "," + ",".join(format(x, ".17g") for x in rest) + "\n")


# ---------------------------------------------------------------------------
# weak-BV sums and their pathwise dissipation controls

def _face_jump_integrals(traj: Trajectory, nf: MonotoneFaceFlux,
                         order: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Per step: the two face-jump sums

        sum_K sum_L int (fbar_L - fbar_K) Phi dxi   and
        sum_K sum_L int (f_L - f_K) Phibar dxi.

    The jump of the indicator is -sign(v_L - v_K) (resp. +sign) on the
    interval between the two states, so each face contributes a signed
    integral of the entropy flux over that interval.
    """
    grid = traj.grid
    neighbors = grid.neighbor_table()
    sums_phi = np.zeros(len(traj.records))
    sums_phibar = np.zeros(len(traj.records))
    for i, rec in enumerate(traj.records):
        v = rec.v_pre
        col = 0
        for axis in range(grid.dim):
            branches = _level_branches(nf, axis)
            sonic = nf.flux.sonic[axis]
            for sign in (-1, 1):
                w = v[neighbors[:, col]]
                lo = np.minimum(v, w)
                hi = np.maximum(v, w)
                pts = [lo, hi] + [np.clip(s, lo, hi) for s in sonic]
                for br in branches:
                    pts.append(np.clip(br(v), lo, hi))
                    pts.append(np.clip(br(w), lo, hi))
                breaks = np.sort(np.stack(pts, axis=-1), axis=-1)
                nodes, weights = composite_gauss(breaks, order)
                sgn = np.sign(w - v)
                phi = entropy_flux(nf, nodes, v[:, None], w[:, None], axis, sign)
                phibar = conj_entropy_flux(nf, nodes, v[:, None], w[:, None],
                                           axis, sign)
                sums_phi[i] += grid.face_area * np.sum(
                    -sgn * np.sum(weights * phi, axis=-1))
                sums_phibar[i] += grid.face_area * np.sum(
                    sgn * np.sum(weights * phibar, axis=-1))
                col += 1
    return sums_phi, sums_phibar


def _half_line_mass(meas: DissipationMeasure, upper: bool) -> np.ndarray:
    """int over {xi >= v_pre} (upper) or {xi < v_pre} of m, per cell.
    The pre state is one of the breakpoints, so the rule stays exact."""
    vals = meas.node_values()
    if upper:
        mask = meas.nodes >= meas.v_pre[:, None]
    else:
        mask = meas.nodes < meas.v_pre[:, None]
    return np.sum(meas.weights * vals * mask, axis=-1)


@dataclass(frozen=True)
class WeakBVReport:
    """Weak-BV sums of one path against their dissipation controls.

    The space jump sums and the positive/negative parts of the half-step
    time differences are each bounded pathwise by (2/theta) times the
    matching half-line dissipation mass; the ensemble-level bounds against
    theta^{-1} ||v0||^2 + c D0 T / theta are checked by the caller with
    Monte Carlo slack.
    """

    space_sum_phi: float       # sum of (fbar_L - fbar_K) Phi integrals
    space_sum_phibar: float    # sum of (f_L - f_K) Phibar integrals
    time_sum_flat: float       # sum_n ||v_half(t_{n+1}) - v(t_n)||^2
    time_sum_full: float       # sum_n ||v(t_{n+1}) - v(t_n)||^2
    time_sum_flat_pos: float   # positive-part portion of time_sum_flat
    time_sum_flat_neg: float
    control_upper: float       # (2/theta)-free mass: sum dt sum |K| int fbar m
    control_lower: float       # sum dt sum |K| int f m
    theta: float

    @property
    def space_sum(self) -> float:
        return self.space_sum_phi + self.space_sum_phibar

    @property
    def control_space_ok(self) -> bool:
        slack = 1e-10 * max(1.0, abs(self.control_upper))
        return self.space_sum_phi <= 2.0 / self.theta * self.control_upper + slack

    @property
    def control_space_bar_ok(self) -> bool:
        slack = 1e-10 * max(1.0, abs(self.control_lower))
        return self.space_sum_phibar <= 2.0 / self.theta * self.control_lower + slack

    @property
    def control_time_ok(self) -> bool:
        slack = 1e-10 * max(1.0, abs(self.control_upper))
        return self.time_sum_flat_pos <= 2.0 / self.theta * self.control_upper + slack

    @property
    def control_time_bar_ok(self) -> bool:
        slack = 1e-10 * max(1.0, abs(self.control_lower))
        return self.time_sum_flat_neg <= 2.0 / self.theta * self.control_lower + slack

    @property
    def all_controls_ok(self) -> bool:
        return (self.control_space_ok and self.control_space_bar_ok
                and self.control_time_ok and self.control_time_bar_ok)


def weak_bv_sums(traj: Trajectory, nf: MonotoneFaceFlux, theta: float,
                 measures: Sequence[DissipationMeasure] | None = None) -> WeakBVReport:
    """Evaluate the weak-BV sums and dissipation controls of one path."""
    if traj.records is None:
        raise ValueError("trajectory was run without keep_records")
    if measures is None:
        measures = step_measures(traj, nf)
    grid = traj.grid
    vol = grid.cell_volume
    sums_phi, sums_phibar = _face_jump_integrals(traj, nf)
    dts = np.array([r.dt for r in traj.records])
    space_phi = float(np.sum(dts * sums_phi))
    space_phibar = float(np.sum(dts * sums_phibar))

    flat = full = flat_pos = flat_neg = 0.0
    ctrl_up = ctrl_lo = 0.0
    for rec, meas in zip(traj.records, measures):
        d = rec.v_half - rec.v_pre
        flat += vol * float(np.sum(d * d))
        flat_pos += vol * float(np.sum(np.maximum(d, 0.0) ** 2))
        flat_neg += vol * float(np.sum(np.minimum(d, 0.0) ** 2))
        dfull = rec.v_post - rec.v_pre
        full += vol * float(np.sum(dfull * dfull))
        ctrl_up += rec.dt * vol * float(np.sum(_half_line_mass(meas, True)))
        ctrl_lo += rec.dt * vol * float(np.sum(_half_line_mass(meas, False)))
    return WeakBVReport(
        space_sum_phi=space_phi, space_sum_phibar=space_phibar,
        time_sum_flat=flat, time_sum_full=full,
        time_sum_flat_pos=flat_pos, time_sum_flat_neg=flat_neg,
        control_upper=ctrl_up, control_lower=ctrl_lo, theta=theta)


def weak_bv_bound(v0_sq_norm: float, d0: float, t_final: float, theta: float,
                  c: float = 1.0) -> float:
    """The ensemble bound theta^{-1} ||v0||^2 + c D0 T / theta."""
    return v0_sq_norm / theta + c * d0 * t_final / theta


# ---------------------------------------------------------------------------
# Monte Carlo energy identity

@dataclass(frozen=True)
class MCEnergyReport:
    """Ensemble test of the expectation energy identity.

    balance[j] = (1/2)||v_j(T)||^2 + E_j(T) - (1/2)||v(0)||^2 - noise_j
    has zero mean over paths; kick_gap[j] likewise for the per-step noise
    kick identity summed over the run.
    """

    balance: np.ndarray
    kick_gap: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.balance)

    @property
    def balance_mean(self) -> float:
        return float(self.balance.mean())

    @property
    def balance_se(self) -> float:
        if self.n_paths < 2:
            return 0.0
        return float(self.balance.std(ddof=1) / np.sqrt(self.n_paths))

    @property
    def balance_z(self) -> float:
        se = self.balance_se
        return abs(self.balance_mean) / se if se > 0 else 0.0

    @property
    def kick_mean(self) -> float:
        return float(self.kick_gap.mean())

    @property
    def kick_se(self) -> float:
        if self.n_paths < 2:
            return 0.0
        return float(self.kick_gap.std(ddof=1) / np.sqrt(self.n_paths))

    @property
    def kick_z(self) -> float:
        se = self.kick_se
        return abs(self.kick_mean) / se if se > 0 else 0.0


def energy_identity_mc(trajs: Sequence[Trajectory], nf: MonotoneFaceFlux,
                       table: CellNoiseTable) -> MCEnergyReport:
    """Check the expectation energy identity over an ensemble of paths."""
    balances = np.empty(len(trajs))
    kicks = np.empty(len(trajs))
    for j, traj in enumerate(trajs):
        vol = traj.grid.cell_volume
        ledger = energy_ledger(traj, nf, table)
        final = 0.5 * vol * float(np.sum(traj.states[-1] ** 2))
        start = 0.5 * vol * float(np.sum(traj.states[0] ** 2))
        balances[j] = (final + ledger.total_dissipation
                       - start - ledger.total_noise_input)
        kick = 0.0
        for rec in traj.records:
            d = rec.v_post - rec.v_half
            kick += 0.5 * vol * float(np.sum(d * d))
        kicks[j] = kick - ledger.total_noise_input
    return MCEnergyReport(balance=balances, kick_gap=kicks)


# ---------------------------------------------------------------------------
# moment boundedness

@dataclass(frozen=True)
class MomentReport:
    """sup-in-time Young-measure moments and the dissipation mass moment."""

    p: int
    sup_moment: float
    m_delta_mass: float


def tightness_moments(traj: Trajectory, nf: MonotoneFaceFlux, p: int,
                      measures: Sequence[DissipationMeasure] | None = None) -> MomentReport:
    """sup over the time grid of int (1 + |xi|^p) dnu dx, and the total
    (1 + |xi|^p) mass of the dissipation measure.

    At grid times the interpolation weight vanishes, so the Young measure
    is the Dirac at the cell value and the moment is 1 + ||v(t_n)||^p_p.
    """
    if traj.records is None:
        raise ValueError("trajectory was run without keep_records")
    if measures is None:
        measures = step_measures(traj, nf)
    vol = traj.grid.cell_volume
    moments = 1.0 + vol * np.sum(np.abs(traj.states) ** p, axis=1)
    dts = [r.dt for r in traj.records]
    mass = m_delta_moment(measures, dts, p)
    return MomentReport(p=p, sup_moment=float(moments.max()), m_delta_mass=mass)
