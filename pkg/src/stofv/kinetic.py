"""Kinetic formulation of the finite-volume half step.

The deterministic update admits an exact reformulation in a velocity
variable xi.  Per unit face area, the kinetic face flux is

    a(xi, v, w) = a*(xi) 1_{xi < v^w} + d2F(v, xi) 1_{v <= xi <= w}
                  + d1F(xi, w) 1_{w <= xi <= v},

with a*(xi) the oriented derivative of A.  Integrating a in xi from the
right gives the entropy flux for (v - xi)^+, and the per-cell defect

    m(xi) = -(1/dt) [(v_half - xi)^+ - (v_pre - xi)^+]
            - (1/|K|) sum over faces of |K|L| Phi(xi)

is the entropy dissipation density: nonnegative under the CFL condition
and supported in the convex envelope of the cell's own states and its
neighbors'.  Everything here is vectorized over cells and xi nodes;
integrals use composite Gauss-Legendre between the kink locations, which
is exact for polynomial fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .flux import MonotoneFaceFlux
from .mesh import TorusGrid
from .noise import CellNoiseTable
from .scheme import StepRecord


# ---------------------------------------------------------------------------
# pointwise kinetic quantities (all per unit face area)

def a_star(nf: MonotoneFaceFlux, xi, axis: int, sign: int):
    """Oriented flux derivative sign * a_axis(xi)."""
    return sign * nf.flux.deriv(xi, axis)


def kinetic_a(nf: MonotoneFaceFlux, xi, v, w, axis: int, sign: int):
    """The kinetic face flux a(xi, v, w); zero for xi >= v or w (whichever
    is larger), equal to a*(xi) below both states."""
    xi, v, w = np.broadcast_arrays(
        np.asarray(xi, dtype=float), np.asarray(v, dtype=float),
        np.asarray(w, dtype=float))
    lo = np.minimum(v, w)
    below = xi < lo
    mid_up = (v <= xi) & (xi <= w)
    mid_dn = (w <= xi) & (xi <= v) & ~mid_up
    out = np.where(below, a_star(nf, xi, axis, sign), 0.0)
    out = out + np.where(mid_up, nf.d2(v, xi, axis, sign), 0.0)
    out = out + np.where(mid_dn, nf.d1(xi, w, axis, sign), 0.0)
    return out


def kinetic_a_bar(nf: MonotoneFaceFlux, xi, v, w, axis: int, sign: int):
    """Conjugate kinetic flux a*(xi) - a(xi, v, w)."""
    return a_star(nf, xi, axis, sign) - kinetic_a(nf, xi, v, w, axis, sign)


def kinetic_a_bar_explicit(nf: MonotoneFaceFlux, xi, v, w, axis: int, sign: int):
    """The conjugate flux written out by cases; must agree pointwise with
    kinetic_a_bar wherever the case indicators do not overlap."""
    xi, v, w = np.broadcast_arrays(
        np.asarray(xi, dtype=float), np.asarray(v, dtype=float),
        np.asarray(w, dtype=float))
    hi = np.maximum(v, w)
    star = a_star(nf, xi, axis, sign)
    above = xi > hi
    mid_up = (v <= xi) & (xi <= w)
    mid_dn = (w <= xi) & (xi <= v) & ~mid_up
    out = np.where(above, star, 0.0)
    out = out + np.where(mid_up, star - nf.d2(v, xi, axis, sign), 0.0)
    out = out + np.where(mid_dn, star - nf.d1(xi, w, axis, sign), 0.0)
    return out


def b_bar(nf: MonotoneFaceFlux, zeta, xi, v, w, axis: int, sign: int):
    """Two-variable conjugate kernel whose zeta-primitive up to xi is the
    conjugate entropy flux; bounded by L_A per unit area (unlike a_bar,
    whose crude bound carries a factor 2)."""
    zeta, xi, v, w = np.broadcast_arrays(
        np.asarray(zeta, dtype=float), np.asarray(xi, dtype=float),
        np.asarray(v, dtype=float), np.asarray(w, dtype=float))
    hi = np.maximum(v, w)
    above = xi > hi
    mid_up = (v <= xi) & (xi <= w)
    mid_dn = (w <= xi) & (xi <= v) & ~mid_up
    out = np.where(above, a_star(nf, xi, axis, sign), 0.0)
    out = out + np.where(mid_up, nf.d1(zeta, xi, axis, sign), 0.0)
    out = out + np.where(mid_dn, nf.d2(xi, zeta, axis, sign), 0.0)
    return out


def entropy_flux(nf: MonotoneFaceFlux, xi, v, w, axis: int, sign: int):
    """Numerical entropy flux for (s - xi)^+:
    Phi = F(v, w) - F(v^xi, w^xi), per unit area."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return nf.value(v, w, axis, sign) - nf.value(
        np.minimum(v, xi), np.minimum(w, xi), axis, sign)


def conj_entropy_flux(nf: MonotoneFaceFlux, xi, v, w, axis: int, sign: int):
    """Numerical entropy flux for (s - xi)^-:
    Phi_bar = F(xi, xi) - F(v^xi, w^xi), per unit area."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return nf.value(xi, xi, axis, sign) - nf.value(
        np.minimum(v, xi), np.minimum(w, xi), axis, sign)


# ---------------------------------------------------------------------------
# quadrature between kinks

def composite_gauss(breaks: np.ndarray, order: int = 5):
    """Composite Gauss-Legendre nodes/weights between consecutive sorted
    breakpoints.  ``breaks`` has shape (..., B); returns nodes and weights
    of shape (..., (B-1)*order).  Zero-width intervals get zero weight."""
    x, w = leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    left = breaks[..., :-1]
    width = np.diff(breaks, axis=-1)
    nodes = left[..., None] + width[..., None] * x
    weights = width[..., None] * w
    shape = breaks.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _sonic_all(nf: MonotoneFaceFlux) -> tuple[float, ...]:
    out: list[float] = []
    for pts in nf.flux.sonic:
        out.extend(pts)
    return tuple(out)


def _level_branches(nf: MonotoneFaceFlux, axis: int):
    """Maps s -> other states with the same flux value along one axis."""
    el = nf.flux.equal_level
    return el[axis] if axis < len(el) else ()


def _level_points(nf: MonotoneFaceFlux, states) -> list:
    """Equal-flux companions of the given state arrays, over all axes."""
    out = []
    for axis in range(nf.flux.dim):
        for branch in _level_branches(nf, axis):
            out.extend(branch(s) for s in states)
    return out


def consistency_integral(nf: MonotoneFaceFlux, v, w, axis: int, sign: int,
                         order: int = 5):
    """int over xi of [a(xi, v, w) - a*(xi) 1_{0 > xi}] dxi.

    Equals the per-unit-area face flux F(v, w) when the kinetic flux is
    consistent.  The integrand vanishes outside the convex hull of
    {0, v, w}, so the integral is computed there exactly (for polynomial
    fluxes) by kink-aware quadrature.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    pieces = [np.zeros_like(v + w), np.broadcast_to(v, np.broadcast_shapes(v.shape, w.shape)).copy(),
              np.broadcast_to(w, np.broadcast_shapes(v.shape, w.shape)).copy()]
    lo = np.minimum.reduce(pieces)
    hi = np.maximum.reduce(pieces)
    pts = pieces + [np.clip(s, lo, hi) for s in _sonic_all(nf)]
    for branch in _level_branches(nf, axis):
        pts.append(np.clip(branch(v), lo, hi))
        pts.append(np.clip(branch(w), lo, hi))
    breaks = np.sort(np.stack(np.broadcast_arrays(*pts), axis=-1), axis=-1)
    nodes, weights = composite_gauss(breaks, order)
    vals = kinetic_a(nf, nodes, v[..., None], w[..., None], axis, sign)
    vals = vals - np.where(nodes < 0.0, a_star(nf, nodes, axis, sign), 0.0)
    return np.sum(weights * vals, axis=-1)


# ---------------------------------------------------------------------------
# the dissipation measure of one deterministic half step

@dataclass(frozen=True)
class DissipationMeasure:
    """xi -> m_K(xi) for every cell of one step, with its kink structure.

    ``breaks`` holds, per cell, the sorted kink locations: the half state,
    the pre state, the neighbor states, and the sonic points clipped into
    the convex envelope.  ``nodes``/``weights`` are the composite Gauss
    rule between the kinks, exact for polynomial fluxes.
    """

    grid: TorusGrid
    nf: MonotoneFaceFlux
    dt: float
    v_pre: np.ndarray
    v_half: np.ndarray
    v_nbr: np.ndarray  # (n_cells, 2*dim), columns in face order
    breaks: np.ndarray  # (n_cells, B)
    nodes: np.ndarray  # (n_cells, Q)
    weights: np.ndarray  # (n_cells, Q)

    @property
    def support_lo(self) -> np.ndarray:
        return self.breaks[:, 0]

    @property
    def support_hi(self) -> np.ndarray:
        return self.breaks[:, -1]

    def evaluate(self, xi) -> np.ndarray:
        """m(xi) per cell.  ``xi`` may be a scalar, a common grid (M,), or
        per-cell nodes (n_cells, M); the result has shape (n_cells, M)
        (or (n_cells,) for scalar xi)."""
        xi_in = np.asarray(xi, dtype=float)
        scalar = xi_in.ndim == 0
        if xi_in.ndim <= 1:
            xi2 = np.broadcast_to(xi_in, (self.grid.n_cells,) + ((1,) if scalar else xi_in.shape))
        else:
            xi2 = xi_in
        vp = self.v_pre[:, None]
        vh = self.v_half[:, None]
        kink = -(np.maximum(vh - xi2, 0.0) - np.maximum(vp - xi2, 0.0)) / self.dt
        flux_sum = np.zeros_like(xi2)
        col = 0
        for axis in range(self.grid.dim):
            for sign in (-1, 1):
                flux_sum = flux_sum + entropy_flux(
                    self.nf, xi2, vp, self.v_nbr[:, col][:, None], axis, sign)
                col += 1
        m = kink - self.grid.face_area / self.grid.cell_volume * flux_sum
        return m[:, 0] if scalar else m

    def node_values(self) -> np.ndarray:
        return self.evaluate(self.nodes)

    def min_value(self) -> float:
        """Smallest node value; nonnegative up to rounding under CFL."""
        return float(self.node_values().min()) if self.nodes.size else 0.0

    def integral(self, psi: Callable | None = None) -> np.ndarray:
        """int psi(xi) m(xi) dxi per cell (psi = 1 when omitted)."""
        vals = self.node_values()
        if psi is not None:
            vals = vals * psi(self.nodes)
        return np.sum(self.weights * vals, axis=-1)

    def total(self, psi: Callable | None = None) -> float:
        """sum over cells of |K| int psi m dxi."""
        return float(self.grid.cell_volume * self.integral(psi).sum())

    def integral_against(self, fn: Callable, kinks: tuple[float, ...],
                         order: int = 5) -> np.ndarray:
        """int fn(xi) m(xi) dxi per cell when fn itself has kinks; the
        given locations are merged into the cell breakpoints first."""
        extra = np.clip(
            np.broadcast_to(np.asarray(kinks, dtype=float),
                            (self.grid.n_cells, len(kinks))),
            self.support_lo[:, None], self.support_hi[:, None])
        breaks = np.sort(np.concatenate([self.breaks, extra], axis=1), axis=1)
        nodes, weights = composite_gauss(breaks, order)
        return np.sum(weights * fn(nodes) * self.evaluate(nodes), axis=-1)


def dissipation(
    v_pre: np.ndarray,
    v_half: np.ndarray,
    dt: float,
    nf: MonotoneFaceFlux,
    grid: TorusGrid,
    neighbors: np.ndarray | None = None,
    order: int = 5,
) -> DissipationMeasure:
    """Assemble the dissipation measure of one half step, all cells at once."""
    if neighbors is None:
        neighbors = grid.neighbor_table()
    v_nbr = v_pre[neighbors]  # (n_cells, 2*dim)
    states = np.concatenate([v_half[:, None], v_pre[:, None], v_nbr], axis=1)
    lo = states.min(axis=1)
    hi = states.max(axis=1)
    cols = [states] + [np.clip(s, lo, hi)[:, None] for s in _sonic_all(nf)]
    level_states = [v_pre] + [v_nbr[:, c] for c in range(v_nbr.shape[1])]
    for extra in _level_points(nf, level_states):
        cols.append(np.clip(extra, lo, hi)[:, None])
    breaks = np.sort(np.concatenate(cols, axis=1), axis=1)
    nodes, weights = composite_gauss(breaks, order)
    return DissipationMeasure(
        grid=grid, nf=nf, dt=float(dt), v_pre=v_pre, v_half=v_half,
        v_nbr=v_nbr, breaks=breaks, nodes=nodes, weights=weights)


def dissipation_from_record(record: StepRecord, nf: MonotoneFaceFlux,
                            grid: TorusGrid, order: int = 5) -> DissipationMeasure:
    return dissipation(record.v_pre, record.v_half, record.dt, nf, grid,
                       order=order)


# ---------------------------------------------------------------------------
# compactly supported polynomial test functions

@dataclass(frozen=True)
class Bump:
    """psi(xi) = (1 - s^2)^3 with s = (xi - center)/radius, supported on
    [center - radius, center + radius]; C^2 with polynomial pieces, so the
    kink-aware Gauss rule integrates it exactly."""

    center: float
    radius: float

    def __call__(self, xi):
        s = (np.asarray(xi, dtype=float) - self.center) / self.radius
        inside = np.abs(s) < 1.0
        return np.where(inside, np.maximum(1.0 - s * s, 0.0) ** 3, 0.0)

    def deriv(self, xi):
        s = (np.asarray(xi, dtype=float) - self.center) / self.radius
        inside = np.abs(s) < 1.0
        val = -6.0 * s * np.maximum(1.0 - s * s, 0.0) ** 2 / self.radius
        return np.where(inside, val, 0.0)

    def primitive(self, xi):
        """An antiderivative of psi, constant outside the support."""
        s = np.clip((np.asarray(xi, dtype=float) - self.center) / self.radius,
                    -1.0, 1.0)
        return self.radius * (s - s**3 + 0.6 * s**5 - s**7 / 7.0)

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)


# ---------------------------------------------------------------------------
# residuals of the kinetic equations

def _a_psi_integral(meas: DissipationMeasure, psi: Bump, order: int = 7) -> np.ndarray:
    """Per cell: sum over faces of |K|L| int a^n(xi) psi(xi) dxi over the
    support of psi."""
    grid = meas.grid
    nf = meas.nf
    lo_s, hi_s = psi.support
    out = np.zeros(grid.n_cells)
    sonic = _sonic_all(nf)
    col = 0
    for axis in range(grid.dim):
        for sign in (-1, 1):
            v = meas.v_pre
            w = meas.v_nbr[:, col]
            pts = [np.full_like(v, lo_s), np.full_like(v, hi_s)]
            cuts = [np.minimum(v, w), np.maximum(v, w)]
            cuts += [np.full_like(v, s) for s in sonic]
            for branch in _level_branches(nf, axis):
                cuts.append(branch(v))
                cuts.append(branch(w))
            for cut in cuts:
                pts.append(np.clip(cut, lo_s, hi_s))
            breaks = np.sort(np.stack(pts, axis=-1), axis=-1)
            nodes, weights = composite_gauss(breaks, order)
            vals = kinetic_a(nf, nodes, v[:, None], w[:, None], axis, sign)
            out += grid.face_area * np.sum(weights * vals * psi(nodes), axis=-1)
            col += 1
    return out


def kinetic_residual(meas: DissipationMeasure, psi: Bump) -> np.ndarray:
    """Residual, per cell, of the half-step kinetic identity tested
    against psi:

        |K| (Psi(v_half) - Psi(v_pre)) + dt * sum_L int a^n psi dxi
            + |K| dt int psi' m dxi  =  0,

    where Psi is an antiderivative of psi.  Zero up to quadrature error.
    """
    grid = meas.grid
    lhs = grid.cell_volume * (psi.primitive(meas.v_half) - psi.primitive(meas.v_pre))
    flux_term = meas.dt * _a_psi_integral(meas, psi)
    diss_term = grid.cell_volume * meas.dt * meas.integral_against(
        psi.deriv, psi.support)
    return lhs + flux_term + diss_term


def v_sharp_nodes(record: StepRecord, table: CellNoiseTable,
                  bridge: np.ndarray) -> np.ndarray:
    """Intra-step states on the bridge's dyadic grid: shape
    (n_substeps + 1, n_cells)."""
    if table.model.k_max == 0:
        s = bridge.shape[1] if bridge.size else 1
        return np.broadcast_to(record.v_half, (s, record.v_half.size)).copy()
    g = table.eval_all(record.v_pre)  # (k_max, n_cells)
    return record.v_half[None, :] + bridge.T @ g


def discrete_kinetic_residual(
    record: StepRecord,
    meas: DissipationMeasure,
    table: CellNoiseTable,
    bridge: np.ndarray,
    psi: Bump,
    j: int,
) -> np.ndarray:
    """Residual, per cell, of the full-step kinetic identity at the dyadic
    time t = t_n + j * dt / S, where S + 1 is the bridge's node count.

    The stochastic integral uses left-point Ito sums on the bridge's
    substeps and the correction term the matching Riemann sum, so the
    residual shrinks at strong order about 1/2 in the substep width.
    """
    s_sub = bridge.shape[1] - 1 if bridge.size else 1
    if not 0 <= j <= s_sub:
        raise ValueError(f"substep index {j} outside 0..{s_sub}")
    grid = meas.grid
    n_cells = grid.n_cells
    if j == 0:
        return np.zeros(n_cells)
    wgt = j / s_sub
    t_elapsed = wgt * record.dt
    vs = v_sharp_nodes(record, table, bridge)  # (S+1, n_cells)

    lhs = wgt * (psi.primitive(vs[j]) - psi.primitive(record.v_pre))

    flux_term = -(t_elapsed / grid.cell_volume) * _a_psi_integral(meas, psi)
    diss_term = -t_elapsed * meas.integral_against(psi.deriv, psi.support)

    ito = np.zeros(n_cells)
    correction = np.zeros(n_cells)
    if table.model.k_max > 0:
        g = table.eval_all(record.v_pre)  # (k_max, n_cells)
        ds = record.dt / s_sub
        for i in range(j):
            dbeta = bridge[:, i + 1] - bridge[:, i]  # (k_max,)
            ito += psi(vs[i]) * (dbeta @ g)
            correction += psi.deriv(vs[i]) * ds
        correction *= 0.5 * table.g_squared(record.v_pre)
    rhs = flux_term + diss_term + wgt * ito + wgt * correction
    return lhs - rhs


# ---------------------------------------------------------------------------
# interpolated kinetic function and Young-measure moments

def f_delta(v_sharp_t: np.ndarray, v_flat: np.ndarray, wgt: float, xi):
    """Kinetic interpolant w 1_{v_sharp > xi} + (1 - w) 1_{v > xi};
    values in [0, 1], nonincreasing in xi."""
    xi = np.asarray(xi, dtype=float)
    vs = np.asarray(v_sharp_t, dtype=float)
    vf = np.asarray(v_flat, dtype=float)
    return wgt * (vs > xi).astype(float) + (1.0 - wgt) * (vf > xi).astype(float)


def nu_moment(v_sharp_t: np.ndarray, v_flat: np.ndarray, wgt: float,
              p: int, grid: TorusGrid) -> float:
    """int over the torus of int (1 + |xi|^p) dnu(xi) dx for the two-atom
    Young measure: 1 + w ||v_sharp||^p_p + (1 - w) ||v||^p_p."""
    vol = grid.cell_volume
    return float(1.0 + wgt * vol * np.sum(np.abs(v_sharp_t) ** p)
                 + (1.0 - wgt) * vol * np.sum(np.abs(v_flat) ** p))


def m_delta_moment(measures, dts, p: int) -> float:
    """Space-time-xi mass sum_n dt_n sum_K |K| int (1 + |xi|^p) m dxi."""
    total = 0.0
    for meas, dt in zip(measures, dts):
        total += float(dt) * meas.total(lambda xi: 1.0 + np.abs(xi) ** p)
    return total
