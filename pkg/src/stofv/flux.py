"""Flux functions and monotone two-point numerical face fluxes.

A flux function A maps a scalar state to a vector in R^N.  A face flux is
a per-unit-area two-point function F_d(v, w) along one axis with one
orientation; the oriented physical flux through a face is |K|L| * F.  The
built-in face fluxes (Godunov, Rusanov, Engquist-Osher) are monotone:
nondecreasing in v, nonincreasing in w, consistent (F(v, v) = A(v).n) and
conservatively symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .mesh import Face, TorusGrid

# tie tolerance when deciding where a Godunov extremum is attained
_TIE = 1e-13


@dataclass(frozen=True)
class FluxFunction:
    """Scalar flux A: R -> R^N with derivative a = A' and metadata.

    ``components`` / ``derivs`` hold one callable per axis, vectorized over
    numpy arrays.  ``sonic`` lists the roots of a_d per axis on the working
    range (used to resolve Godunov extrema exactly).  ``la`` is the declared
    Lipschitz constant of A on the working range; A(0) = 0 is assumed.
    """

    name: str
    components: tuple[Callable, ...]
    derivs: tuple[Callable, ...]
    la: float
    sonic: tuple[tuple[float, ...], ...]
    working_range: tuple[float, float] = (-1.25, 1.25)
    # per axis: callables s -> other state with A_d(state) = A_d(s); these
    # are the points where a Godunov extremum switches endpoints, needed by
    # kink-aware quadrature to stay exact
    equal_level: tuple[tuple[Callable, ...], ...] = ()

    @property
    def dim(self) -> int:
        return len(self.components)

    def value(self, u, axis: int):
        return self.components[axis](np.asarray(u, dtype=float))

    def deriv(self, u, axis: int):
        return self.derivs[axis](np.asarray(u, dtype=float))

    def check_lipschitz(
        self,
        value_range: tuple[float, float] = (-1.0, 1.0),
        samples: int = 512,
        tol: float = 0.05,
    ) -> float:
        """Sampled Lipschitz constant on the dynamics range; raises if it
        exceeds the declared la by >= tol (the CFL relies on la)."""
        lo, hi = value_range
        xs = np.linspace(lo, hi, samples)
        worst = 0.0
        for d in range(self.dim):
            vals = self.value(xs, d)
            worst = max(worst, float(np.max(np.abs(np.diff(vals) / np.diff(xs)))))
        if worst > self.la * (1.0 + tol):
            raise ValueError(
                f"declared Lipschitz constant {self.la} exceeded: sampled {worst:.6g}"
            )
        return worst


def burgers(dim: int = 1) -> FluxFunction:
    """A_d(u) = u^2/2 on every axis."""
    comp = tuple(lambda u: 0.5 * u * u for _ in range(dim))
    der = tuple(lambda u: np.asarray(u, dtype=float) for _ in range(dim))
    mirror = tuple((lambda u: -np.asarray(u, dtype=float),) for _ in range(dim))
    return FluxFunction("burgers", comp, der, la=1.0, sonic=((0.0,),) * dim,
                        equal_level=mirror)


def linear(velocity: Sequence[float]) -> FluxFunction:
    """A(u) = c * u for a constant velocity vector c."""
    c = tuple(float(ci) for ci in velocity)
    comp = tuple((lambda ci: lambda u: ci * np.asarray(u, dtype=float))(ci) for ci in c)
    der = tuple(
        (lambda ci: lambda u: np.full_like(np.asarray(u, dtype=float), ci))(ci)
        for ci in c
    )
    la = max(abs(ci) for ci in c) if c else 0.0
    return FluxFunction("linear", comp, der, la=la, sonic=((),) * len(c))


def cubic(dim: int = 1) -> FluxFunction:
    """A_d(u) = u^3/3 on every axis; a_d(u) = u^2 >= 0."""
    comp = tuple(lambda u: np.asarray(u, dtype=float) ** 3 / 3.0 for _ in range(dim))
    der = tuple(lambda u: np.asarray(u, dtype=float) ** 2 for _ in range(dim))
    return FluxFunction("cubic", comp, der, la=1.0, sonic=((0.0,),) * dim)


BUILTIN_FLUXES = {"burgers": burgers, "linear": linear, "cubic": cubic}


def make_flux(name: str, dim: int, params: dict | None = None) -> FluxFunction:
    params = params or {}
    if name == "linear":
        velocity = params.get("velocity", [1.0] * dim)
        if len(velocity) != dim:
            raise ValueError("linear flux velocity must have one entry per axis")
        return linear(velocity)
    if name in ("burgers", "cubic"):
        return BUILTIN_FLUXES[name](dim)
    raise ValueError(f"unknown flux function {name!r}")


def _oriented(flux: FluxFunction, axis: int, sign: int):
    """phi(xi) = sign * A_axis(xi) and its derivative."""
    s = float(sign)

    def phi(u):
        return s * flux.value(u, axis)

    def dphi(u):
        return s * flux.deriv(u, axis)

    return phi, dphi, flux.sonic[axis]


def _godunov_value(phi, sonic, v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    lo = np.minimum(v, w)
    hi = np.maximum(v, w)
    cands = [phi(v), phi(w)]
    for s in sonic:
        cands.append(phi(np.clip(s, lo, hi)))
    fmin = cands[0]
    fmax = cands[0]
    for c in cands[1:]:
        fmin = np.minimum(fmin, c)
        fmax = np.maximum(fmax, c)
    return np.where(v <= w, fmin, fmax)


def _signed_variation(phi, sonic, v, positive: bool):
    """int_0^v max(phi'(s), 0) ds (positive) or the min counterpart.

    Evaluated exactly by splitting [0, v] at the sonic points, where phi'
    has one sign per sub-interval.
    """
    v = np.asarray(v, dtype=float)
    a = np.minimum(0.0, v)
    b = np.maximum(0.0, v)
    pts = [a, b] + [np.clip(s, a, b) for s in sonic]
    grid = np.sort(np.stack(np.broadcast_arrays(*pts), axis=-1), axis=-1)
    inc = phi(grid[..., 1:]) - phi(grid[..., :-1])
    part = np.maximum(inc, 0.0) if positive else np.minimum(inc, 0.0)
    return np.sign(v) * part.sum(axis=-1)


@dataclass(frozen=True)
class MonotoneFaceFlux:
    """Two-point monotone face flux of a given kind.

    ``rusanov_lam`` is the numerical viscosity for the Rusanov flux; the
    default L_A keeps the per-unit-area Lipschitz constant <= L_A, which
    the CFL condition and the kinetic-flux bounds assume.
    """

    kind: str
    flux: FluxFunction
    rusanov_lam: float | None = None

    def __post_init__(self):
        if self.kind not in ("godunov", "rusanov", "engquist_osher"):
            raise ValueError(f"unknown face flux kind {self.kind!r}")

    @property
    def lam(self) -> float:
        return self.flux.la if self.rusanov_lam is None else self.rusanov_lam

    def lipschitz_bound(self, l_a: float | None = None) -> float:
        """Per-unit-area Lipschitz constant, given the Lipschitz constant
        l_a of A on the range of interest (defaults to the declared one)."""
        l_a = self.flux.la if l_a is None else l_a
        if self.kind == "rusanov":
            return 0.5 * (l_a + self.lam)
        return l_a

    def value(self, v, w, axis: int, sign: int):
        """Per-unit-area flux F(v, w) in the direction sign * e_axis."""
        phi, dphi, sonic = _oriented(self.flux, axis, sign)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "godunov":
            return _godunov_value(phi, sonic, v, w)
        if self.kind == "rusanov":
            return 0.5 * (phi(v) + phi(w)) - 0.5 * self.lam * (w - v)
        # Engquist-Osher: F = phi(0) + int_0^v (phi')^+ + int_0^w (phi')^-
        return (
            phi(np.zeros_like(v))
            + _signed_variation(phi, sonic, v, True)
            + _signed_variation(phi, sonic, w, False)
        )

    def d1(self, v, w, axis: int, sign: int):
        """Partial of F in its first argument (>= 0 a.e.)."""
        phi, dphi, sonic = _oriented(self.flux, axis, sign)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "rusanov":
            return 0.5 * (dphi(v) + self.lam)
        if self.kind == "engquist_osher":
            return np.maximum(dphi(v), 0.0)
        # Godunov: the extremum moves with v only where it is attained at v,
        # and then one-sidedness forces the positive part of phi'(v).
        f = _godunov_value(phi, sonic, v, w)
        attained = np.abs(phi(v) - f) <= _TIE
        return np.where(attained, np.maximum(dphi(v), 0.0), 0.0)

    def d2(self, v, w, axis: int, sign: int):
        """Partial of F in its second argument (<= 0 a.e.)."""
        phi, dphi, sonic = _oriented(self.flux, axis, sign)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "rusanov":
            return 0.5 * (dphi(w) - self.lam)
        if self.kind == "engquist_osher":
            return np.minimum(dphi(w), 0.0)
        f = _godunov_value(phi, sonic, v, w)
        attained = np.abs(phi(w) - f) <= _TIE
        return np.where(attained, np.minimum(dphi(w), 0.0), 0.0)


def face_flux(
    nf: MonotoneFaceFlux, face: Face, v_k: float, v_l: float, grid: TorusGrid
) -> float:
    """Oriented flux Q_{K->L} = |K|L| * F through one face."""
    return grid.face_area * float(nf.value(v_k, v_l, face.axis, face.sign))


@dataclass
class FluxAxiomReport:
    """Worst-case residuals of the four face-flux axioms on a sample grid."""

    monotony_violation: float
    lipschitz_ratio: float
    consistency_residual: float
    symmetry_residual: float
    tolerance: float = 1e-10

    @property
    def monotony_ok(self) -> bool:
        return self.monotony_violation <= self.tolerance

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz_ratio <= 1.0 + self.tolerance

    @property
    def consistency_ok(self) -> bool:
        return self.consistency_residual <= self.tolerance

    @property
    def symmetry_ok(self) -> bool:
        return self.symmetry_residual <= self.tolerance

    @property
    def all_ok(self) -> bool:
        return (
            self.monotony_ok
            and self.lipschitz_ok
            and self.consistency_ok
            and self.symmetry_ok
        )

    def as_dict(self) -> dict:
        return {
            "monotony_violation": self.monotony_violation,
            "lipschitz_ratio": self.lipschitz_ratio,
            "consistency_residual": self.consistency_residual,
            "symmetry_residual": self.symmetry_residual,
            "tolerance": self.tolerance,
            "pass": self.all_ok,
        }


def validate_flux(
    nf: MonotoneFaceFlux,
    flux: FluxFunction,
    value_range: tuple[float, float] | None = None,
    samples: int = 101,
) -> FluxAxiomReport:
    """Sample the four axioms of a face flux on a (v, w) grid.

    The Lipschitz ratio is measured against the kind-specific bound built
    from the sampled Lipschitz constant of A on the same range (L_A there
    for Godunov and Engquist-Osher, (L_A + lam)/2 for Rusanov).
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    lo, hi = value_range if value_range is not None else flux.working_range
    xs = np.linspace(lo, hi, samples)
    vv, ww = np.meshgrid(xs, xs, indexing="ij")
    step = xs[1] - xs[0]
    l_samp = max(
        (float(np.max(np.abs(flux.deriv(xs, d)))) for d in range(flux.dim)),
        default=0.0,
    )
    l_bound = nf.lipschitz_bound(l_samp)

    mono = 0.0
    lips = 0.0
    cons = 0.0
    symm = 0.0
    for axis in range(flux.dim):
        for sign in (-1, 1):
            f = nf.value(vv, ww, axis, sign)
            # monotony: nondecreasing in v, nonincreasing in w
            mono = max(mono, float(np.max(-(np.diff(f, axis=0)))))
            mono = max(mono, float(np.max(np.diff(f, axis=1))))
            lips = max(
                lips,
                float(np.max(np.abs(np.diff(f, axis=0)))) / (step * l_bound)
                if l_bound > 0
                else 0.0,
            )
            if l_bound > 0:
                lips = max(lips, float(np.max(np.abs(np.diff(f, axis=1)))) / (step * l_bound))
            cons = max(
                cons,
                float(np.max(np.abs(nf.value(xs, xs, axis, sign) - sign * flux.value(xs, axis)))),
            )
            back = nf.value(ww, vv, axis, -sign)
            symm = max(symm, float(np.max(np.abs(f + back))))
    return FluxAxiomReport(mono, lips, cons, symm)
