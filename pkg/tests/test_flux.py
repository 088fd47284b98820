"""Unit tests for flux functions and monotone face fluxes."""

import dataclasses

import numpy as np
import pytest

from stofv.flux import (MonotoneFaceFlux, burgers, cubic, linear, make_flux,
                        validate_flux)

KINDS = ("godunov", "rusanov", "engquist_osher")


def test_builtin_flux_values():
    b = burgers(1)
    assert b.value(0.6, 0) == pytest.approx(0.18)
    assert b.deriv(0.6, 0) == pytest.approx(0.6)
    c = cubic(1)
    assert c.value(0.9, 0) == pytest.approx(0.9**3 / 3)
    assert c.deriv(-0.5, 0) == pytest.approx(0.25)
    lin = linear([2.0, -1.0])
    assert lin.value(0.3, 1) == pytest.approx(-0.3)
    assert lin.la == 2.0


def test_make_flux_dispatch():
    assert make_flux("burgers", 2).dim == 2
    assert make_flux("linear", 1, {"velocity": [0.5]}).la == 0.5
    with pytest.raises(ValueError):
        make_flux("unknown", 1)
    with pytest.raises(ValueError):
        make_flux("linear", 2, {"velocity": [1.0]})


def test_check_lipschitz_rejects_understated_constant():
    b = burgers(1)
    assert b.check_lipschitz() <= 1.0
    bad = dataclasses.replace(b, la=0.5)
    with pytest.raises(ValueError):
        bad.check_lipschitz()


def test_godunov_burgers_riemann_values():
    # classical Godunov values for A(u) = u^2/2 on the outward +x face
    nf = MonotoneFaceFlux("godunov", burgers(1))
    assert nf.value(1.0, 0.0, 0, +1) == pytest.approx(0.5)   # shock
    assert nf.value(0.0, 1.0, 0, +1) == pytest.approx(0.0)   # rarefaction
    assert nf.value(-1.0, 1.0, 0, +1) == pytest.approx(0.0)  # sonic inside
    assert nf.value(1.0, -1.0, 0, +1) == pytest.approx(0.5)  # max at ends


def test_engquist_osher_burgers_closed_form():
    # F(v, w) = A(max(v,0)) + A(min(w,0)) for convex A with A'(0)=0
    nf = MonotoneFaceFlux("engquist_osher", burgers(1))
    rng = np.random.default_rng(3)
    for v, w in rng.uniform(-1, 1, size=(20, 2)):
        expect = 0.5 * max(v, 0.0) ** 2 + 0.5 * min(w, 0.0) ** 2
        assert nf.value(v, w, 0, +1) == pytest.approx(expect, abs=1e-14)


def test_rusanov_closed_form():
    nf = MonotoneFaceFlux("rusanov", burgers(1), rusanov_lam=1.5)
    v, w = 0.4, -0.7
    expect = 0.5 * (0.5 * v**2 + 0.5 * w**2) - 0.75 * (w - v)
    assert nf.value(v, w, 0, +1) == pytest.approx(expect, abs=1e-14)
    assert nf.lam == 1.5


def test_partial_signs_all_kinds():
    rng = np.random.default_rng(5)
    pairs = rng.uniform(-1, 1, size=(50, 2))
    for kind in KINDS:
        nf = MonotoneFaceFlux(kind, burgers(1))
        for v, w in pairs:
            assert nf.d1(v, w, 0, +1) >= -1e-14
            assert nf.d2(v, w, 0, +1) <= 1e-14


def test_conservative_symmetry():
    # flux K -> L through a face equals minus the flux L -> K
    for kind in KINDS:
        nf = MonotoneFaceFlux(kind, burgers(2))
        rng = np.random.default_rng(7)
        for v, w in rng.uniform(-1, 1, size=(20, 2)):
            for axis in range(2):
                a = nf.value(v, w, axis, +1)
                b = nf.value(w, v, axis, -1)
                assert a == pytest.approx(-b, abs=1e-14)


def test_consistency_with_flux():
    for name in ("burgers", "cubic"):
        fl = make_flux(name, 1)
        for kind in KINDS:
            nf = MonotoneFaceFlux(kind, fl)
            for u in np.linspace(-1, 1, 11):
                assert nf.value(u, u, 0, +1) == pytest.approx(
                    fl.value(u, 0), abs=1e-14)


def test_validate_flux_passes_builtin_kinds():
    for name in ("burgers", "linear"):
        fl = make_flux(name, 1)
        for kind in KINDS:
            lam = 2.0 if kind == "rusanov" else None
            nf = MonotoneFaceFlux(kind, fl, rusanov_lam=lam)
            report = validate_flux(nf, fl, value_range=(-2.0, 2.0))
            assert report.all_ok, (name, kind, report.as_dict())


def test_validate_flux_catches_nonmonotone_rusanov():
    fl = burgers(1)
    nf = MonotoneFaceFlux("rusanov", fl, rusanov_lam=0.05)
    report = validate_flux(nf, fl, value_range=(-2.0, 2.0))
    assert not report.monotony_ok


def test_godunov_partials_at_tie():
    # at a symmetric shock both endpoints attain the max; the partials
    # stay one-sided (d1 >= 0, d2 <= 0) and sum consistently
    nf = MonotoneFaceFlux("godunov", burgers(1))
    assert nf.d1(1.0, -1.0, 0, +1) >= 0.0
    assert nf.d2(1.0, -1.0, 0, +1) <= 0.0
