import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbargauge import forms as F
from dbargauge.expr import parse, to_series
from dbargauge.koppelman import (QuadratureSpec, cauchy_transform, formal_homotopy,
                                 homotopy_operator, homotopy_residual, monomial_probes,
                                 operator_norm_probe, scaled_transform)
from dbargauge.series import SeriesRing

from strategies import matrix_forms

SPEC = QuadratureSpec(48, 96)


def one_form(grid, func):
    M = np.empty((1, 1), dtype=object)
    M[0, 0] = grid.sample(func)
    return F.MatrixForm(1, 1, 1, 1, {(1,): M}, grid)


def values(form):
    return form.component(()).flat[0].values if form.q == 0 else form.component((1,)).flat[0].values


def mode_oracle(n, f, r, z):
    """-(1/pi) int_{B_r} f(rho) e^{i n theta} / (zeta - z) dA by the Laurent expansion of the kernel.

    Inner part (n <= 0):  2 z^(n-1) int_0^s f rho^(1-n) drho
    Outer part (n >= 1): -2 z^(n-1) int_s^r f rho^(1-n) drho
    """
    x, w = np.polynomial.legendre.leggauss(80)
    out = np.empty(z.shape, dtype=complex)
    for idx, zz in np.ndenumerate(z):
        s = abs(zz)
        lo, hi = (0.0, s) if n <= 0 else (s, r)
        rho = 0.5 * (hi - lo) * (x + 1) + lo
        integral = 0.5 * (hi - lo) * np.sum(w * f(rho) * rho ** (1 - n))
        out[idx] = (2 if n <= 0 else -2) * zz ** (n - 1) * integral
    return out


@pytest.mark.parametrize("n", [-2, -1, 0, 1, 2, 3])
def test_cauchy_transform_matches_mode_oracle(n):
    r = 1.0
    grid = SPEC.grid(r)
    f = lambda rho: rho ** abs(n) * np.exp(-rho ** 2)
    u = one_form(grid, lambda z: f(np.abs(z)) * np.exp(1j * n * np.angle(z)))
    got = values(cauchy_transform(u, r, SPEC))
    sub = grid.z[::6, ::12]
    want = mode_oracle(n, f, r, sub)
    assert np.max(np.abs(got[::6, ::12] - want)) < 1e-8


def test_constant_coefficient_gives_conjugate_variable():
    for r in (1.0, 0.5):
        grid = SPEC.grid(r)
        u = one_form(grid, lambda z: np.ones_like(z))
        assert np.max(np.abs(values(cauchy_transform(u, r, SPEC)) - np.conj(grid.z))) < 1e-12
        assert np.max(np.abs(values(scaled_transform(u, r, SPEC)) - np.conj(grid.z))) < 1e-12


def test_zero_and_linearity():
    grid = SPEC.grid(1.0)
    zero = one_form(grid, lambda z: 0 * z)
    assert F.sup_norm(cauchy_transform(zero, 1.0, SPEC)) == 0.0
    assert homotopy_residual(zero, 1.0, SPEC) == 0.0
    a = one_form(grid, lambda z: z * np.conj(z))
    b = one_form(grid, lambda z: np.exp(z))
    lhs = cauchy_transform(F.scale(a, 2) + F.scale(b, -3j), 1.0, SPEC)
    rhs = F.scale(cauchy_transform(a, 1.0, SPEC), 2) + F.scale(cauchy_transform(b, 1.0, SPEC), -3j)
    assert F.equal(lhs, rhs, atol=1e-12)


def test_scaled_transform_agrees_with_direct_quadrature():
    r = 0.5
    grid = SPEC.grid(r)
    u = one_form(grid, lambda z: 1 + 2 * z - 3 * z * np.conj(z) + np.conj(z) ** 2)
    direct = values(cauchy_transform(u, r, SPEC))
    scaled = values(scaled_transform(u, r, SPEC))
    assert np.max(np.abs(direct - scaled)) <= 1e-6 * np.max(np.abs(direct))
    with pytest.raises(ValueError):
        scaled_transform(u, 1.0, SPEC)  # data on B_0.5 cannot be transformed on B_1
    unit = one_form(SPEC.grid(1.0), lambda z: z)
    assert F.equal(scaled_transform(unit, 1.0, SPEC), cauchy_transform(unit, 1.0, SPEC), atol=1e-15)


def test_homotopy_residual_on_matrix_form_and_series_input():
    grid = SPEC.grid(1.0)
    M = np.empty((2, 1), dtype=object)
    M[0, 0] = grid.sample(lambda z: z)
    M[1, 0] = grid.sample(lambda z: np.exp(-z * np.conj(z)))
    u = F.MatrixForm(1, 2, 1, 1, {(1,): M}, grid)
    assert homotopy_residual(u, 1.0, SPEC) < 1e-8
    ring = SeriesRing(1)
    s = F.MatrixForm.identity(ring, 1, 1)
    dzb = F.MatrixForm(1, 1, 1, 1, {(1,): s.component(())}, ring)
    assert homotopy_residual(dzb, 1.0, SPEC) < 1e-10


def test_degree_checks():
    grid = SPEC.grid(1.0)
    with pytest.raises(ValueError):
        cauchy_transform(F.identity_form(grid, 1, 1), 1.0, SPEC)
    with pytest.raises(ValueError):
        homotopy_operator(F.identity_form(grid, 1, 1), 1.0, SPEC)
    with pytest.raises(ValueError):
        cauchy_transform(one_form(grid, lambda z: z), 1.5, SPEC)
    with pytest.raises(ValueError):
        QuadratureSpec(4, 96)
    with pytest.raises(ValueError):
        QuadratureSpec(48, 96, taylor_order=9)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_formal_homotopy_identity(data):
    n = data.draw(st.integers(1, 3))
    q = data.draw(st.integers(1, n))
    u = data.draw(matrix_forms(n, 1, 2, q, acc=float("inf")))
    lhs = F.dbar(formal_homotopy(u))
    if q < n:
        lhs = lhs + formal_homotopy(F.dbar(u))
    assert F.equal(lhs, u)


def test_formal_homotopy_solves_closed_forms_in_one_variable():
    ring = SeriesRing(1)
    c = to_series(parse("z^2*zb + 3*zb^2", 1), 1, 8)
    u = F.MatrixForm(1, 1, 1, 1, {(1,): np.array([[c]], dtype=object)}, ring)
    assert F.equal(F.dbar(homotopy_operator(u, 1.0)), u)


def test_operator_norm_probe_monotone_and_finite():
    spec = QuadratureSpec(32, 64)
    ratios = [operator_norm_probe(0, s, 1.0, spec)["ratio"] for s in (0.2, 0.5, 0.8)]
    assert all(np.isfinite(ratios)) and all(x > 0 for x in ratios)
    assert ratios[0] >= ratios[1] >= ratios[2]
    single = operator_norm_probe(0, 0.5, 1.0, spec, probes=[(0, 0)])
    assert 0 < single["ratio"] < np.inf
    assert single["ratio"] <= single["bound"]
    assert len(monomial_probes(2)) == 6
    with pytest.raises(ValueError):
        operator_norm_probe(0, 1.0, 1.0, spec)
