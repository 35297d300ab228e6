import math

import numpy as np
import pytest

from dbargauge import forms as F
from dbargauge.grid import PolarGrid
from dbargauge.koppelman import QuadratureSpec
from dbargauge.nash_moser import (InputError, Schedule, SolveConfig, UnitConditionError,
                                  alpha_threshold, build_step_param, composition_defect,
                                  iterate, loss_exponent, order_exponent, predictor,
                                  sigma_residual)
from dbargauge.problem import bundled
from dbargauge.resolution import AugmentedData, ConnectionData
from dbargauge.series import SeriesCoeff, SeriesRing


def test_schedule_formulas():
    for m in (0, 1, 3):
        sched = Schedule(m, 0.5)
        r = 0.5
        for k in range(101):
            assert sched.sigma(k) == math.exp(-k - 2)
            assert abs(sched.radius(k) - r) <= 1e-15 * r
            for l in range(m + 2):
                want = r * (1 - l * math.exp(-k - 2) / (m + 1))
                assert abs(sched.radius_l(k, l) - want) <= 1e-15
            r *= 1 - math.exp(-k - 2)
    assert Schedule.sigma(0) == pytest.approx(0.1353352832, abs=1e-10)
    sched = Schedule(0, 1.0)
    assert sched.radius_l(4, 1) == pytest.approx(sched.radius(5), rel=1e-15)
    # prod_{j>=1} (1 - q^j) by the pentagonal number series, q = 1/e
    q = math.exp(-1)
    euler = sum((-1) ** k * q ** (k * (3 * k - 1) // 2) for k in range(-30, 31))
    assert Schedule.shrink_product() == pytest.approx(euler / (1 - q), abs=1e-15)
    assert sched.limit_radius() > 0
    with pytest.raises(ValueError):
        sched.radius_l(0, 2)
    with pytest.raises(ValueError):
        Schedule(0, 0.0)


def test_predictor():
    zero = predictor(0.0)
    assert all(a == 0 for a in zero["alpha"]) and all(b == 0 for b in zero["beta"])
    for m in (0, 1, 2):
        a0, H = 1e-3, 10.0
        p = predictor(a0, H, m=m, K=3)
        nu = ((m + 2) * m + 1) * order_exponent(1, 0)
        assert loss_exponent(m, 1, 0) == nu
        assert p["alpha"][1] == pytest.approx(a0 ** 2 * H * math.exp(-2) ** (-nu), rel=1e-12)
    th = alpha_threshold()
    series = predictor(0.5 * th, K=12)["alpha"]
    ratios = [b / a for a, b in zip(series[:-1], series[1:]) if a > 0]
    assert all(np.isfinite(series)) and ratios[-1] < ratios[2] < 1
    with pytest.raises(ValueError):
        predictor(-1.0)


def dzb_form(grid, func):
    M = np.empty((1, 1), dtype=object)
    M[0, 0] = grid.sample(func)
    return F.MatrixForm(1, 1, 1, 1, {(1,): M}, grid)


def test_step_parameter():
    grid = PolarGrid(0.5, 32, 64)
    sched = Schedule(0, 0.5)
    spec = QuadratureSpec(32, 64)
    zero = ConnectionData(1, 0, (1,), grid, {})
    eta = build_step_param(zero, sched, 0, spec)
    assert F.sup_norm(eta.get(0, 0)) == 0.0
    c = 0.3 - 0.2j
    omega = ConnectionData(1, 0, (1,), grid, {(0, 0): dzb_form(grid, lambda z: c + 0 * z)})
    eta = build_step_param(omega, sched, 0, spec)
    g = eta.backend
    assert g.radius == pytest.approx(sched.radius_l(0, 0))
    vals = eta.get(0, 0).component(()).flat[0].values
    assert np.max(np.abs(vals + c * np.conj(g.z))) < 1e-12
    with pytest.raises(ValueError):
        build_step_param(omega)


def test_step_parameter_two_levels_has_no_degree_one_part():
    prob = bundled("manufactured_m1")
    grid = PolarGrid(0.5, 32, 64)
    omega = prob.augmented(grid).connection
    eta = build_step_param(omega, Schedule(1, 0.5), 0, QuadratureSpec(32, 64))
    assert eta.get(0, 1).is_zero()
    assert not eta.get(0, 0).is_zero() and not eta.get(1, 0).is_zero()


def test_series_step_parameter_is_exact():
    ring = SeriesRing(2)
    one = SeriesCoeff.constant(2, 1)
    w = F.MatrixForm(2, 1, 1, 1, {(1,): np.array([[one]], dtype=object)}, ring)
    eta = build_step_param(ConnectionData(2, 0, (1,), ring, {(0, 0): w}))
    assert F.equal(F.dbar(eta.get(0, 0)), F.scale(w, -1))


def test_zero_data_converge_immediately():
    grid = PolarGrid(0.5, 16, 32)
    data = AugmentedData(ConnectionData(1, 0, (1,), grid, {}))
    rep = iterate(data, SolveConfig(n_rad=16, n_ang=32))
    assert rep.converged and rep.iterations == 0
    assert F.equal(rep.gauges[0], F.identity_form(rep.gauges[0].backend, 1, 1))
    assert all(v == 0 for v in rep.system_residual.values())


def test_manufactured_solve_on_moderate_grid():
    prob = bundled("manufactured_m0")
    cfg = SolveConfig(r0=0.5, n_rad=64, n_ang=128, tol=1e-7)
    rep = iterate(prob.augmented(PolarGrid(0.5, 64, 128)), cfg)
    assert rep.converged
    a = [row["a_k"] for row in rep.history]
    assert all(y < x for x, y in zip(a, a[1:]))
    assert rep.system_residual[(0, 0)] < 1e-6
    assert composition_defect(rep, rep.iterations) < 1e-8
    rows = rep.summary()
    assert rows["converged"] and rows["gauge_sup"]["0"] < 2


def test_unit_condition_guard():
    prob = bundled("manufactured_m0")
    cfg = SolveConfig(r0=0.95, n_rad=32, n_ang=64)
    with pytest.raises(UnitConditionError) as info:
        iterate(prob.augmented(PolarGrid(0.95, 32, 64)), cfg)
    assert "smaller r0" in str(info.value)
    assert info.value.report is not None and not info.value.report.converged


def test_input_errors():
    with pytest.raises(InputError):
        iterate(bundled("nonintegrable_n2").augmented())
    ring = SeriesRing(1)
    zb = SeriesCoeff.variable(1, 0, conj=True)
    z = SeriesCoeff.variable(1, 0)
    phi = F.MatrixForm(1, 1, 1, 0, {(): np.array([[z]], dtype=object)}, ring)
    w = F.MatrixForm(1, 1, 1, 1, {(1,): np.array([[zb]], dtype=object)}, ring)
    bad = ConnectionData(1, 1, (1, 1), ring, {(1, -1): phi, (0, 0): w})
    with pytest.raises(InputError):
        iterate(AugmentedData(bad), SolveConfig(n_rad=16, n_ang=32))
    for kw in ({"eps": 0.6}, {"r0": -1.0}, {"mu": 1.0}, {"max_iter": -1}):
        with pytest.raises(InputError):
            SolveConfig(**kw)


def test_sigma_residual():
    grid = PolarGrid(0.5, 32, 64)
    I = F.identity_form(grid, 1, 1)
    M = np.empty((1, 1), dtype=object)
    M[0, 0] = grid.sample(np.conj)
    psi = F.MatrixForm(1, 1, 1, 0, {(): M}, grid)
    assert sigma_residual({}, psi, {0: I})["psi"] == pytest.approx(1.0, abs=1e-12)
    M2 = np.empty((1, 1), dtype=object)
    M2[0, 0] = grid.sample(lambda z: z ** 2)
    hol = F.MatrixForm(1, 1, 1, 0, {(): M2}, grid)
    res = sigma_residual({1: hol}, hol, {0: I, 1: I})
    assert res["psi"] < 1e-12 and res["phi_1"] < 1e-12
