import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbargauge import forms as F
from dbargauge.instances import (holomorphic_connection, random_connection, random_integrable,
                                 random_param, random_structure)
from dbargauge.resolution import (ConnectionData, GaugeParam, accumulate, complex_residual,
                                  connection_indices, eta_expansion, integrability_residual,
                                  param_indices, param_product)
from dbargauge.series import SeriesCoeff, SeriesRing

seeds = st.integers(0, 2 ** 32 - 1)


def _structure(seed, **kw):
    rng = np.random.default_rng(seed)
    return rng, random_structure(rng, **kw)


def param_equal(a, b):
    return all(F.equal(a.get(*k), b.get(*k)) for k in set(a.entries) | set(b.entries))


def test_index_ranges():
    assert connection_indices(1) == [(0, 0), (0, 1), (1, -1), (1, 0)]
    assert param_indices(1) == [(0, 0), (0, 1), (1, 0)]
    assert len(connection_indices(3)) == sum(m + 2 for m in range(4)) - 1


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_product_is_a_monoid(seed):
    rng, (n, m, p) = _structure(seed, max_n=2, max_m=3, max_p=2)
    a, b, c = (random_param(rng, n, m, p, 3, constant_terms=bool(i % 2)) for i in range(3))
    neutral = GaugeParam.neutral(n, m, p, SeriesRing(n))
    assert param_equal(param_product(param_product(a, b), c), param_product(a, param_product(b, c)))
    assert param_equal(param_product(neutral, b), b)
    assert param_equal(param_product(b, neutral), b)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_product_gauge_is_matrix_product(seed):
    rng, (n, m, p) = _structure(seed)
    a = random_param(rng, n, m, p, 3, constant_terms=True)
    b = random_param(rng, n, m, p, 3, constant_terms=True)
    ab = param_product(a, b)
    for s in range(m + 1):
        assert F.equal(ab.gauge(s), F.wedge(a.gauge(s), b.gauge(s)))


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 4))
def test_expansion_matches_iterated_product(seed, k):
    rng, (n, m, p) = _structure(seed, max_n=3, max_m=3, max_p=2)
    steps = [random_param(rng, n, m, p, 3, constant_terms=(j == 0)) for j in range(k)]
    total = accumulate(steps)
    for s, t in total.indices():
        if t >= 1:
            assert F.equal(eta_expansion(steps, s, t), total.get(s, t))


def test_expansion_requires_positive_degree():
    ring = SeriesRing(1)
    eta = GaugeParam.neutral(1, 1, (1, 1), ring)
    with pytest.raises(ValueError):
        eta_expansion([eta], 0, 0)
    with pytest.raises(ValueError):
        eta_expansion([], 0, 1)
    with pytest.raises(ValueError):
        accumulate([])


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_holomorphic_complexes_and_their_transforms_are_integrable(seed):
    rng, (n, m, p) = _structure(seed, max_m=3)
    for omega in (holomorphic_connection(rng, n, m, p, 4), random_integrable(rng, n, m, p, 4)):
        assert all(r.is_zero() for r in integrability_residual(omega).values())
        assert all(r.is_zero() for r in complex_residual(omega).values())


def test_generic_data_are_not_integrable():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(10):
        omega = random_connection(rng, 2, 1, (2, 1), 3)
        hits += any(not r.is_zero() for r in integrability_residual(omega).values())
    assert hits >= 8


def test_m0_residual_is_curvature():
    ring = SeriesRing(2)
    z2b = SeriesCoeff.variable(2, 1, conj=True)
    w = F.MatrixForm(2, 1, 1, 1, {(1,): np.array([[z2b]], dtype=object)}, ring)
    omega = ConnectionData(2, 0, (1,), ring, {(0, 0): w})
    res = integrability_residual(omega)[(0, 0)]
    # dbar(zb2 dzb1) = -dzb1 ^ dzb2, and the scalar wedge w ^ w vanishes
    assert F.component_values(res, (1, 2), np.zeros((1, 2)))[0, 0, 0] == -1


def test_structure_validation():
    ring = SeriesRing(1)
    one = F.identity_form(ring, 1, 1)
    two = F.identity_form(ring, 1, 2)
    with pytest.raises(ValueError):
        GaugeParam(1, 1, (1,), ring, {})
    with pytest.raises(ValueError):
        GaugeParam(1, 0, (0,), ring, {})
    with pytest.raises(ValueError):
        GaugeParam(1, 0, (1,), ring, {(0, 0): two})
    with pytest.raises(ValueError):
        GaugeParam(1, 0, (1,), ring, {(0, 1): one})
    with pytest.raises(ValueError):
        ConnectionData(1, 0, (1,), ring, {(0, 0): one})
    a = GaugeParam.neutral(1, 0, (1,), ring)
    with pytest.raises(ValueError):
        param_product(a, GaugeParam.neutral(1, 0, (2,), ring))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_expansion_special_cases(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 3)), 2
    p = tuple(int(rng.integers(1, 3)) for _ in range(m + 1))
    steps = [random_param(rng, n, m, p, 3, constant_terms=True) for _ in range(3)]
    for s, t in steps[0].indices():
        if t >= 1:
            assert F.equal(eta_expansion(steps[:1], s, t), steps[0].get(s, t))
    # t = 1: (sum_j g_{s+1}(j-1) eta_j g_s(j)^{-1}) g_s(3), g(j) the ordered gauge products
    for s in range(m):
        def g(idx, j):
            out = F.identity_form(SeriesRing(n), n, p[idx])
            for e in steps[:j]:
                out = F.wedge(out, e.gauge(idx))
            return out
        total = None
        for j in range(1, 4):
            term = F.wedge(F.wedge(g(s + 1, j - 1), steps[j - 1].get(s, 1)),
                           F.invert_unit(g(s, j)))
            total = term if total is None else total + term
        assert F.equal(eta_expansion(steps, s, 1), F.wedge(total, g(s, 3)))
    assert all(F.equal(accumulate(steps[:1]).get(*k), steps[0].get(*k)) for k in steps[0].indices())
