"""Seeded random exact instances for identity checks."""
from __future__ import annotations

import numpy as np
from gmpy2 import mpq

from . import forms as F
from .recalibration import recalibrate
from .resolution import ConnectionData, GaugeParam, connection_indices, param_indices
from .series import SeriesCoeff, SeriesRing, pack

_NUMS = (-2, -1, 1, 2, 3)
_DENS = (1, 2, 3)


def _rational(rng):
    return mpq(int(rng.choice(_NUMS)), int(rng.choice(_DENS)))


def random_series(rng, n, acc, max_terms=3, holomorphic=False, constant=True, min_degree=0):
    """Sparse series with small complex-rational coefficients."""
    terms = {}
    for _ in range(int(rng.integers(1, max_terms + 1))):
        d = int(rng.integers(min_degree, acc + 1)) if acc >= min_degree else min_degree
        nvars = n if holomorphic else 2 * n
        e = [0] * (2 * n)
        for _ in range(d):
            e[int(rng.integers(0, nvars))] += 1
        if not constant and sum(e) == 0:
            continue
        re = _rational(rng) if rng.random() < 0.8 else mpq(0)
        im = _rational(rng) if rng.random() < 0.5 else mpq(0)
        terms[pack(e)] = (re, im)
    return SeriesCoeff(n, terms, acc)


def random_form(rng, ring, rows, cols, q, acc, density=0.7, **kw):
    n = ring.n
    comps = {}
    for I in F.multi_indices(n, q):
        M = np.empty((rows, cols), dtype=object)
        for idx in np.ndindex(M.shape):
            M[idx] = random_series(rng, n, acc, **kw) if rng.random() < density else ring.zero(acc)
        comps[I] = M
    return F.MatrixForm(n, rows, cols, q, comps, ring)


def random_param(rng, n, m, p, acc, constant_terms=False):
    """Random gauge parameter; gauges are unipotent unless ``constant_terms``."""
    ring = SeriesRing(n)
    entries = {}
    for s, k in param_indices(m):
        if k > n:
            continue
        kw = {}
        if k == 0:
            kw = {"constant": False, "min_degree": 1}
        entries[(s, k)] = random_form(rng, ring, p[s + k], p[s], k, acc, **kw)
    eta = GaugeParam(n, m, p, ring, entries)
    if constant_terms:
        # add an invertible diagonal constant to the gauges
        for s in range(m + 1):
            diag = F.MatrixForm.identity(ring, n, p[s])
            c = mpq(int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            eta.entries[(s, 0)] = eta.entries[(s, 0)] + F.scale(diag, c - 1)
    return eta


def random_holomorphic_maps(rng, n, m, p, acc):
    """Maps phi[1..m] with holomorphic entries and phi[s-1] phi[s] = 0."""
    ring = SeriesRing(n)

    def hol():
        return random_series(rng, n, acc, max_terms=2, holomorphic=True)

    maps = {}
    forced = None  # left factor forced by the previous map, or None if free
    blocked = False  # previous map is non-zero with one column: only 0 composes
    for s in range(1, m + 1):
        rows, cols = p[s - 1], p[s]
        M = np.empty((rows, cols), dtype=object)
        if blocked or rng.random() < 0.15:
            for idx in np.ndindex(M.shape):
                M[idx] = ring.zero(acc)
            forced, blocked = None, False
        else:
            left = forced if forced is not None else [hol() for _ in range(rows)]
            right = [hol() for _ in range(cols)]
            for i in range(rows):
                for j in range(cols):
                    M[i, j] = left[i] * right[j]
            if all(c.is_zero() for c in M.flat):
                forced, blocked = None, False
            elif cols == 2:
                forced, blocked = [right[1], -right[0]], False
            else:
                forced, blocked = None, True
        maps[s] = F.MatrixForm(n, rows, cols, 0, {(): M}, ring)
    return maps


def holomorphic_connection(rng, n, m, p, acc):
    ring = SeriesRing(n)
    maps = random_holomorphic_maps(rng, n, m, p, acc)
    return ConnectionData(n, m, p, ring, {(s, -1): f for s, f in maps.items()})


def random_integrable(rng, n, m, p, acc):
    """Integrable data obtained by transforming a holomorphic complex."""
    omega0 = holomorphic_connection(rng, n, m, p, acc)
    eta = random_param(rng, n, m, p, acc)
    return recalibrate(eta, omega0)


def random_structure(rng, max_n=2, max_m=2, max_p=2):
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(0, max_m + 1))
    p = tuple(int(rng.integers(1, max_p + 1)) for _ in range(m + 1))
    return n, m, p


def random_connection(rng, n, m, p, acc):
    """Arbitrary (not necessarily integrable) connection data."""
    ring = SeriesRing(n)
    entries = {}
    for s, k in connection_indices(m):
        if k + 1 > n:
            continue
        entries[(s, k)] = random_form(rng, ring, p[s + k], p[s], k + 1, acc)
    return ConnectionData(n, m, p, ring, entries)
