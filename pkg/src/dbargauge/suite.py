"""Randomized exact identity checks on series data."""
from __future__ import annotations

import time

import numpy as np

from . import forms as F
from .instances import (random_form, random_integrable, random_param, random_structure)
from .recalibration import action_check, recalibrate
from .resolution import (GaugeParam, accumulate, eta_expansion, integrability_residual,
                         param_product)
from .series import SeriesCoeff, SeriesRing

CHECKS = ("dbar_squared", "leibniz", "wedge_assoc", "product_assoc", "product_neutral",
          "action_check", "integrability_preserved", "expansion")


def corrupted_product(eta1: GaugeParam, eta2: GaugeParam) -> GaugeParam:
    """Product law with zb_1 * I added to the (0,0) entry (negative control)."""
    out = param_product(eta1, eta2)
    g = out.get(0, 0)
    ring = g.backend
    bump = SeriesCoeff.variable(ring.n, 0, conj=True, acc=g.acc())
    M = np.empty((g.rows, g.cols), dtype=object)
    for idx in np.ndindex(M.shape):
        M[idx] = bump if idx[0] == idx[1] else ring.zero(g.acc())
    out.entries[(0, 0)] = g + F.MatrixForm(g.n, g.rows, g.cols, 0, {(): M}, ring)
    return out


def _param_equal(a: GaugeParam, b: GaugeParam) -> bool:
    keys = set(a.entries) | set(b.entries)
    return all(F.equal(a.get(*k), b.get(*k)) for k in keys)


def _form_checks(rng, n, acc):
    ring = SeriesRing(n)
    rows = [int(rng.integers(1, 3)) for _ in range(4)]
    qs = [int(rng.integers(0, n + 1)) for _ in range(3)]
    a = random_form(rng, ring, rows[0], rows[1], qs[0], acc)
    b = random_form(rng, ring, rows[1], rows[2], qs[1], acc)
    c = random_form(rng, ring, rows[2], rows[3], qs[2], acc)
    sq = F.dbar(F.dbar(a)).is_zero() if a.q + 2 <= n else True
    lhs = F.dbar(F.wedge(a, b))
    sign = -1 if a.q % 2 else 1
    rhs = F.wedge(F.dbar(a), b) + F.scale(F.wedge(a, F.dbar(b)), sign)
    leib = F.equal(lhs, rhs)
    assoc = F.equal(F.wedge(F.wedge(a, b), c), F.wedge(a, F.wedge(b, c)))
    return {"dbar_squared": sq, "leibniz": leib, "wedge_assoc": assoc}


def run_case(seed: int, case: int, acc: int = 4, max_n=2, max_m=2, max_p=2,
             expansion_steps: int = 3, corrupt: bool = False) -> dict:
    rng = np.random.default_rng([seed, case])
    n, m, p = random_structure(rng, max_n, max_m, max_p)
    out = _form_checks(rng, n, acc)
    e1 = random_param(rng, n, m, p, acc)
    e2 = random_param(rng, n, m, p, acc, constant_terms=True)
    e3 = random_param(rng, n, m, p, acc)
    neutral = GaugeParam.neutral(n, m, p, SeriesRing(n))
    out["product_assoc"] = _param_equal(param_product(param_product(e1, e2), e3),
                                        param_product(e1, param_product(e2, e3)))
    out["product_neutral"] = (_param_equal(param_product(neutral, e2), e2)
                              and _param_equal(param_product(e2, neutral), e2))
    omega = random_integrable(rng, n, m, p, acc)
    product = corrupted_product if corrupt else param_product
    out["action_check"] = action_check(e1, e2, omega, product=product)["ok"]
    moved = recalibrate(e2, omega)
    out["integrability_preserved"] = (
        all(r.is_zero() for r in integrability_residual(omega).values())
        and all(r.is_zero() for r in integrability_residual(moved).values()))
    steps = [e1, e2, e3][:max(1, expansion_steps)]
    total = accumulate(steps)
    out["expansion"] = all(F.equal(eta_expansion(steps, s, t), total.get(s, t))
                           for s, t in total.indices() if t >= 1)
    return {"case": case, "n": n, "m": m, "p": list(p), "checks": out}


def run_suite(seed: int = 0, cases: int = 50, acc: int = 4, max_n=2, max_m=2, max_p=2,
              corrupt: bool = False, timing: bool = False) -> dict:
    """All checks on ``cases`` instances; the report is deterministic unless ``timing``."""
    t0 = time.perf_counter()
    results = [run_case(seed, i, acc, max_n, max_m, max_p, corrupt=corrupt) for i in range(cases)]
    passed = {c: sum(r["checks"][c] for r in results) for c in CHECKS}
    failures = [{"case": r["case"], "check": c} for r in results for c in CHECKS
                if not r["checks"][c]]
    report = {
        "seed": seed, "cases": cases, "accuracy_degree": acc,
        "sizes": {"max_n": max_n, "max_m": max_m, "max_p": max_p},
        "passed": passed, "failures": failures, "ok": not failures,
        "instances": results,
    }
    if timing:
        report["seconds"] = time.perf_counter() - t0
    return report
