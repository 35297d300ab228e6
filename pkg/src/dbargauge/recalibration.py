"""Right action of gauge parameters on connection data."""
from __future__ import annotations

from . import forms as F
from .resolution import ConnectionData, GaugeParam, _same_structure, param_product


def _signed(form, sign):
    return form if sign > 0 else F.scale(form, -1)


def recalibrate(eta: GaugeParam, omega: ConnectionData) -> ConnectionData:
    """Connection data transformed by ``eta``.

    Entries are produced by increasing ``k`` since the ``(s, k)`` entry uses
    already transformed entries ``(s, j)`` with ``j < k``.  The ``k = -1``
    entries become ``gauge[s-1]^{-1} phi[s] gauge[s]``; for ``m = 0`` the
    single entry is the usual gauge change ``g^{-1}(dbar g + w g)``.
    """
    _same_structure(eta, omega)
    m = omega.m
    inv = {s: F.invert_unit(eta.gauge(s)) for s in range(m + 1)}
    new: dict = {}

    def new_get(s, j):
        # (0, -1) is never stored, so it falls back to a zero of the right shape
        return new[(s, j)] if (s, j) in new else omega.get(s, j)

    for k in range(-1, m + 1):
        for s in range(min(m, m - k) + 1):
            if (s, k) == (0, -1):
                continue
            val = omega.get(s, k)
            if k >= 0:
                val = val + F.dbar(eta.get(s, k))
            for j in range(k + 2):
                val = val + F.wedge(omega.get(s + j, k - j), eta.get(s, j))
            for j in range(-1, k):
                term = F.wedge(eta.get(s + j, k - j), new_get(s, j))
                val = val - _signed(term, 1 if (k - j) % 2 == 0 else -1)
            new[(s, k)] = F.wedge(inv[s + k], val)
    return ConnectionData._from(omega, new)


def action_check(eta1: GaugeParam, eta2: GaugeParam, omega: ConnectionData,
                 product=param_product, atol: float = 0.0) -> dict:
    """Compare acting by ``eta1`` then ``eta2`` against acting by their product.

    Returns ``{"ok": bool, "delta": {(s,k): sup of difference}, "exact": ...}``.
    Series data are compared exactly up to accuracy; grid data by sup norm.
    """
    lhs = recalibrate(eta2, recalibrate(eta1, omega))
    rhs = recalibrate(product(eta1, eta2), omega)
    delta = {}
    exact = {}
    for key in omega.indices():
        d = lhs.get(*key) - rhs.get(*key)
        delta[key] = F.sup_norm(d)
        exact[key] = F.equal(lhs.get(*key), rhs.get(*key), atol=atol)
    return {"ok": all(exact.values()), "delta": delta, "exact": exact}


def system_residual(eta: GaugeParam, omega: ConnectionData) -> dict:
    """Residual of the equations saying that ``eta`` gauges ``omega`` to its maps.

    For every (s, t) with t >= 0 this is the bracket of the transformation
    rule with the transformed higher entries set to zero:
    ``dbar eta[s,t] + w[s,t] + sum_j w[s+j,t-j] ^ eta[s,j]
    + (-1)^t eta[s-1,t+1] ^ phi'[s]`` where ``phi'`` are the transformed
    maps.  Multiplying the transformed entry by the gauge gives the same
    quantity, so it vanishes exactly when ``eta`` solves the problem.
    For m = 0 it is ``dbar g + w g``.
    """
    _same_structure(eta, omega)
    m = omega.m
    new_phi = {}
    for s in range(1, m + 1):
        gi = F.invert_unit(eta.gauge(s - 1))
        new_phi[s] = F.wedge(F.wedge(gi, omega.phi(s)), eta.gauge(s))
    out = {}
    for s, t in eta.indices():
        val = omega.get(s, t) + F.dbar(eta.get(s, t))
        for j in range(t + 2):
            val = val + F.wedge(omega.get(s + j, t - j), eta.get(s, j))
        if 1 <= s <= m:
            term = F.wedge(eta.get(s - 1, t + 1), new_phi[s])
            val = val + _signed(term, 1 if t % 2 == 0 else -1)
        out[(s, t)] = val
    return out
