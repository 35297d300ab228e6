"""Connection data of a complex of matrix-valued forms and gauge parameters.

Indexing follows the total-degree grading:

* a connection entry ``(s, k)`` with ``0 <= s <= m``, ``-1 <= k <= m - s``
  and ``(s, k) != (0, -1)`` is a ``p[s+k] x p[s]`` matrix of ``(k+1)``-forms;
  the ``k = -1`` entries are the maps of the complex;
* a gauge parameter entry ``(s, k)`` with ``0 <= k <= m - s`` is a
  ``p[s+k] x p[s]`` matrix of ``k``-forms and ``I + eta[s, 0]`` is the gauge
  acting on the ``s``-th term.

Entries outside these ranges read as zero of the appropriate shape.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

from . import forms as F
from .forms import MatrixForm


def _dim(p, i):
    return p[i] if 0 <= i < len(p) else 0


def connection_indices(m: int):
    return [(s, k) for s in range(m + 1) for k in range(-1, m - s + 1) if (s, k) != (0, -1)]


def param_indices(m: int):
    return [(s, k) for s in range(m + 1) for k in range(0, m - s + 1)]


class _Graded:
    _offset = 1  # form degree = k + offset

    def __init__(self, n, m, p, backend, entries):
        p = tuple(int(x) for x in p)
        if len(p) != m + 1:
            raise ValueError(f"need m + 1 = {m + 1} ranks, got {len(p)}")
        if any(x < 1 for x in p):
            raise ValueError("ranks must be positive")
        self.n, self.m, self.p, self.backend = n, m, p, backend
        allowed = set(self.indices())
        self.entries = {}
        for key, form in entries.items():
            s, k = key
            if (s, k) not in allowed:
                raise ValueError(f"index {(s, k)} is outside the admissible range for m={m}")
            want = (p[s + k], p[s])
            if form.shape != want:
                raise ValueError(f"entry {(s, k)} has shape {form.shape}, expected {want}")
            if form.q != k + self._offset:
                raise ValueError(
                    f"entry {(s, k)} has form degree {form.q}, expected {k + self._offset}"
                )
            if form.n != n or form.backend != backend:
                raise ValueError(f"entry {(s, k)} lives on a different backend")
            self.entries[(s, k)] = form

    def indices(self):
        raise NotImplementedError

    def get(self, s, k) -> MatrixForm:
        f = self.entries.get((s, k))
        if f is not None:
            return f
        return F.zero_form(
            self.backend, self.n, _dim(self.p, s + k), _dim(self.p, s), max(k + self._offset, 0)
        )

    def __getitem__(self, key):
        return self.get(*key)

    def map(self, fn):
        return type(self)._from(self, {key: fn(f) for key, f in self.entries.items()})

    @classmethod
    def _from(cls, like, entries, backend=None):
        backend = backend if backend is not None else like.backend
        return cls(like.n, like.m, like.p, backend, entries)

    def with_backend(self, backend, fn):
        """Copy with every entry mapped by ``fn`` onto ``backend``."""
        return type(self)._from(self, {key: fn(f) for key, f in self.entries.items()}, backend)


class ConnectionData(_Graded):
    """Maps of a complex together with their higher connection terms."""

    _offset = 1

    def indices(self):
        return connection_indices(self.m)

    def phi(self, s):
        return self.get(s, -1)

    def __repr__(self):
        return f"ConnectionData(n={self.n}, m={self.m}, p={self.p}, entries={sorted(self.entries)})"


class GaugeParam(_Graded):
    """Gauge parameter; ``gauge(s)`` is the matrix function I + eta[s,0]."""

    _offset = 0

    def indices(self):
        return param_indices(self.m)

    def gauge(self, s):
        return F.identity_form(self.backend, self.n, self.p[s]) + self.get(s, 0)

    @classmethod
    def neutral(cls, n, m, p, backend):
        return cls(n, m, p, backend, {})

    def __repr__(self):
        return f"GaugeParam(n={self.n}, m={self.m}, p={self.p}, entries={sorted(self.entries)})"


@dataclass
class AugmentedData:
    """Connection data plus the augmentation map ``psi`` (``p_aug x p[0]``)."""

    connection: ConnectionData
    psi: MatrixForm | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.psi is not None:
            if self.psi.q != 0 or self.psi.cols != self.connection.p[0]:
                raise ValueError("psi must be a matrix of functions with p[0] columns")


def _same_structure(a: _Graded, b: _Graded):
    if (a.n, a.m, a.p) != (b.n, b.m, b.p):
        raise ValueError("parameters have different structure (n, m or ranks)")
    if a.backend != b.backend:
        raise ValueError("parameters live on different backends")


def param_product(eta1: GaugeParam, eta2: GaugeParam) -> GaugeParam:
    """Semigroup law: the gauge of the product is gauge(eta1) * gauge(eta2)."""
    _same_structure(eta1, eta2)
    out = {}
    for s, k in eta1.indices():
        val = eta1.get(s, k) + eta2.get(s, k)
        for j in range(k + 1):
            val = val + F.wedge(eta1.get(s + j, k - j), eta2.get(s, j))
        out[(s, k)] = val
    return GaugeParam._from(eta1, out)


def accumulate(steps) -> GaugeParam:
    """Left fold of :func:`param_product` over ``steps``."""
    steps = list(steps)
    if not steps:
        raise ValueError("accumulate needs at least one parameter")
    acc = steps[0]
    for eta in steps[1:]:
        acc = param_product(acc, eta)
    return acc


def _compositions(t):
    """Tuples of positive integers summing to t (the non-zero prefix of tau)."""
    if t == 0:
        yield ()
        return
    for first in range(1, t + 1):
        for rest in _compositions(t - first):
            yield (first,) + rest


def eta_expansion(steps, s: int, t: int) -> MatrixForm:
    """Closed-form component ``(s, t)``, ``t >= 1``, of the product of ``steps``.

    The sum runs over compositions ``tau`` of ``t`` into ``rho`` parts and
    strictly increasing step labels ``j_1 < ... < j_rho``; each factor is
    conjugated by the partial gauge products of the neighbouring terms.
    """
    steps = list(steps)
    if t < 1:
        raise ValueError("the expansion formula needs t >= 1")
    if not steps:
        raise ValueError("need at least one step")
    head = steps[0]
    for eta in steps[1:]:
        _same_structure(head, eta)
    n, m, p, backend = head.n, head.m, head.p, head.backend
    if not (0 <= s and s + t <= m):
        return F.zero_form(backend, n, _dim(p, s + t), _dim(p, s), t)
    k = len(steps)

    partial: dict = {}

    def g(idx, j):
        # ordered product gauge_1 ... gauge_j of the idx-th term, j = 0 gives I
        key = (idx, j)
        if key not in partial:
            if j == 0:
                partial[key] = F.identity_form(backend, n, p[idx])
            else:
                partial[key] = F.wedge(g(idx, j - 1), steps[j - 1].gauge(idx))
        return partial[key]

    inverses: dict = {}

    def ginv(idx, j):
        if (idx, j) not in inverses:
            inverses[(idx, j)] = F.invert_unit(g(idx, j))
        return inverses[(idx, j)]

    total = F.zero_form(backend, n, p[s + t], p[s], t)
    for tau in _compositions(t):
        rho = len(tau)
        for J in combinations(range(1, k + 1), rho):
            prod = None
            for r in range(1, rho + 1):
                hi = s + sum(tau[: rho + 1 - r])
                lo = s + sum(tau[: rho - r])
                jr = J[r - 1]
                fac = F.wedge(
                    F.wedge(g(hi, jr - 1), steps[jr - 1].get(lo, tau[rho - r])), ginv(lo, jr)
                )
                prod = fac if prod is None else F.wedge(prod, fac)
            total = total + prod
    return F.wedge(total, g(s, k))


def integrability_residual(omega: ConnectionData) -> dict:
    """Left-hand sides of the integrability relations, one per entry (s, k).

    ``R[s,k] = dbar w[s,k] + sum_{j=-1}^{k+1} (-1)^(k-j) w[s+j,k-j] ^ w[s,j]``.
    """
    out = {}
    for s, k in omega.indices():
        val = F.dbar(omega.get(s, k))
        for j in range(-1, k + 2):
            term = F.wedge(omega.get(s + j, k - j), omega.get(s, j))
            val = val + (term if (k - j) % 2 == 0 else F.scale(term, -1))
        out[(s, k)] = val
    return out


def complex_residual(omega: ConnectionData) -> dict:
    """Products of consecutive maps, ``phi[s-1] phi[s]`` for 2 <= s <= m."""
    return {s: F.wedge(omega.phi(s - 1), omega.phi(s)) for s in range(2, omega.m + 1)}


def residual_norms(residuals: dict, norm: Callable = F.sup_norm) -> dict:
    return {key: float(norm(val)) for key, val in residuals.items()}


def max_residual(residuals: dict, norm: Callable = F.sup_norm) -> float:
    return max((float(norm(v)) for v in residuals.values()), default=0.0)


__all__ = [
    "ConnectionData",
    "GaugeParam",
    "AugmentedData",
    "param_product",
    "accumulate",
    "eta_expansion",
    "integrability_residual",
    "complex_residual",
    "connection_indices",
    "param_indices",
]
