"""Weighted Hoelder norms of matrix-valued forms.

    |u|_{r,h,mu} = sum_I sum_{|a| <= h} S_|a| r^(|a|+q) |d^a u_I|_{r,mu}
    |f|_{r,mu}   = sup |f| + r^mu sup |f(z) - f(w)| / |z - w|^mu

Derivatives are taken in real coordinates (x_1, y_1, ..., x_n, y_n), norms
of matrices are operator norms.  Sup and seminorm are evaluated on a
deterministic sample: grid nodes (grid backend) or a fixed lattice of the
ball (series backend).  The seminorm uses at most ``MAX_PAIRS`` point pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, inf

import numpy as np

from . import forms as F
from .forms import MatrixForm
from .grid import PolarGrid
from .series import SeriesRing, probe_lattice

MAX_PAIRS = 100_000
GRID_MAX_ORDER = 2


# multi-indices and combinatorial constants ----------------------------------

@lru_cache(maxsize=None)
def real_multi_indices(n: int, k: int):
    """All multi-indices of total order k in 2n real variables."""
    dims = 2 * n

    def rec(left, slots):
        if slots == 1:
            yield (left,)
            return
        for a in range(left, -1, -1):
            for rest in rec(left - a, slots - 1):
                yield (a,) + rest

    return tuple(rec(k, dims))


@lru_cache(maxsize=None)
def d_constant(n: int, k: int) -> float:
    """1 / max binom(a + b, a) over multi-indices with |a + b| = k."""
    best = 1
    for gamma in real_multi_indices(n, k):
        for alpha in _below(gamma):
            val = 1
            for g, a in zip(gamma, alpha):
                val *= comb(g, a)
            best = max(best, val)
    return 1.0 / best


def _below(gamma):
    if not gamma:
        yield ()
        return
    for a in range(gamma[0] + 1):
        for rest in _below(gamma[1:]):
            yield (a,) + rest


@dataclass(frozen=True)
class WeightSequence:
    """Weights S_0..S_K with the record of which bound was active."""

    values: tuple
    n: int = 1
    provenance: tuple = field(default=())

    def __post_init__(self):
        if not self.values or self.values[0] != 1.0:
            raise ValueError("weight sequences start with S_0 = 1")
        if any(not v > 0 for v in self.values):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def violations(self):
        """Pairs (k, j) with S_k > D_k S_j S_{k-j}; empty when the sequence is admissible."""
        S = self.values
        bad = []
        for k in range(2, len(S)):
            Dk = d_constant(self.n, k)
            for j in range(1, k):
                if S[k] > Dk * S[j] * S[k - j]:
                    bad.append((k, j))
        return bad

    @classmethod
    def unbounded(cls, K: int, n: int = 1):
        return build_weights(K, n=n)


def build_weights(K: int, n: int = 1, bounds=None, kernel_const=1.0, R=None, L=None) -> WeightSequence:
    """Weights S_0..S_K.

    ``bounds`` maps each real multi-index to the larger of the cutoff and
    map-derivative bounds; ``A_k`` is their sum over order k and
    ``B_k = 1 / max(A_k, C)`` with ``C = kernel_const`` (1 if both vanish).
    ``R`` and ``L`` are optional caps indexed by k (missing means +inf).
    S_1 = min(B_1, R_1, L_1); for k >= 2 the minimum also includes
    ``2^-k B_k`` and ``D_k min_j S_j S_{k-j}``.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    bounds = bounds or {}
    R = R or {}
    L = L or {}

    def cap(seq, k):
        if isinstance(seq, dict):
            return seq.get(k, inf)
        return seq[k] if k < len(seq) else inf

    S = [1.0]
    prov = ["S_0 = 1"]
    for k in range(1, K + 1):
        A = sum(bounds.get(a, 0.0) for a in real_multi_indices(n, k))
        denom = max(A, float(kernel_const))
        B = 1.0 / denom if denom > 0 else 1.0
        cands = {"R": cap(R, k), "L": cap(L, k)}
        if k == 1:
            cands["B"] = B
        else:
            cands["B"] = B / 2.0 ** k
            Dk = d_constant(n, k)
            cands["D"] = min(Dk * S[j] * S[k - j] for j in range(1, k))
        name = min(cands, key=lambda c: cands[c])
        S.append(float(cands[name]))
        prov.append(f"S_{k} from {name}")
    return WeightSequence(tuple(S), n, tuple(prov))


# norms -----------------------------------------------------------------------

@dataclass(frozen=True)
class NormSpec:
    r: float
    h: int
    mu: float
    weights: WeightSequence

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")
        if self.h < 0:
            raise ValueError("order h must be non-negative")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("Hoelder exponent must lie in (0, 1)")
        if len(self.weights) < self.h + 1:
            raise ValueError(f"need weights up to order {self.h}, have {len(self.weights) - 1}")


def derivative(u: MatrixForm, alpha) -> MatrixForm:
    """Real partial derivative d^alpha applied coefficientwise."""
    out = u
    for coord, times in enumerate(alpha):
        for _ in range(times):
            out = out.map(lambda c, coord=coord: c.dreal(coord))
    return out


def _pair_budget(npts: int, budget: int):
    """Deterministic index pairs (i < j) with at most ``budget`` entries."""
    total = npts * (npts - 1) // 2
    i, j = np.triu_indices(npts, 1)
    if total <= budget:
        return i, j
    stride = math.ceil(total / budget)
    return i[::stride], j[::stride]


@lru_cache(maxsize=8)
def _grid_pairs(n_rad: int, n_ang: int, budget: int = MAX_PAIRS):
    """Node pairs for the grid seminorm: neighbours plus a coarse all-pairs lattice."""
    idx = np.arange(n_rad * n_ang).reshape(n_rad, n_ang)
    near = [
        (idx[:-1, :].ravel(), idx[1:, :].ravel()),  # radial neighbours
        (idx.ravel(), np.roll(idx, -1, axis=1).ravel()),  # angular neighbours
    ]
    a = np.concatenate([p[0] for p in near])
    b = np.concatenate([p[1] for p in near])
    half = budget // 2
    if a.size > half:
        step = math.ceil(a.size / half)
        a, b = a[::step], b[::step]
    # coarse lattice for long-range pairs
    m = int(math.floor(math.sqrt(2 * (budget - a.size))))
    rs = max(1, n_rad // max(1, int(round(math.sqrt(m / 2)))))
    ts = max(1, n_ang // max(1, int(round(math.sqrt(2 * m)))))
    coarse = idx[::rs, ::ts].ravel()
    ci, cj = _pair_budget(coarse.size, budget - a.size)
    return np.concatenate([a, coarse[ci]]), np.concatenate([b, coarse[cj]])


def _samples(u: MatrixForm, r: float):
    """Points, optional mask and a callable giving (P, rows, cols) samples per component."""
    if isinstance(u.backend, SeriesRing):
        pts = r * probe_lattice(u.n)
        return pts, None
    grid = u.backend
    if r > grid.radius * (1 + 1e-12):
        raise ValueError(f"cannot take a norm on B_{r:g} of data on B_{grid.radius:g}")
    pts = grid.z.reshape(-1, 1)
    mask = np.repeat(grid.rho <= r * (1 + 1e-12), grid.n_ang)
    return pts, mask


def _pairs_for(u: MatrixForm, npts: int, mask):
    if isinstance(u.backend, SeriesRing):
        return _pair_budget(npts, MAX_PAIRS)
    g = u.backend
    i, j = _grid_pairs(g.n_rad, g.n_ang)
    keep = mask[i] & mask[j]
    return i[keep], j[keep]


def holder_values(vals: np.ndarray, pts: np.ndarray, r: float, mu: float, pairs, mask=None) -> float:
    """|f|_{r,mu} from samples ``vals`` (P, rows, cols) at ``pts`` (P, n)."""
    if vals.shape[1] == 0 or vals.shape[2] == 0:
        return 0.0
    norms = F.pointwise_opnorm(vals)
    sup = float(np.max(norms[mask] if mask is not None else norms, initial=0.0))
    i, j = pairs
    if i.size == 0:
        return sup
    dist = np.sqrt(np.sum(np.abs(pts[i] - pts[j]) ** 2, axis=1))
    ok = dist > 0
    dif = F.pointwise_opnorm(vals[i[ok]] - vals[j[ok]])
    semi = float(np.max(dif / dist[ok] ** mu, initial=0.0))
    return sup + r ** mu * semi


def holder_norm(u: MatrixForm, spec: NormSpec) -> float:
    """Weighted Hoelder norm |u|_{r,h,mu} with weights ``spec.weights``."""
    if isinstance(u.backend, PolarGrid) and spec.h > GRID_MAX_ORDER:
        raise ValueError(f"grid norms support derivative order up to {GRID_MAX_ORDER}")
    if not u.components:
        return 0.0
    pts, mask = _samples(u, spec.r)
    pairs = _pairs_for(u, pts.shape[0], mask)
    total = 0.0
    for order in range(spec.h + 1):
        fac = spec.weights[order] * spec.r ** (order + u.q)
        for alpha in real_multi_indices(u.n, order):
            du = derivative(u, alpha)
            for I in du.components:
                vals = F.component_values(du, I, pts if isinstance(u.backend, SeriesRing) else None)
                total += fac * holder_values(vals, pts, spec.r, spec.mu, pairs, mask)
    return total


def derivative_sup_table(u: MatrixForm, K: int, r: float) -> dict:
    """{alpha: sup |d^alpha u|} over all real multi-indices with |alpha| <= K."""
    out = {}
    pts, mask = _samples(u, r)
    for order in range(K + 1):
        for alpha in real_multi_indices(u.n, order):
            du = derivative(u, alpha)
            best = 0.0
            for I in du.components:
                vals = F.component_values(du, I, pts if isinstance(u.backend, SeriesRing) else None)
                norms = F.pointwise_opnorm(vals)
                if mask is not None:
                    norms = norms[mask]
                best = max(best, float(np.max(norms, initial=0.0)))
            out[alpha] = best
    return out


def data_weights(omega, K: int, r: float | None = None, cutoff_bounds=None,
                 kernel_const=1.0, R=None, L=None) -> WeightSequence:
    """Weights built from the derivatives of the maps of ``omega``.

    ``cutoff_bounds`` optionally supplies bounds for the cutoff derivatives,
    keyed like the map bounds; the larger of the two is used.
    """
    r = r if r is not None else _radius(omega)
    bounds = dict(cutoff_bounds or {})
    for s in range(1, omega.m + 1):
        phi = omega.phi(s)
        if isinstance(phi.backend, PolarGrid):
            table = derivative_sup_table(phi, min(K, GRID_MAX_ORDER), r)
        else:
            table = derivative_sup_table(phi, K, r)
        for a, v in table.items():
            bounds[a] = max(bounds.get(a, 0.0), v)
    return build_weights(K, omega.n, bounds, kernel_const, R, L)


def _radius(data):
    b = data.backend
    return b.radius if isinstance(b, PolarGrid) else 1.0


def diag_a(omega, spec: NormSpec) -> float:
    """Largest norm of the connection entries of form degree >= 1 (k >= 0)."""
    best = 0.0
    for (s, k), f in omega.entries.items():
        if k >= 0:
            best = max(best, holder_norm(f, spec))
    return best


def diag_c(omega, spec: NormSpec) -> float:
    """Largest norm of the maps (k = -1 entries)."""
    best = 0.0
    for s in range(1, omega.m + 1):
        best = max(best, holder_norm(omega.phi(s), spec))
    return best
