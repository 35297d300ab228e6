"""Matrix-valued (0,q)-forms and their exterior algebra.

A :class:`MatrixForm` stores, for every increasing multi-index ``I`` of
size ``q`` in ``{1..n}``, a ``rows x cols`` matrix of scalar coefficients
(``SeriesCoeff`` or ``GridCoeff``).  Missing components are zero.
Zero-size matrices are allowed and act as shape-carrying zeros for out of
range indices.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .grid import GridCoeff, PolarGrid
from .series import INF, SeriesCoeff, SeriesRing, qqi_inv, qqi_mul, to_qqi

_NEUMANN_CAP = 256


def multi_indices(n: int, q: int):
    return [tuple(c) for c in combinations(range(1, n + 1), q)]


def merge_sign(I, J):
    """Sign of dz_I ^ dz_J relative to dz_{sorted(I+J)}; 0 if they overlap."""
    if set(I) & set(J):
        return 0
    inversions = sum(1 for a in I for b in J if a > b)
    return -1 if inversions % 2 else 1


class MatrixForm:
    """A ``rows x cols`` matrix of (0,q)-forms over a scalar backend."""

    __slots__ = ("n", "rows", "cols", "q", "components", "backend")

    def __init__(self, n, rows, cols, q, components, backend):
        if q < 0:
            raise ValueError(f"negative form degree {q}")
        if q > n and any(components.values() if components else []):
            raise ValueError(f"a {q}-form in n={n} must be zero")
        if rows < 0 or cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if isinstance(backend, PolarGrid) and n != 1:
            raise ValueError("the grid backend supports n = 1 only")
        self.n, self.rows, self.cols, self.q = n, rows, cols, q
        self.backend = backend
        comps = {}
        for I, M in (components or {}).items():
            I = tuple(I)
            if len(I) != q or list(I) != sorted(set(I)) or (I and (I[0] < 1 or I[-1] > n)):
                raise ValueError(f"invalid multi-index {I} for a {q}-form in n={n}")
            M = np.asarray(M, dtype=object)
            if M.shape != (rows, cols):
                raise ValueError(f"component {I} has shape {M.shape}, expected {(rows, cols)}")
            comps[I] = M
        self.components = comps

    # construction ---------------------------------------------------------
    @classmethod
    def zero(cls, backend, n, rows, cols, q, acc=INF):
        return cls(n, rows, cols, q, {}, backend)

    @classmethod
    def identity(cls, backend, n, p, acc=INF):
        M = _empty(p, p)
        for i in range(p):
            for j in range(p):
                M[i, j] = _const(backend, 1 if i == j else 0, acc)
        return cls(n, p, p, 0, {(): M}, backend)

    @classmethod
    def from_entries(cls, backend, n, q, comp_matrices):
        """Build from ``{I: nested list of coefficients}``."""
        comps = {}
        rows = cols = None
        for I, rowsdata in comp_matrices.items():
            M = _empty(len(rowsdata), len(rowsdata[0]) if rowsdata else 0)
            for i, row in enumerate(rowsdata):
                for j, c in enumerate(row):
                    M[i, j] = c
            comps[tuple(I)] = M
            rows, cols = M.shape
        if rows is None:
            raise ValueError("at least one component is required")
        return cls(n, rows, cols, q, comps, backend)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def multi_indices(self):
        return multi_indices(self.n, self.q)

    def component(self, I, acc=INF):
        I = tuple(I)
        if I in self.components:
            return self.components[I]
        M = _empty(self.rows, self.cols)
        for i in range(self.rows):
            for j in range(self.cols):
                M[i, j] = _zero(self.backend, acc)
        return M

    def entries(self):
        for M in self.components.values():
            yield from M.flat

    def acc(self):
        """Smallest accuracy degree among stored series coefficients."""
        return min((c.acc for c in self.entries() if isinstance(c, SeriesCoeff)), default=INF)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.entries())

    def __repr__(self):
        return (
            f"MatrixForm(n={self.n}, {self.rows}x{self.cols}, q={self.q}, "
            f"components={sorted(self.components)}, backend={self.backend!r})"
        )

    def map(self, fn):
        comps = {I: _elementwise(M, fn) for I, M in self.components.items()}
        return MatrixForm(self.n, self.rows, self.cols, self.q, comps, self.backend)

    # operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1))

    def __neg__(self):
        return scale(self, -1)

    def __xor__(self, other):
        return wedge(self, other)


def _empty(rows, cols):
    return np.empty((rows, cols), dtype=object)


def _zero(backend, acc=INF):
    if isinstance(backend, SeriesRing):
        return backend.zero(acc)
    return backend.zero()


def _const(backend, c, acc=INF):
    if isinstance(backend, SeriesRing):
        return backend.constant(c, acc)
    return backend.constant(c)


def _elementwise(M, fn):
    out = _empty(*M.shape)
    for idx, c in np.ndenumerate(M):
        out[idx] = fn(c)
    return out


def _same_backend(a: MatrixForm, b: MatrixForm):
    if a.n != b.n:
        raise ValueError(f"forms in different dimensions n={a.n} and n={b.n}")
    if a.backend != b.backend:
        raise ValueError(f"forms on different backends {a.backend!r} and {b.backend!r}")


def _matmul(A, B, backend):
    r, k = A.shape
    k2, c = B.shape
    if k != k2:
        raise ValueError(f"matrix shapes {A.shape} and {B.shape} do not compose")
    out = _empty(r, c)
    for i in range(r):
        for j in range(c):
            acc = None
            for t in range(k):
                term = A[i, t] * B[t, j]
                acc = term if acc is None else acc + term
            out[i, j] = acc if acc is not None else _zero(backend)
    return out


def _matadd(A, B):
    out = _empty(*A.shape)
    for idx in np.ndindex(A.shape):
        out[idx] = A[idx] + B[idx]
    return out


def add(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    _same_backend(a, b)
    if a.shape != b.shape or a.q != b.q:
        raise ValueError(
            f"cannot add a {a.rows}x{a.cols} {a.q}-form and a {b.rows}x{b.cols} {b.q}-form"
        )
    comps = dict(a.components)
    for I, M in b.components.items():
        comps[I] = _matadd(comps[I], M) if I in comps else M
    return MatrixForm(a.n, a.rows, a.cols, a.q, comps, a.backend)


def scale(a: MatrixForm, c) -> MatrixForm:
    if isinstance(a.backend, SeriesRing):
        c = to_qqi(c)
    return a.map(lambda x: x.scale(c))


def wedge(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """Matrix product combined with the exterior product of the form parts."""
    _same_backend(a, b)
    if a.cols != b.rows:
        raise ValueError(f"cannot wedge a {a.rows}x{a.cols} by a {b.rows}x{b.cols} form")
    q = a.q + b.q
    if q > a.n:
        return MatrixForm(a.n, a.rows, b.cols, q, {}, a.backend)
    comps: dict = {}
    for I, A in a.components.items():
        for J, B in b.components.items():
            sgn = merge_sign(I, J)
            if sgn == 0:
                continue
            K = tuple(sorted(I + J))
            P = _matmul(A, B, a.backend)
            if sgn < 0:
                P = _elementwise(P, lambda x: -x)
            comps[K] = _matadd(comps[K], P) if K in comps else P
    return MatrixForm(a.n, a.rows, b.cols, q, comps, a.backend)


def dbar(a: MatrixForm) -> MatrixForm:
    """Exterior dbar: sum over j of d/dzb_j dzb_j wedge (.)."""
    q = a.q + 1
    if q > a.n:
        return MatrixForm(a.n, a.rows, a.cols, q, {}, a.backend)
    series = isinstance(a.backend, SeriesRing)
    comps: dict = {}
    for I, M in a.components.items():
        for j in range(1, a.n + 1):
            if j in I:
                continue
            sgn = -1 if sum(1 for i in I if i < j) % 2 else 1
            jj = j - 1
            D = _elementwise(M, lambda c: c.dbar(jj) if series else c.dbar(0))
            if sgn < 0:
                D = _elementwise(D, lambda x: -x)
            K = tuple(sorted(I + (j,)))
            comps[K] = _matadd(comps[K], D) if K in comps else D
    return MatrixForm(a.n, a.rows, a.cols, q, comps, a.backend)


def zero_form(backend, n, rows, cols, q):
    return MatrixForm(n, rows, cols, q, {}, backend)


def identity_form(backend, n, p):
    return MatrixForm.identity(backend, n, p)


# inversion ----------------------------------------------------------------

class NotInvertibleError(ArithmeticError):
    pass


def _qqi_matrix_inverse(C):
    """Exact inverse of a square matrix of complex rationals (Gauss-Jordan)."""
    p = len(C)
    A = [list(row) + [(1 if i == j else 0, 0) for j in range(p)] for i, row in enumerate(C)]
    A = [[to_qqi(x) for x in row] for row in A]
    for col in range(p):
        piv = next((r for r in range(col, p) if A[r][col] != (0, 0)), None)
        if piv is None:
            raise NotInvertibleError("constant term of the matrix is singular")
        A[col], A[piv] = A[piv], A[col]
        inv = qqi_inv(A[col][col])
        A[col] = [qqi_mul(inv, x) for x in A[col]]
        for r in range(p):
            if r != col and A[r][col] != (0, 0):
                f = A[r][col]
                A[r] = [(x[0] - fy[0], x[1] - fy[1]) for x, fy in
                        zip(A[r], [qqi_mul(f, y) for y in A[col]])]
    return [row[p:] for row in A]


def invert_unit(a: MatrixForm) -> MatrixForm:
    """Inverse of a square 0-form matrix.

    Series: the constant part C is inverted exactly and the rest N is
    handled by the Neumann series of ``(I + C^{-1} N)^{-1}``, which
    terminates at the accuracy degree.  Grid: pointwise inversion.
    """
    if a.q != 0 or a.rows != a.cols:
        raise ValueError("invert_unit needs a square matrix of functions")
    p = a.rows
    M = a.component(())
    if isinstance(a.backend, SeriesRing):
        n = a.n
        acc = min((c.acc for c in M.flat), default=INF)
        Cinv = _qqi_matrix_inverse([[M[i, j].constant_term() for j in range(p)] for i in range(p)])
        Cinv_m = _empty(p, p)
        for i in range(p):
            for j in range(p):
                Cinv_m[i, j] = SeriesCoeff(n, {0: Cinv[i][j]}, INF)
        N = _empty(p, p)
        for i in range(p):
            for j in range(p):
                c = M[i, j]
                N[i, j] = SeriesCoeff(n, {k: v for k, v in c.terms.items() if k != 0}, c.acc)
        X = _elementwise(_matmul(Cinv_m, N, a.backend), lambda x: -x)  # -C^{-1} N
        term = Cinv_m
        total = Cinv_m
        steps = 0
        while True:
            term = _matmul(X, term, a.backend)
            if all(c.is_zero() for c in term.flat):
                break
            total = _matadd(total, term)
            steps += 1
            if acc == INF and steps > _NEUMANN_CAP:
                raise NotInvertibleError(
                    "inverse of an exact non-nilpotent matrix is not a polynomial; "
                    "use a finite accuracy degree"
                )
        total = _elementwise(total, lambda c: c.truncate(acc))
        return MatrixForm(n, p, p, 0, {(): total}, a.backend)
    grid = a.backend
    stack = np.stack([np.stack([M[i, j].values for j in range(p)], -1) for i in range(p)], -2)
    det = np.linalg.det(stack)
    scale_ = np.max(np.abs(stack), axis=(-2, -1)) ** p
    bad = np.abs(det) <= 1e-14 * np.maximum(scale_, 1e-300)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        rho, th = grid.node(idx)
        raise NotInvertibleError(f"matrix is singular at grid node rho={rho:.6g}, theta={th:.6g}")
    inv = np.linalg.inv(stack)
    out = _empty(p, p)
    for i in range(p):
        for j in range(p):
            out[i, j] = GridCoeff(grid, inv[..., i, j])
    return MatrixForm(1, p, p, 0, {(): out}, grid)


# numeric views -----------------------------------------------------------

def component_values(a: MatrixForm, I, points=None) -> np.ndarray:
    """Numeric samples of component ``I`` with shape ``(P, rows, cols)``.

    Grid: the grid nodes in C order.  Series: ``points`` of shape (P, n).
    """
    M = a.component(I)
    if isinstance(a.backend, SeriesRing):
        if points is None:
            raise ValueError("series evaluation needs points")
        P = np.asarray(points).reshape(-1, a.n).shape[0]
        out = np.zeros((P, a.rows, a.cols), dtype=complex)
        for i in range(a.rows):
            for j in range(a.cols):
                out[:, i, j] = M[i, j].evaluate(points)
        return out
    out = np.zeros((a.backend.n_rad * a.backend.n_ang, a.rows, a.cols), dtype=complex)
    for i in range(a.rows):
        for j in range(a.cols):
            out[:, i, j] = M[i, j].values.reshape(-1)
    return out


def pointwise_opnorm(vals: np.ndarray) -> np.ndarray:
    """Operator (spectral) norms of a stack ``(P, rows, cols)``."""
    if vals.shape[1] == 0 or vals.shape[2] == 0:
        return np.zeros(vals.shape[0])
    if vals.shape[1] == 1 or vals.shape[2] == 1:
        return np.sqrt(np.sum(np.abs(vals) ** 2, axis=(1, 2)))
    return np.linalg.norm(vals, ord=2, axis=(1, 2))


def sup_norm(a: MatrixForm, radius: float = 1.0) -> float:
    """Max over components I and sample points of the operator norm.

    Series coefficients are probed on a fixed lattice of the ball of the
    given radius; grid coefficients on all nodes.
    """
    from .series import probe_lattice

    if not a.components:
        return 0.0
    best = 0.0
    pts = None
    if isinstance(a.backend, SeriesRing):
        pts = radius * probe_lattice(a.n)
    for I in a.components:
        vals = component_values(a, I, pts)
        if vals.size:
            best = max(best, float(np.max(pointwise_opnorm(vals))))
    return best


def equal(a: MatrixForm, b: MatrixForm, atol=0.0) -> bool:
    """Exact equality (series, up to accuracy) or sup distance <= atol (grid)."""
    _same_backend(a, b)
    if a.shape != b.shape or a.q != b.q:
        return False
    keys = set(a.components) | set(b.components)
    for I in keys:
        A, B = a.component(I), b.component(I)
        for idx in np.ndindex(A.shape):
            x, y = A[idx], B[idx]
            if isinstance(x, SeriesCoeff):
                if not x.equals(y):
                    return False
            elif np.max(np.abs(x.values - y.values), initial=0.0) > atol:
                return False
    return True


def resample(a: MatrixForm, target: PolarGrid) -> MatrixForm:
    """Restrict a grid form to a smaller concentric disk."""
    if not isinstance(a.backend, PolarGrid):
        raise TypeError("resample applies to grid forms")
    if a.backend == target:
        return a
    comps = {}
    for I, M in a.components.items():
        stack = np.stack([c.values for c in M.flat]) if M.size else np.zeros((0,) + target.shape)
        out = a.backend.resample(stack, target)
        R = _empty(*M.shape)
        for t, idx in enumerate(np.ndindex(M.shape)):
            R[idx] = GridCoeff(target, out[t])
        comps[I] = R
    return MatrixForm(a.n, a.rows, a.cols, a.q, comps, target)


def to_grid(a: MatrixForm, grid: PolarGrid) -> MatrixForm:
    """Sample a series form (n = 1) on a polar grid."""
    if isinstance(a.backend, PolarGrid):
        return resample(a, grid)
    if a.n != 1:
        raise ValueError("only n = 1 series can be sampled on a polar grid")
    pts = grid.z.reshape(-1, 1)
    comps = {}
    for I, M in a.components.items():
        comps[I] = _elementwise(M, lambda c: GridCoeff(grid, c.evaluate(pts).reshape(grid.shape)))
    return MatrixForm(1, a.rows, a.cols, a.q, comps, grid)


def pullback(a: MatrixForm, r) -> MatrixForm:
    """Pullback under the dilation z -> r z from B_r to B_1."""
    if isinstance(a.backend, SeriesRing):
        fac = to_qqi(r)[0] ** a.q
        return a.map(lambda c: c.pullback_scale(r).scale((fac, 0)))
    grid = a.backend
    if abs(grid.radius - r) > 1e-14 * max(1.0, r):
        raise ValueError(f"grid form lives on B_{grid.radius:g}, not B_{r:g}")
    unit = grid.with_radius(1.0)
    fac = float(r) ** a.q
    comps = {I: _elementwise(M, lambda c: GridCoeff(unit, fac * c.values))
             for I, M in a.components.items()}
    return MatrixForm(a.n, a.rows, a.cols, a.q, comps, unit)


def pushforward(a: MatrixForm, r) -> MatrixForm:
    """Inverse of :func:`pullback` (grid forms on B_1 moved to B_r)."""
    grid = a.backend
    if not isinstance(grid, PolarGrid):
        raise TypeError("pushforward is implemented for grid forms")
    target = grid.with_radius(float(r))
    fac = float(r) ** (-a.q)
    comps = {I: _elementwise(M, lambda c: GridCoeff(target, fac * c.values))
             for I, M in a.components.items()}
    return MatrixForm(a.n, a.rows, a.cols, a.q, comps, target)
