"""Exact truncated power series in z_1..z_n and their conjugates.

Coefficients are complex rationals stored as ``(re, im)`` pairs of
``gmpy2.mpq``.  Every series carries an accuracy degree ``acc``: all terms of
total degree ``<= acc`` are known exactly, higher terms are discarded.
``acc = inf`` marks an exact polynomial (used for zero padding and inputs
that are genuinely polynomial).
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Number

import numpy as np
from gmpy2 import mpq

INF = math.inf

# exponents are packed into one integer, BASE bits per variable
_BITS = 8
_MASK = (1 << _BITS) - 1
MAX_EXPONENT = _MASK

_ZERO = mpq(0)
_ONE = mpq(1)


def to_rational(x) -> mpq:
    """Exact rational from an int, Fraction, mpq or (binary exact) float."""
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coefficient {x!r}")
        x = Fraction(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def to_qqi(c) -> tuple:
    """Exact complex rational ``(re, im)`` from a Python number or pair."""
    if isinstance(c, tuple):
        return (to_rational(c[0]), to_rational(c[1]))
    if isinstance(c, complex):
        return (to_rational(c.real), to_rational(c.imag))
    if isinstance(c, (np.complexfloating,)):
        return (to_rational(float(c.real)), to_rational(float(c.imag)))
    if isinstance(c, Number) or type(c).__name__ == "mpq":
        return (to_rational(c), _ZERO)
    raise TypeError(f"cannot convert {c!r} to a complex rational")


def qqi_to_complex(c) -> complex:
    return complex(float(c[0]), float(c[1]))


def qqi_mul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def qqi_inv(a):
    d = a[0] * a[0] + a[1] * a[1]
    if d == 0:
        raise ZeroDivisionError("inverse of zero")
    return (a[0] / d, -a[1] / d)


def pack(exps) -> int:
    key = 0
    for i, e in enumerate(exps):
        if e < 0 or e > MAX_EXPONENT:
            raise ValueError(f"exponent {e} out of range")
        key |= int(e) << (_BITS * i)
    return key


@lru_cache(maxsize=None)
def unpack(key: int, nvars: int) -> tuple:
    return tuple((key >> (_BITS * i)) & _MASK for i in range(nvars))


@lru_cache(maxsize=None)
def degree(key: int) -> int:
    d = 0
    while key:
        d += key & _MASK
        key >>= _BITS
    return d


def _min_acc(a, b):
    return a if a <= b else b


class SeriesCoeff:
    """Truncated series with exact complex-rational coefficients.

    Variables are ordered ``z_1..z_n, zb_1..zb_n``; ``terms`` maps packed
    exponent keys to ``(re, im)``.
    """

    __slots__ = ("n", "terms", "acc")

    def __init__(self, n: int, terms: dict | None = None, acc=INF):
        if n < 1:
            raise ValueError("n must be >= 1")
        if acc != INF and (acc < 0 or int(acc) != acc):
            raise ValueError(f"accuracy degree must be a non-negative integer, got {acc!r}")
        self.n = n
        self.acc = acc if acc == INF else int(acc)
        out = {}
        if terms:
            for k, v in terms.items():
                if degree(k) <= self.acc and (v[0] != 0 or v[1] != 0):
                    out[k] = v
        self.terms = out

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, n, c, acc=INF):
        c = to_qqi(c)
        return cls(n, {0: c}, acc)

    @classmethod
    def monomial(cls, n, z_exps, zb_exps, c=1, acc=INF):
        if len(z_exps) != n or len(zb_exps) != n:
            raise ValueError("exponent tuples must have length n")
        return cls(n, {pack(tuple(z_exps) + tuple(zb_exps)): to_qqi(c)}, acc)

    @classmethod
    def variable(cls, n, index, conj=False, acc=INF):
        e = [0] * (2 * n)
        e[index + (n if conj else 0)] = 1
        return cls(n, {pack(e): (_ONE, _ZERO)}, acc)

    def zero_like(self, acc=INF):
        return SeriesCoeff(self.n, None, acc)

    # inspection ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def items(self):
        """Yield ``(z_exps, zb_exps, (re, im))``."""
        n = self.n
        for k, v in self.terms.items():
            e = unpack(k, 2 * n)
            yield e[:n], e[n:], v

    def constant_term(self):
        return self.terms.get(0, (_ZERO, _ZERO))

    def max_degree(self) -> int:
        return max((degree(k) for k in self.terms), default=-1)

    def min_degree(self) -> int:
        return min((degree(k) for k in self.terms), default=-1)

    def __repr__(self):
        if not self.terms:
            return f"SeriesCoeff(0, acc={self.acc})"
        parts = []
        for z, zb, (re, im) in sorted(self.items()):
            mono = "*".join(
                [f"z{i + 1}^{e}" for i, e in enumerate(z) if e]
                + [f"zb{i + 1}^{e}" for i, e in enumerate(zb) if e]
            )
            parts.append(f"({re}+{im}i)" + ("*" + mono if mono else ""))
        return f"SeriesCoeff({' + '.join(parts)}, acc={self.acc})"

    def _check(self, other):
        if not isinstance(other, SeriesCoeff):
            raise TypeError(f"expected SeriesCoeff, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError("series in different numbers of variables")

    def equals(self, other) -> bool:
        """Equality of known terms up to the common accuracy degree."""
        self._check(other)
        acc = _min_acc(self.acc, other.acc)
        keys = set(self.terms) | set(other.terms)
        zero = (_ZERO, _ZERO)
        for k in keys:
            if degree(k) <= acc and self.terms.get(k, zero) != other.terms.get(k, zero):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, SeriesCoeff):
            return NotImplemented
        return self.n == other.n and self.acc == other.acc and self.terms == other.terms

    __hash__ = None

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, SeriesCoeff):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for k, (b0, b1) in other.terms.items():
            a = out.get(k)
            out[k] = (b0, b1) if a is None else (a[0] + b0, a[1] + b1)
        return SeriesCoeff(self.n, out, _min_acc(self.acc, other.acc))

    def __neg__(self):
        return SeriesCoeff(self.n, {k: (-a, -b) for k, (a, b) in self.terms.items()}, self.acc)

    def __sub__(self, other):
        if not isinstance(other, SeriesCoeff):
            return NotImplemented
        return self + (-other)

    def scale(self, c):
        c0, c1 = to_qqi(c)
        out = {k: (a * c0 - b * c1, a * c1 + b * c0) for k, (a, b) in self.terms.items()}
        return SeriesCoeff(self.n, out, self.acc)

    def __mul__(self, other):
        if not isinstance(other, SeriesCoeff):
            return NotImplemented
        self._check(other)
        acc = _min_acc(self.acc, other.acc)
        if not self.terms or not other.terms:
            return SeriesCoeff(self.n, None, acc)
        # bucket the second factor by degree so out-of-range pairs are skipped
        buckets: dict[int, list] = {}
        for k, v in other.terms.items():
            buckets.setdefault(degree(k), []).append((k, v[0], v[1]))
        degs = sorted(buckets)
        out: dict[int, tuple] = {}
        get = out.get
        for k1, (a, b) in self.terms.items():
            room = acc - degree(k1)
            for d in degs:
                if d > room:
                    break
                for k2, c, e in buckets[d]:
                    key = k1 + k2
                    re = a * c - b * e
                    im = a * e + b * c
                    cur = get(key)
                    out[key] = (re, im) if cur is None else (cur[0] + re, cur[1] + im)
        return SeriesCoeff(self.n, out, acc)

    # derivatives --------------------------------------------------------
    def _derive(self, var: int):
        out = {}
        shift = _BITS * var
        unit = 1 << shift
        for k, (a, b) in self.terms.items():
            e = (k >> shift) & _MASK
            if e:
                out[k - unit] = (a * e, b * e)
        return out

    def dbar(self, j: int):
        """Partial derivative in the conjugate variable zb_j (0-based j).

        The accuracy degree drops by one.
        """
        if not 0 <= j < self.n:
            raise IndexError(j)
        if self.acc == 0:
            raise ValueError("derivative of a series known only to degree 0")
        return SeriesCoeff(self.n, self._derive(self.n + j), self.acc - 1)

    def dz(self, j: int):
        """Partial derivative in z_j (0-based j)."""
        if not 0 <= j < self.n:
            raise IndexError(j)
        if self.acc == 0:
            raise ValueError("derivative of a series known only to degree 0")
        return SeriesCoeff(self.n, self._derive(j), self.acc - 1)

    def dreal(self, coord: int):
        """Derivative in the real coordinate ``coord`` ordered x_1, y_1, x_2, y_2, ..."""
        j, imag = divmod(coord, 2)
        a, b = self.dz(j), self.dbar(j)
        return (a - b).scale(1j) if imag else a + b

    # evaluation ---------------------------------------------------------
    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Numeric values at ``points`` of shape ``(P, n)``."""
        pts = np.asarray(points, dtype=complex).reshape(-1, self.n)
        out = np.zeros(pts.shape[0], dtype=complex)
        if not self.terms:
            return out
        conj = np.conj(pts)
        cache: dict = {}

        def power(arr, idx, e):
            key = (id(arr), idx, e)
            if key not in cache:
                cache[key] = arr[:, idx] ** e
            return cache[key]

        for z, zb, c in self.items():
            val = np.full(pts.shape[0], qqi_to_complex(c), dtype=complex)
            for i in range(self.n):
                if z[i]:
                    val = val * power(pts, i, z[i])
                if zb[i]:
                    val = val * power(conj, i, zb[i])
            out += val
        return out

    def truncate(self, acc):
        return SeriesCoeff(self.n, self.terms, _min_acc(self.acc, acc))

    def pullback_scale(self, r):
        """Coefficient of the pullback under z -> r z (r rational)."""
        r = to_rational(r)
        out = {}
        for k, (a, b) in self.terms.items():
            f = r ** degree(k)
            out[k] = (a * f, b * f)
        return SeriesCoeff(self.n, out, self.acc)


class SeriesRing:
    """Backend handle for the exact series arithmetic in ``n`` variables."""

    kind = "series"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n

    def zero(self, acc=INF):
        return SeriesCoeff(self.n, None, acc)

    def constant(self, c, acc=INF):
        return SeriesCoeff.constant(self.n, c, acc)

    def __eq__(self, other):
        return isinstance(other, SeriesRing) and other.n == self.n

    def __hash__(self):
        return hash(("series", self.n))

    def __repr__(self):
        return f"SeriesRing(n={self.n})"


def exp_series(u: SeriesCoeff) -> SeriesCoeff:
    """exp(u) truncated at u's accuracy degree.

    The constant term of ``u`` must vanish unless ``u`` is constant
    (exp of a non-zero rational is irrational).
    """
    c = u.constant_term()
    rest = SeriesCoeff(u.n, {k: v for k, v in u.terms.items() if k != 0}, u.acc)
    if c != (_ZERO, _ZERO):
        raise ValueError("exp() of a series with non-zero constant term is not rational")
    if rest.is_zero():
        return SeriesCoeff.constant(u.n, 1, u.acc)
    if u.acc == INF:
        raise ValueError("exp() of a non-constant series needs a finite accuracy degree")
    out = SeriesCoeff.constant(u.n, 1, u.acc)
    term = SeriesCoeff.constant(u.n, 1, u.acc)
    for j in range(1, int(u.acc) + 1):
        term = (term * rest).scale(mpq(1, j))
        if term.is_zero():
            break
        out = out + term
    return out


@lru_cache(maxsize=None)
def probe_lattice(n: int) -> np.ndarray:
    """Deterministic points of the closed unit ball in C^n used for series norms.

    Each coordinate ranges over radii {0, 1/4, 1/2, 3/4, 1} and 8 angles
    (offset per coordinate); points outside the ball are dropped.
    """
    radii = [0.0, 0.25, 0.5, 0.75, 1.0]
    axes = []
    for i in range(n):
        pts = [0j]
        for rho in radii[1:]:
            for a in range(8):
                pts.append(rho * np.exp(2j * np.pi * (a + 0.5 * i) / 8))
        axes.append(np.array(pts))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    keep = np.sum(np.abs(mesh) ** 2, axis=1) <= 1.0 + 1e-12
    return mesh[keep]
