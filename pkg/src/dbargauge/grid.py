"""Polar collocation grid on a disk B_r in C (n = 1 only).

Radial nodes are rho_k = r sqrt(s_k) with s_k the Gauss-Legendre points of
(0, 1), so the area quadrature in rho d rho = d(rho^2)/2 is Gaussian.  The
mirrored set {+-rho_k} has Chebyshev density on (-r, r); radial derivatives
and interpolation act on that doubled line, using the parity
f_n(-rho) = (-1)^n f_n(rho) of the n-th angular Fourier mode.  Angular
derivatives are spectral.  Modes that are below roundoff near the origin
are filtered before differentiating.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

MIN_RAD = 8
MIN_ANG = 16
POLE_FILTER_EPS = 1e-16


def _bary_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights of arbitrary nodes, computed in log space."""
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logs = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    return sign * np.exp(logs - logs.max())


def _lagrange(x: np.ndarray, bw: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Matrix evaluating the interpolant through nodes ``x`` at points ``t``."""
    diff = t[:, None] - x[None, :]
    exact = np.abs(diff) < 1e-15
    diff[exact] = 1.0
    M = bw[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    for i in np.nonzero(exact.any(axis=1))[0]:
        M[i] = exact[i].astype(float)
    return M


@lru_cache(maxsize=16)
def _unit_radial(n_rad: int):
    """Unit-disk radial data.

    Returns positive nodes, area weights (for rho d rho), the doubled
    nodes and their barycentric weights, and the even/odd parity
    derivative matrices acting on values at the positive nodes.
    """
    x, w = leggauss(n_rad)
    s = (x + 1.0) / 2.0
    rho = np.sqrt(s)
    area = w / 4.0
    sym = np.concatenate([-rho[::-1], rho])
    bw = _bary_weights(sym)
    X = sym[:, None] - sym[None, :]
    np.fill_diagonal(X, 1.0)
    D = (bw[None, :] / bw[:, None]) / X
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    N = n_rad
    pos, neg = D[N:, N:], D[N:, :N][:, ::-1]
    return rho, area, sym, bw, pos + neg, pos - neg


@lru_cache(maxsize=16)
def _radial_filter(n_rad: int, power: int):
    """Exponential filter exp(-36 (j/J)^power) on Chebyshev modes of the doubled line."""
    sym = _unit_radial(n_rad)[2]
    J = 2 * n_rad - 1
    V = np.polynomial.chebyshev.chebvander(sym, J)
    sig = np.exp(-36.0 * (np.arange(J + 1) / J) ** power)
    M = V @ (sig[:, None] * np.linalg.inv(V))
    pos, neg = M[n_rad:, n_rad:], M[n_rad:, :n_rad][:, ::-1]
    return pos + neg, pos - neg


@lru_cache(maxsize=16)
def _angular(n_ang: int):
    theta = 2.0 * np.pi * np.arange(n_ang) / n_ang
    freq = np.fft.fftfreq(n_ang, 1.0 / n_ang)
    deriv = 1j * freq
    if n_ang % 2 == 0:
        deriv[n_ang // 2] = 0.0
    return theta, freq, deriv


@lru_cache(maxsize=16)
def _odd_modes(n_ang: int):
    return (np.abs(_angular(n_ang)[1]).astype(int) % 2) == 1


@lru_cache(maxsize=16)
def _pole_mask(n_rad: int, n_ang: int):
    rho = _unit_radial(n_rad)[0]
    freq = np.abs(_angular(n_ang)[1])
    nmax = np.log(POLE_FILTER_EPS) / np.log(np.minimum(rho, 1.0 - 1e-12))
    return freq[None, :] > nmax[:, None]


@dataclass(frozen=True)
class PolarGrid:
    """Tensor grid of ``n_rad`` radii times ``n_ang`` angles on B_radius."""

    radius: float
    n_rad: int
    n_ang: int

    kind = "grid"
    n = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"grid radius must be positive, got {self.radius}")
        if self.n_rad < MIN_RAD or self.n_ang < MIN_ANG:
            raise ValueError(
                f"grid needs at least {MIN_RAD} radial and {MIN_ANG} angular nodes, "
                f"got {self.n_rad}x{self.n_ang}"
            )

    @property
    def shape(self):
        return (self.n_rad, self.n_ang)

    @property
    def rho(self):
        return self.radius * _unit_radial(self.n_rad)[0]

    @property
    def theta(self):
        return _angular(self.n_ang)[0]

    @property
    def z(self):
        return self.rho[:, None] * np.exp(1j * self.theta)[None, :]

    @property
    def area_weights(self):
        """Quadrature weights for dA, shape ``(n_rad, n_ang)``."""
        w = self.radius ** 2 * _unit_radial(self.n_rad)[1]
        dth = 2.0 * np.pi / self.n_ang
        return np.broadcast_to((w * dth)[:, None], self.shape)

    def with_radius(self, radius: float) -> "PolarGrid":
        return PolarGrid(float(radius), self.n_rad, self.n_ang)

    def zero(self):
        return GridCoeff(self, np.zeros(self.shape, dtype=complex))

    def constant(self, c):
        return GridCoeff(self, np.full(self.shape, complex(c)))

    def sample(self, func):
        """Coefficient from a callable of z (vectorized)."""
        vals = np.asarray(func(self.z), dtype=complex)
        return GridCoeff(self, np.broadcast_to(vals, self.shape).copy())

    def node(self, flat_index: int):
        i, j = np.unravel_index(flat_index, self.shape)
        return float(self.rho[i]), float(self.theta[j])

    # operators on raw arrays (..., n_rad, n_ang) ---------------------------
    def filter_poles(self, vals: np.ndarray) -> np.ndarray:
        F = np.fft.fft(vals, axis=-1)
        F[..., _pole_mask(self.n_rad, self.n_ang)] = 0.0
        return np.fft.ifft(F, axis=-1)

    def _by_parity(self, F: np.ndarray, even: np.ndarray, odd: np.ndarray) -> np.ndarray:
        """Apply ``even``/``odd`` radial matrices to angular modes of matching parity."""
        par = _odd_modes(self.n_ang)
        out = np.empty(F.shape[:-2] + (even.shape[0], F.shape[-1]), dtype=complex)
        out[..., ~par] = np.einsum("ij,...jk->...ik", even, F[..., ~par])
        out[..., par] = np.einsum("ij,...jk->...ik", odd, F[..., par])
        return out

    def _partials(self, vals: np.ndarray):
        F = np.fft.fft(vals, axis=-1)
        F[..., _pole_mask(self.n_rad, self.n_ang)] = 0.0
        _, _, _, _, De, Do = _unit_radial(self.n_rad)
        d_rho = np.fft.ifft(self._by_parity(F, De, Do), axis=-1) / self.radius
        d_th = np.fft.ifft(_angular(self.n_ang)[2] * F, axis=-1)
        return d_rho, d_th / self.rho[:, None]

    def apply_dbar(self, vals: np.ndarray) -> np.ndarray:
        d_rho, d_th = self._partials(vals)
        return 0.5 * np.exp(1j * self.theta) * (d_rho + 1j * d_th)

    def apply_dz(self, vals: np.ndarray) -> np.ndarray:
        d_rho, d_th = self._partials(vals)
        return 0.5 * np.exp(-1j * self.theta) * (d_rho - 1j * d_th)

    def smooth(self, vals: np.ndarray, power: int = 16) -> np.ndarray:
        """Damp the top radial modes; low modes move by ~exp(-36 (j/J)^power) - 1."""
        Fe, Fo = _radial_filter(self.n_rad, int(power))
        F = np.fft.fft(vals, axis=-1)
        return np.fft.ifft(self._by_parity(F, Fe, Fo), axis=-1)

    def interpolation_matrices(self, target: "PolarGrid"):
        """Even/odd radial interpolation onto ``target`` (same angles)."""
        if target.n_ang != self.n_ang:
            raise ValueError("resampling requires matching angular resolution")
        _, _, sym, bw, _, _ = _unit_radial(self.n_rad)
        t = target.rho / self.radius
        if np.any(t > 1.0 + 1e-12):
            raise ValueError(
                f"cannot resample from B_{self.radius:g} onto the larger ball B_{target.radius:g}"
            )
        L = _lagrange(sym, bw, t)
        N = self.n_rad
        pos, neg = L[:, N:], L[:, :N][:, ::-1]
        return pos + neg, pos - neg

    def resample(self, vals: np.ndarray, target: "PolarGrid") -> np.ndarray:
        if target == self:
            return vals
        Me, Mo = self.interpolation_matrices(target)
        F = np.fft.fft(vals, axis=-1)
        return np.fft.ifft(self._by_parity(F, Me, Mo), axis=-1)


class GridCoeff:
    """Complex samples of a function on a :class:`PolarGrid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: PolarGrid, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not match grid {grid.shape}")
        self.grid = grid
        self.values = values

    def _check(self, other):
        if not isinstance(other, GridCoeff):
            raise TypeError(f"expected GridCoeff, got {type(other).__name__}")
        if other.grid != self.grid:
            raise ValueError("coefficients live on different grids")

    def zero_like(self, acc=None):
        return self.grid.zero()

    def is_zero(self):
        return not np.any(self.values)

    def __add__(self, other):
        if not isinstance(other, GridCoeff):
            return NotImplemented
        self._check(other)
        return GridCoeff(self.grid, self.values + other.values)

    def __sub__(self, other):
        if not isinstance(other, GridCoeff):
            return NotImplemented
        self._check(other)
        return GridCoeff(self.grid, self.values - other.values)

    def __neg__(self):
        return GridCoeff(self.grid, -self.values)

    def __mul__(self, other):
        if not isinstance(other, GridCoeff):
            return NotImplemented
        self._check(other)
        return GridCoeff(self.grid, self.values * other.values)

    def scale(self, c):
        return GridCoeff(self.grid, complex(c) * self.values)

    def dbar(self, j: int = 0):
        if j != 0:
            raise IndexError(j)
        return GridCoeff(self.grid, self.grid.apply_dbar(self.values))

    def dz(self, j: int = 0):
        if j != 0:
            raise IndexError(j)
        return GridCoeff(self.grid, self.grid.apply_dz(self.values))

    def dreal(self, coord: int):
        a, b = self.dz(0), self.dbar(0)
        if coord == 0:
            return a + b
        if coord == 1:
            return (a - b).scale(1j)
        raise IndexError(coord)

    def equals(self, other, atol=1e-12):
        self._check(other)
        return bool(np.max(np.abs(self.values - other.values), initial=0.0) <= atol)

    def resample(self, target: PolarGrid):
        return GridCoeff(target, self.grid.resample(self.values, target))

    def smooth(self, power: int = 16):
        return GridCoeff(self.grid, self.grid.smooth(self.values, power))

    def __repr__(self):
        return f"GridCoeff({self.grid}, sup={np.max(np.abs(self.values)):.3g})"
