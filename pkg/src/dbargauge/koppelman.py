"""Solution operators for dbar on disks.

For n = 1 the homotopy operator on (0,1)-forms is the Cauchy transform

    T u(z) = -(1/pi) * integral over B_r of u(zeta) / (zeta - z) dA(zeta),

which satisfies dbar T u = u inside the disk.  It is evaluated by direct
quadrature on the polar grid after subtracting a local Taylor model of
``u`` at the target point; the remaining kernel is circulant in the angular
offset, so each pair of rings is handled with one FFT.

``formal_homotopy`` is an exact operator on series in any dimension used to
run the step recursion symbolically.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import forms as F
from .forms import MatrixForm
from .grid import MIN_ANG, MIN_RAD, GridCoeff, PolarGrid, _unit_radial
from .series import SeriesCoeff, SeriesRing, unpack


# radial low-pass applied to each Taylor coefficient; repeated spectral
# derivatives otherwise amplify boundary roundoff by ~N^2 per order
FILTER_POWER = 8


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid resolution and singular-integral treatment.

    ``split`` is the patch radius around each target node, in units of the
    local radial spacing; nodes inside it take the limit value of the
    regularised integrand.  The default keeps only the target node itself.
    ``taylor_order`` is the degree in the conjugate variable of the local
    model subtracted from the integrand (its disk integral is exact).
    """

    n_rad: int = 128
    n_ang: int = 256
    split: float = 1e-3
    taylor_order: int = 3

    def __post_init__(self):
        if self.n_rad < MIN_RAD or self.n_ang < MIN_ANG:
            raise ValueError(
                f"quadrature needs N_rad >= {MIN_RAD} and N_ang >= {MIN_ANG}, "
                f"got {self.n_rad}x{self.n_ang}"
            )
        if not self.split > 0:
            raise ValueError("split radius must be positive")
        if not 0 <= self.taylor_order <= 6:
            raise ValueError("taylor_order must lie in 0..6")

    def grid(self, r: float) -> PolarGrid:
        return PolarGrid(float(r), self.n_rad, self.n_ang)


@lru_cache(maxsize=4)
def _kernel(n_rad: int, n_ang: int, split: float, order: int):
    """Unit-disk kernel data.

    Returns the FFT of the circulant kernel, the patch weights ``P`` and
    ``G[k]``, the discrete sum of ``W K (conj(zeta) - conj(z))^k`` for a
    target at angle 0 (other angles follow by rotation).
    """
    rho, w = _unit_radial(n_rad)[:2]
    dth = 2.0 * np.pi / n_ang
    W = w * dth
    d = np.arange(n_ang)
    src = rho[:, None, None] * np.exp(1j * d * dth)[None, None, :]
    diff = src - rho[None, :, None]  # source ring i at offset d minus target on ring j
    gaps = np.diff(np.concatenate([[0.0], rho, [1.0]]))
    spacing = np.minimum(gaps[:-1], gaps[1:])
    patch = np.abs(diff) <= split * spacing[None, :, None]
    idx = np.arange(n_rad)
    patch[idx, idx, 0] = True
    K = np.where(patch, 0.0, 1.0 / np.where(patch, 1.0, diff))
    P = np.einsum("i,ijd->j", W, patch.astype(float))
    WK = W[:, None, None] * K
    lin = np.conj(src) - rho[None, :, None]
    G = [np.einsum("ijd->j", WK * lin ** k) for k in range(order + 1)]
    Kh = np.fft.fft(K[:, :, (-d) % n_ang], axis=2)
    return Kh, P, G, W


def cauchy_values(vals: np.ndarray, grid: PolarGrid, split: float = 1e-3,
                  order: int = 3) -> np.ndarray:
    """Cauchy transform of samples ``vals`` of shape ``(..., n_rad, n_ang)``.

    The integrand is regularised by subtracting the Taylor polynomial of
    ``u`` in the conjugate variable up to ``order`` at the target.  Over the
    disk, ``(conj(zeta) - conj(z))^k / (zeta - z)`` integrates to
    ``pi (-1)^(k+1) conj(z)^(k+1) / (k+1)``, so data polynomial in the
    conjugate variable up to that degree are transformed exactly.
    """
    Kh, P, G, W = _kernel(grid.n_rad, grid.n_ang, float(split), int(order))
    r = grid.radius
    lead = vals.shape[:-2]
    u = vals.reshape((-1,) + grid.shape)
    zb = np.conj(grid.z)
    e = np.exp(-1j * grid.theta)[None, :]
    U = np.fft.fft(u, axis=-1)
    u_z = grid.apply_dz(u)
    ders = [u]
    for _ in range(order):
        ders.append(grid.smooth(grid.apply_dbar(ders[-1]), FILTER_POWER))
    out = np.empty_like(u)
    for t in range(u.shape[0]):
        # on B_r the kernel scales like 1/r and the weights like r^2
        rem = r * e * np.fft.ifft(np.einsum("in,ijn->jn", W[:, None] * U[t], Kh), axis=-1)
        val = np.zeros(grid.shape, dtype=complex)
        fact = 1.0
        for k in range(order + 1):
            if k:
                fact *= k
            dk = ders[k][t]
            rem = rem - dk * (r ** (k + 1) / fact) * e ** (k + 1) * G[k][:, None]
            val = val + ((-1) ** k / (fact * (k + 1))) * dk * zb ** (k + 1)
        out[t] = val - (rem + (r * r) * P[:, None] * u_z[t]) / np.pi
    return out.reshape(lead + grid.shape)


def _as_grid_form(u: MatrixForm, r: float, spec: QuadratureSpec) -> MatrixForm:
    grid = spec.grid(r)
    if isinstance(u.backend, SeriesRing):
        return F.to_grid(u, grid)
    if u.backend == grid:
        return u
    if u.backend.n_rad == spec.n_rad and u.backend.n_ang == spec.n_ang and u.backend.radius >= r:
        return F.resample(u, grid)
    raise ValueError(f"form lives on {u.backend}, cannot transform on {grid}")


def cauchy_transform(u: MatrixForm, r: float, spec: QuadratureSpec | None = None) -> MatrixForm:
    """Cauchy transform on B_r of a matrix of (0,1)-forms in one variable."""
    spec = spec or QuadratureSpec()
    if u.n != 1:
        raise ValueError("grid solution operator is available for n = 1 only")
    if u.q != 1:
        raise ValueError(f"Cauchy transform acts on (0,1)-forms, got degree {u.q}")
    if not r > 0:
        raise ValueError("radius must be positive")
    ug = _as_grid_form(u, r, spec)
    grid = ug.backend
    M = ug.component((1,))
    if M.size == 0:
        return F.zero_form(grid, 1, u.rows, u.cols, 0)
    stack = np.stack([c.values for c in M.flat])
    out = cauchy_values(stack, grid, spec.split, spec.taylor_order)
    R = np.empty(M.shape, dtype=object)
    for t, idx in enumerate(np.ndindex(M.shape)):
        R[idx] = GridCoeff(grid, out[t])
    return MatrixForm(1, u.rows, u.cols, 0, {(): R}, grid)


def homotopy_operator(u: MatrixForm, r: float, spec: QuadratureSpec | None = None) -> MatrixForm:
    """Degree-lowering solution operator on B_r.

    On grids (n = 1) forms of degree >= 2 vanish, so only degree 1 is
    non-trivial.  Series input uses :func:`formal_homotopy`.
    """
    if u.q == 0:
        raise ValueError("the solution operator lowers degree; got a 0-form")
    if isinstance(u.backend, SeriesRing):
        return formal_homotopy(u)
    if u.q > u.n:
        return F.zero_form(u.backend, u.n, u.rows, u.cols, u.q - 1)
    if u.q == 1:
        return cauchy_transform(u, r, spec)
    raise ValueError(f"no solution operator for degree {u.q} in n = {u.n}")


def scaled_transform(u: MatrixForm, r: float, spec: QuadratureSpec | None = None) -> MatrixForm:
    """Cauchy transform on B_r computed on B_1 through the dilation z -> r z."""
    spec = spec or QuadratureSpec()
    ug = _as_grid_form(u, r, spec)
    v = cauchy_transform(F.pullback(ug, r), 1.0, spec)
    return F.pushforward(v, r)


def homotopy_residual(u: MatrixForm, r: float, spec: QuadratureSpec | None = None,
                      inner: float = 0.9) -> float:
    """sup over |z| <= inner * r of |u - dbar T u|."""
    spec = spec or QuadratureSpec()
    ug = _as_grid_form(u, r, spec)
    Tu = cauchy_transform(ug, r, spec)
    diff = F.dbar(Tu) - ug
    grid = ug.backend
    mask = (grid.rho <= inner * r)
    vals = F.component_values(diff, (1,)).reshape(grid.n_rad, grid.n_ang, u.rows, u.cols)
    sub = vals[mask].reshape(-1, u.rows, u.cols)
    return float(np.max(F.pointwise_opnorm(sub), initial=0.0))


# exact operator on series -------------------------------------------------

def _homotopy_coeff(c: SeriesCoeff, j: int, weight_shift: int):
    """zb_j * sum_b c_b z^a zb^b / (|b| + shift)."""
    n = c.n
    out = {}
    unit = 1 << (8 * (n + j))
    for key, (a, b) in c.terms.items():
        e = unpack(key, 2 * n)
        w = sum(e[n:]) + weight_shift
        out[key + unit] = (a / w, b / w)
    acc = c.acc if c.acc == float("inf") else c.acc + 1
    return SeriesCoeff(n, out, acc)


def formal_homotopy(u: MatrixForm) -> MatrixForm:
    """Radial homotopy in the conjugate variables (z treated as parameters).

    For a (0,q)-form u with q >= 1 and polynomial coefficients,
    ``u = dbar K u + K dbar u``.  The accuracy degree rises by one.
    """
    if not isinstance(u.backend, SeriesRing):
        raise TypeError("formal_homotopy acts on series forms")
    q = u.q
    if q == 0:
        raise ValueError("homotopy needs a form of positive degree")
    if q > u.n:
        return F.zero_form(u.backend, u.n, u.rows, u.cols, q - 1)
    comps: dict = {}
    for I, M in u.components.items():
        for pos, j in enumerate(I):
            J = I[:pos] + I[pos + 1:]
            sgn = -1 if pos % 2 else 1
            R = np.empty(M.shape, dtype=object)
            for idx, c in np.ndenumerate(M):
                h = _homotopy_coeff(c, j - 1, q)
                R[idx] = h if sgn > 0 else -h
            if J in comps:
                comps[J] = F._matadd(comps[J], R)
            else:
                comps[J] = R
    return MatrixForm(u.n, u.rows, u.cols, q - 1, comps, u.backend)



# interior estimate probe ----------------------------------------------------

def monomial_probes(degree: int = 2):
    """(a, b) exponents of the probe family z^a zb^b dzb with a + b <= degree."""
    return [(a, d - a) for d in range(degree + 1) for a in range(d + 1)]


def operator_norm_probe(h: int, sigma: float, r: float = 1.0, spec: QuadratureSpec | None = None,
                        degree: int = 2, mu: float = 0.5, C: float = 1.0, probes=None) -> dict:
    """max over probes of |T u|_{r(1-sigma), h+1} / |u|_{r, h}.

    Weights are the data-free sequence (all bounds zero).  ``bound`` is
    ``C sigma^(-s(h))`` with s(h) = 2n + h + 2; the result is a diagnostic.
    """
    from .holder import GRID_MAX_ORDER, NormSpec, build_weights, holder_norm

    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    if not 0 <= h <= GRID_MAX_ORDER - 1:
        raise ValueError(f"h must lie in 0..{GRID_MAX_ORDER - 1} on grids")
    spec = spec or QuadratureSpec()
    grid = spec.grid(r)
    weights = build_weights(h + 1)
    outer = NormSpec(r, h, mu, weights)
    inner = NormSpec(r * (1.0 - sigma), h + 1, mu, weights)
    ratios = {}
    for a, b in (probes if probes is not None else monomial_probes(degree)):
        M = np.empty((1, 1), dtype=object)
        M[0, 0] = grid.sample(lambda z, a=a, b=b: z ** a * np.conj(z) ** b)
        u = MatrixForm(1, 1, 1, 1, {(1,): M}, grid)
        den = holder_norm(u, outer)
        if den == 0.0:
            continue
        ratios[f"z^{a} zb^{b}"] = holder_norm(cauchy_transform(u, r, spec), inner) / den
    ratio = max(ratios.values(), default=0.0)
    return {"h": h, "sigma": sigma, "r": r, "ratio": ratio, "per_probe": ratios,
            "bound": C * sigma ** (-(2 + h + 2)), "C": C}
