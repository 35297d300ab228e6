"""Quadratically convergent iteration that gauges a connection to zero.

At step k the current data live on B_{r_k}.  A gauge parameter is built by
solving dbar on nested disks B_{r(k, m-t)} for decreasing form degree t,
the data are transformed by it and restricted to B_{r_{k+1}}.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable


from . import forms as F
from .forms import MatrixForm
from .grid import PolarGrid
from .holder import GRID_MAX_ORDER, NormSpec, WeightSequence, data_weights, holder_norm, \
    holder_values, real_multi_indices, derivative, _pairs_for, _samples
from .koppelman import QuadratureSpec, homotopy_operator
from .recalibration import recalibrate, system_residual
from .resolution import AugmentedData, ConnectionData, GaugeParam, integrability_residual, \
    param_product
from .series import SeriesRing


class SolverError(RuntimeError):
    """Documented solver failure; ``report`` holds the partial run."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(SolverError):
    pass


class UnitConditionError(SolverError):
    pass


class InputError(ValueError):
    """Input rejected before iterating (unsupported setup or non-integrable data)."""


# schedule ------------------------------------------------------------------

class Schedule:
    """Shrinking radii: sigma_k = e^(-k-2), r_{k+1} = r_k (1 - sigma_k)."""

    def __init__(self, m: int, r0: float, horizon: int = 200):
        if not r0 > 0:
            raise ValueError("initial radius must be positive")
        if m < 0:
            raise ValueError("m must be non-negative")
        self.m, self.r0 = m, float(r0)
        self._r = [self.r0]
        self._extend(horizon)

    def _extend(self, k):
        while len(self._r) <= k:
            j = len(self._r) - 1
            self._r.append(self._r[-1] * (1.0 - self.sigma(j)))

    @staticmethod
    def sigma(k: int) -> float:
        return math.exp(-k - 2)

    def sigma_m(self, k: int) -> float:
        return self.sigma(k) / (self.m + 1)

    def radius(self, k: int) -> float:
        self._extend(k)
        return self._r[k]

    def radius_l(self, k: int, l: int) -> float:
        """r(k, l) = r_k (1 - l sigma_{m,k}); l = m + 1 gives r_{k+1}."""
        if not 0 <= l <= self.m + 1:
            raise ValueError(f"l must lie in 0..{self.m + 1}")
        return self.radius(k) * (1.0 - l * self.sigma_m(k))

    @staticmethod
    def shrink_product(terms: int = 200) -> float:
        """prod_{k>=0} (1 - sigma_k), truncated after ``terms`` factors."""
        return math.prod(1.0 - math.exp(-k - 2) for k in range(terms))

    def limit_radius(self) -> float:
        return self.r0 * self.shrink_product()


def order_exponent(n: int, h: int) -> int:
    """s(h) = 2n + h + 2, the power lost by the solution operator at order h."""
    return 2 * n + h + 2


def loss_exponent(m: int, n: int, h: int) -> int:
    return ((m + 2) * m + 1) * order_exponent(n, h)


def predictor(a0: float, H: float = 10.0, P: float = 10.0, m: int = 0, n: int = 1,
              K: int = 10, gamma_slope: float = 1.0, gamma_intercept: float = 1.0) -> dict:
    """Majorants alpha_k of a_k and beta_k of b_k for k = 0..K (log-space evaluation).

    alpha_k = a0^(2^k) prod_{j<k} (H sigma_j^(-nu(m,j)))^(2^(k-1-j))
    beta_k  = b0^(2^k) prod_{j<k} (P e^(gamma(m,j)))^(2^(k-1-j))
    with b0 = H sigma_{m,0}^(-(m+1) s(0)) a0 and gamma(m,j) affine in j.
    """
    if a0 < 0:
        raise ValueError("a0 must be non-negative")
    sched = Schedule(m, 1.0)

    def gamma(j):
        return gamma_intercept + gamma_slope * j

    la0 = math.log(a0) if a0 > 0 else -math.inf
    b0 = H * sched.sigma_m(0) ** (-(m + 1) * order_exponent(n, 0)) * a0
    lb0 = math.log(b0) if b0 > 0 else -math.inf
    alpha, beta = [], []
    for k in range(K + 1):
        la = (2 ** k) * la0 + sum(
            2 ** (k - 1 - j) * (math.log(H) - loss_exponent(m, n, j) * math.log(sched.sigma(j)))
            for j in range(k))
        lb = (2 ** k) * lb0 + sum(2 ** (k - 1 - j) * (math.log(P) + gamma(j)) for j in range(k))
        alpha.append(_safe_exp(la))
        beta.append(_safe_exp(lb))
    return {"alpha": alpha, "beta": beta, "b0": b0, "threshold": alpha_threshold(H, m, n)}


def alpha_threshold(H: float = 10.0, m: int = 0, n: int = 1, terms: int = 200) -> float:
    """a0 below this value makes sum alpha_k converge (uses sigma_{m,j})."""
    tail = sum(loss_exponent(m, n, j) * (j + 2 + math.log(m + 1)) * 2.0 ** (-j)
               for j in range(terms))
    return math.exp(-math.log(H) - 0.5 * tail)


def _safe_exp(x):
    if x == -math.inf:
        return 0.0
    return math.exp(x) if x < 709 else math.inf


# step parameter --------------------------------------------------------------

def build_step_param(omega: ConnectionData, sched: Schedule | None = None, k: int = 0,
                     spec: QuadratureSpec | None = None) -> GaugeParam:
    """Gauge parameter that cancels ``omega`` to first order.

    Components are computed for t = m down to 0:
    eta[s,t] = -T( w[s,t] + w[s+t+1,-1] ^ eta[s,t+1] + (-1)^t eta[s-1,t+1] ^ w[s,-1] ),
    with T the solution operator on B_{r(k, m-t)} (grid data) or the exact
    series homotopy.  All components are returned on B_{r(k, m)}.
    """
    m = omega.m
    series = isinstance(omega.backend, SeriesRing)
    if not series and sched is None:
        raise ValueError("grid data need a schedule")
    spec = spec or (QuadratureSpec(omega.backend.n_rad, omega.backend.n_ang) if not series else None)

    def radius(t):
        return None if series else sched.radius_l(k, m - t)

    def onto(form, t):
        if series:
            return form
        return F.resample(form, spec.grid(radius(t)))

    eta: dict = {}

    def eta_get(s, t):
        if (s, t) in eta:
            return eta[(s, t)]
        rows = omega.p[s + t] if 0 <= s + t <= m else 0
        cols = omega.p[s] if 0 <= s <= m else 0
        return F.zero_form(omega.backend, omega.n, rows, cols, t)

    for t in range(m, -1, -1):
        for s in range(0, m - t + 1):
            src = onto(omega.get(s, t), t)
            a = F.wedge(onto(omega.get(s + t + 1, -1), t), onto(eta_get(s, t + 1), t))
            b = F.wedge(onto(eta_get(s - 1, t + 1), t), onto(omega.get(s, -1), t))
            src = src + a + (b if t % 2 == 0 else F.scale(b, -1))
            eta[(s, t)] = F.scale(homotopy_operator(src, radius(t), spec), -1)
    final = {key: onto(val, 0) for key, val in eta.items()}
    backend = omega.backend if series else spec.grid(radius(0))
    return GaugeParam(omega.n, m, omega.p, backend, final)


# diagnostics -------------------------------------------------------------------

def sigma_residual(phi: dict, psi: MatrixForm | None, gauges: dict) -> dict:
    """dbar of the gauged maps: psi g_0 and g_{s-1}^{-1} phi_s g_s (sup norms)."""
    out = {}
    if psi is not None:
        out["psi"] = F.sup_norm(F.dbar(F.wedge(psi, gauges[0])))
    for s in sorted(phi):
        gi = F.invert_unit(gauges[s - 1])
        out[f"phi_{s}"] = F.sup_norm(F.dbar(F.wedge(F.wedge(gi, phi[s]), gauges[s])))
    return out


def _unweighted(vals_fn, form, r, mu):
    pts, mask = _samples(form, r)
    pairs = _pairs_for(form, pts.shape[0], mask)
    total = 0.0
    for I in form.components:
        total += holder_values(vals_fn(form, I), pts, r, mu, pairs, mask)
    return total


def _plain_norm(form: MatrixForm, r: float, mu: float) -> float:
    return _unweighted(lambda f, I: F.component_values(f, I), form, r, mu)


def _ratio_cap(forms, order, r, mu, factor=1.0):
    """min over forms of factor * |f| / |d^order f| (inf when derivatives vanish)."""
    best = math.inf
    for f in forms:
        if not f.components:
            continue
        num = _plain_norm(f, r, mu)
        den = sum(_plain_norm(derivative(f, a), r, mu) for a in real_multi_indices(f.n, order))
        if den > 0:
            best = min(best, factor * num / den)
    return best


# solver ------------------------------------------------------------------------

@dataclass
class SolveConfig:
    r0: float = 0.5
    tol: float = 1e-8
    max_iter: int = 12
    n_rad: int = 128
    n_ang: int = 256
    mu: float = 0.5
    eps: float = 0.45
    h_max: int = 1
    H: float = 10.0
    P: float = 10.0
    gamma_slope: float = 1.0
    gamma_intercept: float = 1.0
    integrability_tol: float = 1e-6
    kernel_const: float = 1.0
    taylor_order: int = 2
    filter_power: int = 16
    keep_states: bool = True

    def __post_init__(self):
        if not self.r0 > 0:
            raise InputError("r0 must be positive")
        if not 0 < self.eps < 0.5:
            raise InputError("eps must lie in (0, 1/2)")
        if not 0 < self.mu < 1:
            raise InputError("mu must lie in (0, 1)")
        if self.max_iter < 0:
            raise InputError("max_iter must be non-negative")
        if not 0 <= self.h_max <= GRID_MAX_ORDER - 1:
            raise InputError(f"h_max must lie in 0..{GRID_MAX_ORDER - 1} on grids")
        QuadratureSpec(self.n_rad, self.n_ang)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    reason: str
    history: list
    gauges: dict
    final_radius: float
    residuals: dict
    system_residual: dict
    predictor: dict
    config: SolveConfig
    weights: WeightSequence | None = None
    states: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    origin: ConnectionData | None = None

    def summary(self) -> dict:
        """JSON-serialisable digest."""
        g_sup = {str(s): F.sup_norm(g) for s, g in self.gauges.items()}
        samples = {}
        for s, g in self.gauges.items():
            grid = g.backend
            vals = F.component_values(g, ())
            picks = {"center": 0, "mid": (grid.n_rad // 2) * grid.n_ang,
                     "edge": (grid.n_rad - 1) * grid.n_ang}
            samples[str(s)] = {
                name: {"z": [float(grid.z.reshape(-1)[i].real), float(grid.z.reshape(-1)[i].imag)],
                       "re": vals[i].real.tolist(), "im": vals[i].imag.tolist()}
                for name, i in picks.items()
            }
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "reason": self.reason,
            "final_radius": self.final_radius,
            "sigma_residual": self.residuals,
            "system_residual": {f"{s},{t}": v for (s, t), v in self.system_residual.items()},
            "gauge_sup": g_sup,
            "gauge_samples": samples,
            "history": self.history,
            "predictor": self.predictor,
            "weights": list(self.weights.values) if self.weights else None,
            "config": self.config.__dict__,
        }

    def write_history(self, path):
        cols = []
        for row in self.history:
            for c in row:
                if c not in cols:
                    cols.append(c)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for row in self.history:
                w.writerow(row)


def _on_grid(form, grid):
    return F.to_grid(form, grid)


def prepare(data: AugmentedData, config: SolveConfig):
    """Sample the input on the initial grid and check it."""
    omega = data.connection
    if omega.n != 1:
        raise InputError(f"the numeric solver supports n = 1 only (got n = {omega.n})")
    grid = PolarGrid(config.r0, config.n_rad, config.n_ang)
    if isinstance(omega.backend, PolarGrid) and omega.backend.radius < config.r0 * (1 - 1e-12):
        raise InputError(f"data given on B_{omega.backend.radius:g}, smaller than r0 = {config.r0:g}")
    omega_g = omega.with_backend(grid, lambda f: _on_grid(f, grid))
    psi = _on_grid(data.psi, grid) if data.psi is not None else None
    res = integrability_residual(omega_g)
    worst = max((F.sup_norm(v) for v in res.values()), default=0.0)
    if worst > config.integrability_tol:
        raise InputError(
            f"input is not integrable: residual {worst:.3e} exceeds {config.integrability_tol:g}"
        )
    return omega_g, psi


def _a_value(omega: ConnectionData, r, h, mu, weights):
    spec = NormSpec(r, h, mu, weights)
    return max((holder_norm(f, spec) for (s, k), f in omega.entries.items() if k >= 0),
               default=0.0)


def iterate(data: AugmentedData, config: SolveConfig | None = None,
            progress: Callable | None = None) -> SolveReport:
    """Run the iteration until a_k <= tol, max_iter steps, or a documented failure."""
    config = config or SolveConfig()
    omega0, psi0 = prepare(data, config)
    m, n = omega0.m, omega0.n
    sched = Schedule(m, config.r0)
    spec = QuadratureSpec(config.n_rad, config.n_ang, taylor_order=config.taylor_order)
    K = config.h_max + 1
    caps_R: dict = {}
    caps_L: dict = {}

    def weights():
        return data_weights(omega0, K, config.r0, kernel_const=config.kernel_const,
                            R=caps_R, L=caps_L)

    ws = weights()
    omega = omega0
    acc_eta = GaugeParam.neutral(n, m, omega0.p, omega0.backend)
    a0 = _a_value(omega, config.r0, 0, config.mu, ws)
    pred = predictor(a0, config.H, config.P, m, n, K=max(config.max_iter, 1),
                     gamma_slope=config.gamma_slope, gamma_intercept=config.gamma_intercept)
    phis0 = {s: omega0.phi(s) for s in range(1, m + 1)}
    history: list = []
    states = [omega0] if config.keep_states else []
    steps: list = []

    def b_value(k, a):
        return config.H * sched.sigma_m(k) ** (-(m + 1) * order_exponent(n, k)) * a \
            if a > 0 else 0.0

    def record(k, a, eta_sup):
        grid = omega.backend
        gauges = {s: acc_eta.gauge(s) for s in range(m + 1)}
        row = {"k": k, "r_k": grid.radius, "a_k": a, "b_k": b_value(k, a),
               "alpha_k": pred["alpha"][k] if k < len(pred["alpha"]) else math.nan,
               "max_eta_sup": eta_sup, "S_1": ws[1] if len(ws) > 1 else math.nan}
        phis = {s: F.resample(f, grid) for s, f in phis0.items()}
        psi = F.resample(psi0, grid) if psi0 is not None else None
        sig = sigma_residual(phis, psi, gauges)
        for key, val in sig.items():
            row[f"sigma_residual_{key}"] = val
        row["gauge_sup"] = max(F.sup_norm(g) for g in gauges.values())
        row["gauge_inv_sup"] = max(F.sup_norm(F.invert_unit(g)) for g in gauges.values())
        history.append(row)
        if progress:
            progress(row)
        return sig

    def make_report(converged, reason, k):
        grid = omega.backend
        gauges = {s: acc_eta.gauge(s) for s in range(m + 1)}
        o0 = omega0.with_backend(grid, lambda f: F.resample(f, grid))
        sysres = {key: F.sup_norm(v) for key, v in system_residual(acc_eta, o0).items()}
        return SolveReport(converged, k, reason, history, gauges, grid.radius,
                           dict(last_sigma), sysres, pred, config, ws, states, steps, omega0)

    last_sigma = record(0, a0, 0.0)
    a_prev = a0
    increases = 0
    if a0 <= config.tol:
        return make_report(True, "converged", 0)
    for k in range(config.max_iter):
        r_k = sched.radius(k)
        # adaptive caps: only orders the grid resolves are computed
        if k + 1 <= GRID_MAX_ORDER:
            caps_R[k + 1] = _ratio_cap([f for (s, t), f in omega.entries.items() if t >= 0],
                                       k + 1, r_k, config.mu)
            gs = [acc_eta.gauge(s) for s in range(m + 1)]
            gs = gs + [F.invert_unit(g) for g in gs]
            caps_L[k + 1] = _ratio_cap(gs, k + 1, r_k, config.mu, factor=2.0 ** (-k - 1))
            ws = weights()
        eta = build_step_param(omega, sched, k, spec)
        eta_sup = max(F.sup_norm(eta.get(s, 0)) for s in range(m + 1))
        if not eta_sup < config.eps:
            report = make_report(False, "unit condition failed", k)
            raise UnitConditionError(
                f"step {k + 1}: sup |eta| = {eta_sup:.3g} is not below eps = {config.eps:g}; "
                f"try a smaller r0 (currently {config.r0:g})", report)
        inner = eta.backend
        omega_in = omega.with_backend(inner, lambda f: F.resample(f, inner))
        acc_in = acc_eta.with_backend(inner, lambda f: F.resample(f, inner))
        new = recalibrate(eta, omega_in)
        nxt = spec.grid(sched.radius(k + 1))
        omega = new.with_backend(nxt, lambda f: _settle(F.resample(f, nxt), config.filter_power))
        acc_eta = param_product(acc_in, eta).with_backend(nxt, lambda f: F.resample(f, nxt))
        if config.keep_states:
            states.append(omega)
            steps.append(eta)
        h = min(k + 1, config.h_max)
        a = _a_value(omega, nxt.radius, h, config.mu, ws)
        last_sigma = record(k + 1, a, eta_sup)
        if a <= config.tol:
            return make_report(True, "converged", k + 1)
        increases = increases + 1 if a > a_prev else 0
        a_prev = a
        if increases >= 2:
            report = make_report(False, "diverging", k + 1)
            raise DivergenceError(
                f"a_k increased twice in a row (a = {a:.3e} at step {k + 1}); "
                f"try a smaller r0 such as {config.r0 / 2:g}", report)
    return make_report(False, "max_iter reached", config.max_iter)


def _settle(f, power):
    """Radial low-pass filter against roundoff growth near the boundary (0 disables)."""
    if not power:
        return f
    return f.map(lambda c: c.smooth(power))


def composition_defect(report: SolveReport, k: int) -> float:
    """sup distance between the loop state at step k and the data transformed
    once by the accumulated parameter of steps 1..k."""
    if not report.states or k >= len(report.states):
        raise ValueError("states for that step were not kept")
    if k == 0:
        return 0.0
    target = report.states[k].backend
    steps = [s.with_backend(target, lambda f: F.resample(f, target)) for s in report.steps[:k]]
    acc = steps[0]
    for e in steps[1:]:
        acc = param_product(acc, e)
    o0 = report.origin.with_backend(target, lambda f: F.resample(f, target))
    once = recalibrate(acc, o0)
    return max(F.sup_norm(once.get(*key) - report.states[k].get(*key)) for key in o0.indices())
