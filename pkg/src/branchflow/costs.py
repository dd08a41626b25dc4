"""Radial transition energies and the reduced per-length cost.

The transition energy

    q^d(xi, r1, r2) = min { int_{r1}^{r2} t^{d-1} [ |v'|^p + (1-v)^2 ] dt :
                            v(r1) = xi, v(r2) = 1 }

measures the cost of driving a phase profile from the level xi up to 1
across the ring r1 < t < r2.  Its large-r2 limit q^d_inf(xi, r_hat) feeds
the reduced cost

    f(m) = min_{r > 0}  a m^2 / (w_d r^d)  +  w_d r^d  +  pref * w_d * q^d_inf(0, r)

with w_d the volume of the unit ball in dimension d.  The radial
integration prefactor `pref` defaults to d (the coarea factor d*w_d);
the alternative (d-1)*w_d convention is available behind a switch but
degenerates at d = 1 (it yields kappa = 0 there).

Everything here is a pure function of its arguments; results for the
1-D inner problems are cached.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import minimize_scalar

from .errors import BracketFailure, NonConvergence, ValidationError

# 3-point Gauss-Legendre on [0, 1]; exact through degree 5, which covers
# t^{d-1} (1-v)^2 for piecewise-linear v up to d = 4.
_GAUSS_A = np.array([0.5 - math.sqrt(15.0) / 10.0, 0.5, 0.5 + math.sqrt(15.0) / 10.0])
_GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])

PREFACTOR_D_OMEGA = "d_omega"
PREFACTOR_D_MINUS_ONE_OMEGA = "d_minus_one_omega"


def unit_ball_volume(d):
    """Volume of the unit ball in R^d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class CostParams:
    """Parameters (d, p, a) of the reduced radial problem family.

    d is the codimension (= n - k for a k-current in R^n), p the gradient
    exponent (p > d is required), a >= 0 the lower-barrier coefficient.
    """

    d: int
    p: float
    a: float
    prefactor: str = PREFACTOR_D_OMEGA

    def __post_init__(self):
        if self.d < 1 or self.d != int(self.d):
            raise ValidationError(f"d must be an integer >= 1, got {self.d}")
        if not self.p > self.d:
            raise ValidationError(f"p must exceed d, got p={self.p}, d={self.d}")
        if self.a < 0:
            raise ValidationError(f"a must be >= 0, got {self.a}")
        if self.prefactor not in (PREFACTOR_D_OMEGA, PREFACTOR_D_MINUS_ONE_OMEGA):
            raise ValidationError(f"unknown prefactor convention {self.prefactor!r}")

    @property
    def omega_d(self):
        return unit_ball_volume(self.d)

    @property
    def radial_prefactor(self):
        """Multiplier of omega_d * q_inf in the reduced cost."""
        if self.prefactor == PREFACTOR_D_OMEGA:
            return float(self.d)
        return float(self.d - 1)


@dataclass(frozen=True)
class TransitionProfile:
    """Discrete minimizer of the ring transition problem."""

    radii: np.ndarray
    values: np.ndarray
    energy: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape:
            raise ValidationError("radii and values must be 1-D arrays of equal length")
        if np.any(np.diff(r) <= 0):
            raise ValidationError("radii must be strictly increasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        """Piecewise-linear evaluation, extended by the boundary values."""
        return np.interp(t, self.radii, self.values)


@dataclass(frozen=True)
class CostEvaluation:
    """Reduced cost at one multiplicity, with the minimizing radius."""

    m: float
    f_value: float
    r_star: float
    q_inf_at_r_star: float


def _graded_grid(r1, r2, n, power=4.0):
    """Node grid on [r1, r2], refined near r1 (where the profile varies)."""
    s = np.linspace(0.0, 1.0, n + 1) ** power
    t = r1 + (r2 - r1) * s
    t[0], t[-1] = r1, r2
    return t


class _RingEnergy:
    """Discrete G^d(v) = int t^{d-1}[|v'|^p + (1-v)^2] for piecewise-linear v."""

    def __init__(self, t, d, p):
        self.t = t
        self.d = d
        self.p = p
        self.dt = np.diff(t)
        # exact integral of t^{d-1} over each interval (multiplies |v'|^p)
        self.pw = (t[1:] ** d - t[:-1] ** d) / d
        # Gauss weights for the (1-v)^2 term: W[i, g] = dt_i * w_g * x_{i,g}^{d-1}
        x = t[:-1, None] + self.dt[:, None] * _GAUSS_A[None, :]
        self.qw = self.dt[:, None] * _GAUSS_W[None, :] * x ** (d - 1)
        self.ga = 1.0 - _GAUSS_A  # weight of the left node in v(x_g)
        self.gb = _GAUSS_A

    def value(self, v):
        s = np.diff(v) / self.dt
        vg = v[:-1, None] * self.ga[None, :] + v[1:, None] * self.gb[None, :]
        return float(np.sum(np.abs(s) ** self.p * self.pw)
                     + np.sum(self.qw * (1.0 - vg) ** 2))

    def value_grad(self, v):
        p = self.p
        s = np.diff(v) / self.dt
        sp = np.abs(s) ** (p - 1.0) * np.sign(s)
        vg = v[:-1, None] * self.ga[None, :] + v[1:, None] * self.gb[None, :]
        res = 1.0 - vg
        val = float(np.sum(np.abs(s) ** p * self.pw) + np.sum(self.qw * res ** 2))
        g = np.zeros_like(v)
        flux = p * sp * self.pw / self.dt
        g[:-1] -= flux
        g[1:] += flux
        qg = -2.0 * self.qw * res
        g[:-1] += qg @ self.ga
        g[1:] += qg @ self.gb
        return val, g

    def hessian_banded(self, v):
        """Tridiagonal Hessian in LAPACK upper-banded storage."""
        p = self.p
        n = v.size
        s = np.diff(v) / self.dt
        w = p * (p - 1.0) * np.abs(s) ** (p - 2.0) * self.pw / self.dt ** 2
        diag = np.zeros(n)
        diag[:-1] += w
        diag[1:] += w
        off = -w.copy()
        diag[:-1] += 2.0 * np.sum(self.qw * self.ga[None, :] ** 2, axis=1)
        diag[1:] += 2.0 * np.sum(self.qw * self.gb[None, :] ** 2, axis=1)
        off += 2.0 * np.sum(self.qw * self.ga[None, :] * self.gb[None, :], axis=1)
        ab = np.zeros((2, n))
        ab[0, 1:] = off
        ab[1, :] = diag
        return ab


def _minimize_ring(energy, v0, lo, hi, rel_tol=1e-10, max_iter=200):
    """Damped projected Newton for the strictly convex ring problem.

    Endpoints of v0 are fixed; interior nodes are optimized within
    [lo, hi].  The integrand is jointly convex in (v, v'), so any
    stationary point is the global minimum.
    """
    v = v0.copy()
    e_old, g = energy.value_grad(v)
    for _ in range(max_iter):
        ab = energy.hessian_banded(v)
        # eliminate the fixed endpoints from the Newton system
        abi = ab[:, 1:-1].copy()
        rhs = -g[1:-1]
        abi[1, :] += 1e-14 * max(1.0, abi[1].max())
        step = solveh_banded(abi, rhs)
        tau = 1.0
        improved = False
        for _ in range(40):
            trial = v.copy()
            trial[1:-1] = np.clip(v[1:-1] + tau * step, lo, hi)
            e_new = energy.value(trial)
            if e_new <= e_old + 1e-14 * max(1.0, abs(e_old)):
                improved = True
                break
            tau *= 0.5
        if not improved:
            break
        v = trial
        converged = abs(e_old - e_new) <= rel_tol * max(1.0, abs(e_old))
        e_old, g = energy.value_grad(v)
        if converged:
            return v, e_old
    # flat landscapes (e.g. xi close to 1) legitimately stall early
    if np.linalg.norm(g[1:-1], np.inf) <= 1e-7 * max(1.0, abs(e_old)) + 1e-9:
        return v, e_old
    raise NonConvergence("ring minimization did not reach its tolerance")


def transition_energy(xi, r1, r2, params, resolution=256):
    """Minimize the ring transition functional from xi at r1 to 1 at r2.

    Returns a TransitionProfile holding the monotone discrete minimizer
    and its energy.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValidationError(f"xi must lie in [0, 1], got {xi}")
    if not (0.0 <= r1 < r2):
        raise ValidationError(f"need 0 <= r1 < r2, got r1={r1}, r2={r2}")
    if resolution < 16:
        raise ValidationError(f"resolution must be >= 16, got {resolution}")
    t = _graded_grid(r1, r2, int(resolution))
    if xi == 1.0:
        return TransitionProfile(t, np.ones_like(t), 0.0)
    energy = _RingEnergy(t, params.d, params.p)
    # exponential seed: exact for d=1, p=2, a sensible warm start otherwise
    v0 = 1.0 - (1.0 - xi) * np.exp(-(t - r1))
    v0[0], v0[-1] = xi, 1.0
    v, _ = _minimize_ring(energy, v0, xi, 1.0)
    v = np.clip(np.maximum.accumulate(v), xi, 1.0)
    v[0], v[-1] = xi, 1.0
    return TransitionProfile(t, v, energy.value(v))


@lru_cache(maxsize=65536)
def _q_infinity_cached(xi, r_hat, d, p, tol, resolution):
    params = CostParams(d=d, p=p, a=0.0)
    if xi == 1.0:
        return 0.0
    scale = max(r_hat, 1.0)
    r2 = 8.0 * scale
    cap = 2.0 ** 14 * scale
    q_prev = transition_energy(xi, r_hat, r2, params, resolution).energy
    while True:
        r2 *= 2.0
        q = transition_energy(xi, r_hat, r2, params, resolution).energy
        # q is nonincreasing in r2 and bounded below, so this terminates
        if q_prev - q < tol:
            return q
        if r2 > cap:
            raise NonConvergence(
                f"q_infinity truncation exceeded its cap (xi={xi}, r_hat={r_hat})")
        q_prev = q


def q_infinity(xi, r_hat, params, tol=1e-6, resolution=256):
    """Transition energy from xi at r_hat out to 1 at infinity.

    Computed by doubling the truncation radius until successive values
    differ by less than tol.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if r_hat < 0:
        raise ValidationError(f"r_hat must be >= 0, got {r_hat}")
    if not 0.0 <= xi <= 1.0:
        raise ValidationError(f"xi must lie in [0, 1], got {xi}")
    return _q_infinity_cached(float(xi), float(r_hat), params.d, float(params.p),
                              float(tol), int(resolution))


def kappa(params, tol=1e-6, resolution=512):
    """Uniform lower bound of the reduced cost: pref * w_d * q_inf(0, 0)."""
    return params.radial_prefactor * params.omega_d * q_infinity(
        0.0, 0.0, params, tol=tol, resolution=resolution)


def _ramp_transition_value(r1, r2, d, p):
    """Ring energy of the linear 0 -> 1 ramp on (r1, r2); an upper bound on q."""
    t = np.linspace(r1, r2, 2049)
    v = (t - r1) / (r2 - r1)
    grad = (1.0 / (r2 - r1)) ** p * (r2 ** d - r1 ** d) / d
    pot = np.trapezoid(t ** (d - 1) * (1.0 - v) ** 2, t)
    return grad + pot


def competitor_bound(m, params):
    """Explicit upper bound on f(m) from the truncated-cone competitor.

    Uses the plateau radius r1 = (sqrt(a) m)^{1/d} and a linear ramp out
    to r2 = (1 + sqrt(a) m)^{1/d}; behaves like C0 * sqrt(1 + m^2).
    """
    if m <= 0:
        return 0.0
    w = params.omega_d
    r1 = (math.sqrt(params.a) * m) ** (1.0 / params.d)
    r2 = (1.0 + math.sqrt(params.a) * m) ** (1.0 / params.d)
    mass = params.a * m ** 2 / (w * r1 ** params.d) if params.a > 0 else 0.0
    q_up = _ramp_transition_value(r1, r2, params.d, params.p)
    return mass + w * r1 ** params.d + params.radial_prefactor * w * q_up


def _radius_objective(r_hat, m, params, tol, resolution):
    w = params.omega_d
    q = q_infinity(0.0, r_hat, params, tol=tol, resolution=resolution)
    return (params.a * m ** 2 / (w * r_hat ** params.d)
            + w * r_hat ** params.d
            + params.radial_prefactor * w * q)


def cost_f(m, params, tol=1e-5, resolution=256):
    """Reduced per-length cost f(m), minimized over the core radius.

    For a = 0 the mass term is dropped and the infimum is attained in the
    r -> 0 limit, giving the constant kappa.
    """
    if m < 0:
        raise ValidationError(f"m must be >= 0, got {m}")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if m == 0:
        return CostEvaluation(m=0.0, f_value=0.0, r_star=0.0, q_inf_at_r_star=0.0)
    if params.a == 0:
        q0 = q_infinity(0.0, 0.0, params, tol=tol, resolution=resolution)
        return CostEvaluation(m=float(m), f_value=params.radial_prefactor
                              * params.omega_d * q0, r_star=0.0, q_inf_at_r_star=q0)
    bound = competitor_bound(m, params)
    r_hi = (bound / params.omega_d) ** (1.0 / params.d)
    r_lo = r_hi * 1e-4
    # coarse log scan, then bounded refinement on the best bracket;
    # unimodality in r_hat is unproven so we do not trust a cold Brent run
    grid = np.geomspace(r_lo, r_hi, 25)
    vals = [_radius_objective(r, m, params, tol, resolution) for r in grid]
    i = int(np.argmin(vals))
    if i == len(grid) - 1:
        raise BracketFailure(
            "radius objective still decreasing at the bracket edge; "
            "check prefactor/parameter consistency")
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(_radius_objective, bounds=(lo, hi), method="bounded",
                          args=(m, params, tol, resolution),
                          options={"xatol": 1e-6 * hi})
    r_star = float(res.x)
    q_star = q_infinity(0.0, r_star, params, tol=tol, resolution=resolution)
    f_val = (params.a * m ** 2 / (params.omega_d * r_star ** params.d)
             + params.omega_d * r_star ** params.d
             + params.radial_prefactor * params.omega_d * q_star)
    if res.fun < f_val:
        f_val = float(res.fun)
    return CostEvaluation(m=float(m), f_value=float(f_val), r_star=r_star,
                          q_inf_at_r_star=float(q_star))


def cost_table(ms, params, tol=1e-5, resolution=256):
    """Elementwise cost_f over a sorted list of masses."""
    ms = list(ms)
    if any(m < 0 for m in ms):
        raise ValidationError("masses must be nonnegative")
    if any(b < a for a, b in zip(ms, ms[1:])):
        raise ValidationError("masses must be sorted ascending")
    return [cost_f(m, params, tol=tol, resolution=resolution) for m in ms]


def write_cost_table_csv(evals, path):
    """CSV export: header m,f,r_star,q_inf; 12 significant digits."""
    lines = ["m,f,r_star,q_inf"]
    for ev in evals:
        lines.append("%.12g,%.12g,%.12g,%.12g"
                     % (ev.m, ev.f_value, ev.r_star, ev.q_inf_at_r_star))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def finite_eps_cost(m, r, eps, params, resolution=384):
    """Finite-eps radial cost: minimize the ball energy with theta eliminated.

    The optimal source density for fixed u is theta = lam / u with lam
    fixed by the mass constraint, which turns the mass term into
    m^2 / (eps * int 1/u).  The remaining profile functional is minimized
    over nondecreasing-ish radial u in [eta, 1] with u(r) = 1.
    """
    if m <= 0:
        raise ValidationError(f"m must be positive, got {m}")
    if not eps < r:
        raise ValidationError(f"need eps < r, got eps={eps}, r={r}")
    d, p, a, w = params.d, params.p, params.a, params.omega_d
    eta = a * eps ** (d + 1)
    if eta >= 1.0:
        raise ValidationError(
            f"eps too large: barrier a*eps^(d+1) = {eta} >= 1")
    from scipy.optimize import minimize as _sp_minimize

    t = _graded_grid(0.0, r, int(resolution), power=2.0)
    dt = np.diff(t)
    pw = (t[1:] ** d - t[:-1] ** d) / d
    xg = t[:-1, None] + dt[:, None] * _GAUSS_A[None, :]
    qw = dt[:, None] * _GAUSS_W[None, :] * xg ** (d - 1)
    ga, gb = 1.0 - _GAUSS_A, _GAUSS_A
    dw = d * w

    def split(z):
        u = np.empty(t.size)
        u[:-1] = z
        u[-1] = 1.0
        return u

    def objective(z):
        u = split(z)
        s = np.diff(u) / dt
        ug = u[:-1, None] * ga[None, :] + u[1:, None] * gb[None, :]
        grad_term = eps ** (p - d) * np.sum(np.abs(s) ** p * pw)
        pot_term = np.sum(qw * (1.0 - ug) ** 2) / eps ** d
        denom = dw * np.sum(qw / ug)
        mass_term = m ** 2 / (eps * denom)
        val = dw * (grad_term + pot_term) + mass_term
        # gradient
        g = np.zeros(t.size)
        flux = eps ** (p - d) * p * np.abs(s) ** (p - 1) * np.sign(s) * pw / dt
        g[:-1] -= dw * flux
        g[1:] += dw * flux
        qg = -2.0 * qw * (1.0 - ug) / eps ** d
        g[:-1] += dw * (qg @ ga)
        g[1:] += dw * (qg @ gb)
        dmass = (m ** 2 / (eps * denom ** 2)) * dw * (qw / ug ** 2)
        g[:-1] += dmass @ ga
        g[1:] += dmass @ gb
        return val, g[:-1]

    # seed with the expected limit profile: eta core of radius r0*eps,
    # exponential-scale transition of width eps beyond
    r0 = (math.sqrt(a) * m / w) ** (1.0 / d) if a > 0 else 1.0
    u0 = 1.0 - (1.0 - eta) * np.exp(-np.maximum(t - r0 * eps, 0.0) / eps)
    z0 = np.clip(u0[:-1], eta, 1.0)
    res = _sp_minimize(objective, z0, jac=True, method="L-BFGS-B",
                       bounds=[(eta, 1.0)] * z0.size,
                       options={"maxiter": 3000, "ftol": 1e-14, "gtol": 1e-10})
    if not res.success and res.status != 2:  # 2: lost precision, accept
        raise NonConvergence(f"finite_eps_cost u-minimization failed: {res.message}")
    return float(objective(res.x)[0])
