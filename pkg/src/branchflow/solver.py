"""Alternating minimization of the diffuse transport energy.

The sigma half-step is exact: for frozen u the mass term is a quadratic
with diagonal face weights, minimized under the divergence constraint by
one weighted elliptic solve in potential form (sigma = (eps/u) grad phi,
pure Neumann, mean-zero gauge).  The u half-step descends the very same
discrete energy with a box-constrained quasi-Newton method, so the outer
trace is nonincreasing by construction.  The joint problem is nonconvex;
nothing stronger than monotone descent is promised.
"""

from dataclasses import dataclass, field
import json

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as sp_minimize
from scipy.sparse.linalg import cg as sparse_cg, spsolve

from .errors import NonConvergence, SolverError, ValidationError
from .fields import (EnergyBreakdown, ScalarField, VectorField, divergence,
                     energy, eta_barrier, face_mean, mass_term_value,
                     mollified_source)

try:
    import pyamg
except ImportError:  # pragma: no cover
    pyamg = None


@dataclass
class OptimizerConfig:
    eps: float
    a: float
    p: float = 2.0
    k: int = 1
    max_outer: int = 60
    cg_tol: float = 1e-10
    u_tol: float = 1e-8
    continuation: tuple = ()

    def __post_init__(self):
        if self.cg_tol <= 0 or self.u_tol <= 0:
            raise ValidationError("cg_tol and u_tol must be positive")
        eps_list = self.eps_schedule()
        if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            raise ValidationError("continuation eps values must be strictly decreasing")

    def eps_schedule(self):
        return list(self.continuation) + [self.eps]


@dataclass
class MinimizeResult:
    sigma: VectorField
    u: ScalarField
    trace: list
    trace_eps: list
    residual: float
    config: OptimizerConfig


def _difference_matrix(cells, axis, h):
    """Sparse map from cells to interior faces of one axis (C-order flat)."""
    mats = []
    for ax, c in enumerate(cells):
        if ax == axis:
            d = sp.diags([-np.ones(c), np.ones(c - 1)], [0, 1],
                         shape=(c - 1, c)) / h[ax]
            mats.append(d)
        else:
            mats.append(sp.identity(c))
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m)
    return out.tocsr()


def _weighted_laplacian(u, grid, eps, floor=1e-12):
    """A = sum_ax G^T diag(eps/ubar) G; SPD up to the constant null space."""
    mats = []
    for ax in range(grid.n):
        ubar = face_mean(u, grid, ax)
        w = eps / np.maximum(ubar, floor)
        G = _difference_matrix(grid.cells, ax, grid.h)
        W = sp.diags(w.ravel(order="C"))
        mats.append(G.T @ W @ G)
    A = mats[0]
    for m in mats[1:]:
        A = A + m
    return A.tocsr()


def sigma_step(u, spec, config, grid=None, rhs=None):
    """Exact minimizer of the u-frozen mass term under div sigma = f_eps.

    Solves div((eps/u) grad phi) = f_eps with pure Neumann conditions and
    mean-zero gauge by preconditioned CG, then reads the flux off the
    faces.  With a = 0 the face weight is floored at machine level.
    """
    grid = grid or u.grid
    eps = config.eps
    f = rhs if rhs is not None else mollified_source(spec, grid)
    vol = grid.cell_volume
    total = f.sum() * vol
    if abs(total) > 1e-9 * max(1.0, np.abs(f).max() * vol):
        raise ValidationError(f"incompatible rhs: discrete source mass {total} != 0")
    if not np.any(f):
        return VectorField.zeros(grid)
    A = _weighted_laplacian(u.data, grid, eps)
    b = -f.ravel(order="C") * 1.0
    b -= b.mean()
    if pyamg is not None:
        ml = pyamg.smoothed_aggregation_solver(
            A, B=np.ones((A.shape[0], 1)), max_coarse=64)
        M = ml.aspreconditioner(cycle="V")
    else:  # pragma: no cover
        M = sp.diags(1.0 / A.diagonal())
    bnorm = np.linalg.norm(b)
    phi, _ = sparse_cg(A, b, rtol=0.1 * config.cg_tol, atol=0.0, M=M,
                       maxiter=2000)
    res = np.linalg.norm(A @ phi - b)
    if res > config.cg_tol * bnorm:
        # high-contrast weights can stall CG; pin the gauge and go direct
        Ap = A.tolil()
        Ap[0, :] = 0.0
        Ap[:, 0] = 0.0
        Ap[0, 0] = A[0, 0]
        bp = b.copy()
        bp[0] = 0.0
        phi = spsolve(Ap.tocsc(), bp)
        res = np.linalg.norm(A @ phi - b)
    if res > config.cg_tol * bnorm:
        raise NonConvergence(
            f"sigma-step solve stalled: residual {res:.3e} "
            f"> {config.cg_tol * bnorm:.3e}")
    phi = phi.reshape(grid.cells)
    sigma = VectorField.zeros(grid)
    for ax in range(grid.n):
        ubar = face_mean(u.data, grid, ax)
        w = eps / np.maximum(ubar, 1e-12)
        sl = [slice(None)] * grid.n
        sl[ax] = slice(1, -1)
        sigma.components[ax][tuple(sl)] = w * np.diff(phi, axis=ax) / grid.h[ax]
    sigma.enforce_boundary()
    return sigma


def _grad_term_value_grad(u, grid, coeff, p):
    """Value and du-gradient of coeff * sum |grad u|^p * vol.

    Same quadrature as fields.energy: face differences averaged to
    centers, one-sided at the boundary layers.
    """
    n = grid.n
    vol = grid.cell_volume
    gs = []
    dfs = []
    total_sq = np.zeros(grid.cells)
    for ax in range(n):
        df = np.diff(u, axis=ax) / grid.h[ax]
        g = np.zeros(grid.cells)
        first = [slice(None)] * n
        last = [slice(None)] * n
        inner = [slice(None)] * n
        first[ax] = slice(0, 1)
        last[ax] = slice(-1, None)
        inner[ax] = slice(1, -1)
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        g[tuple(first)] = df[tuple(first)]
        g[tuple(last)] = df[tuple(last)]
        g[tuple(inner)] = 0.5 * (df[tuple(lo)] + df[tuple(hi)])
        gs.append(g)
        dfs.append(df)
        total_sq += g ** 2
    value = coeff * vol * float(np.sum(total_sq ** (p / 2.0)))
    # dE/dg = coeff*vol*p*(|g|^2)^{(p-2)/2} g  (zero where |g| = 0, p >= 2)
    amp = coeff * vol * p * total_sq ** ((p - 2.0) / 2.0)
    grad = np.zeros(grid.cells)
    for ax in range(n):
        dg = amp * gs[ax]
        # adjoint of the center averaging back onto face differences:
        # difference j feeds centers j and j+1 with weight 1/2 in the
        # interior; first/last differences also carry the one-sided ends
        ddf = np.zeros_like(dfs[ax])
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        inner_c = [slice(None)] * n
        inner_c[ax] = slice(1, -1)
        # centers 1..N-2 spread half weight to differences j-1 and j
        half = 0.5 * dg[tuple(inner_c)]
        sl_a = [slice(None)] * n
        sl_b = [slice(None)] * n
        sl_a[ax] = slice(0, -1)
        sl_b[ax] = slice(1, None)
        ddf[tuple(sl_a)] += half
        ddf[tuple(sl_b)] += half
        first_c = [slice(None)] * n
        last_c = [slice(None)] * n
        first_c[ax] = slice(0, 1)
        last_c[ax] = slice(-1, None)
        first_f = [slice(None)] * n
        last_f = [slice(None)] * n
        first_f[ax] = slice(0, 1)
        last_f[ax] = slice(-1, None)
        ddf[tuple(first_f)] += dg[tuple(first_c)]
        ddf[tuple(last_f)] += dg[tuple(last_c)]
        # adjoint of the difference
        dd = ddf / grid.h[ax]
        sl_m = [slice(None)] * n
        sl_p = [slice(None)] * n
        sl_m[ax] = slice(0, -1)
        sl_p[ax] = slice(1, None)
        grad[tuple(sl_m)] -= dd
        grad[tuple(sl_p)] += dd
    return value, grad


def _mass_linear_coefficient(sigma, eps):
    """M_c with mass term = sum_c u_c M_c under the face quadrature."""
    grid = sigma.grid
    vol = grid.cell_volume
    M = np.zeros(grid.cells)
    for ax, c in enumerate(sigma.components):
        sl = [slice(None)] * grid.n
        sl[ax] = slice(1, -1)
        s2 = c[tuple(sl)] ** 2
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        M[tuple(lo)] += 0.5 * s2
        M[tuple(hi)] += 0.5 * s2
    return M * vol / eps


def u_step(sigma, u0, config, eps=None):
    """Descend the sigma-frozen energy over u in [eta, 1], boundary 1.

    Convex for every p >= 2 (the mass term is linear in u under the face
    quadrature); solved by projected quasi-Newton (L-BFGS-B).  Returns u0
    unchanged if no descent is found within tolerance.
    """
    grid = u0.grid
    eps = config.eps if eps is None else eps
    n = grid.n
    eta = eta_barrier(eps, config.a, n, config.k)
    coeff = eps ** (config.p - n + config.k)
    pot_coeff = grid.cell_volume / eps ** (n - config.k)
    M = _mass_linear_coefficient(sigma, eps)
    interior = ~u0.boundary_mask()
    x0 = np.clip(u0.data[interior], eta, 1.0)
    base = np.ones(grid.cells)

    def objective(x):
        base[interior] = x
        gv, gg = _grad_term_value_grad(base, grid, coeff, config.p)
        pot = pot_coeff * float(np.sum((1.0 - base) ** 2))
        mass = float(np.sum(base * M))
        grad = gg + pot_coeff * 2.0 * (base - 1.0) + M
        return gv + pot + mass, grad[interior]

    j0 = objective(x0)[0]
    res = sp_minimize(objective, x0, jac=True, method="L-BFGS-B",
                      bounds=[(eta, 1.0)] * x0.size,
                      options={"maxiter": 800, "ftol": 1e-13,
                               "gtol": config.u_tol})
    if res.fun > j0 + 1e-12 * max(1.0, abs(j0)):
        return u0.copy()  # safeguard: never accept an ascent step
    out = np.ones(grid.cells)
    out[interior] = np.clip(res.x, eta, 1.0)
    return ScalarField(grid, out)


def minimize(spec, grid, config, u_init=None, trace_file=None):
    """Alternate sigma/u half-steps until the energy decrease stalls.

    With a continuation schedule, each eps stage warm-starts from the
    previous phase field.  Emits one JSON line per outer iteration to
    trace_file when given.
    """
    spec.check_interior(grid)
    u = u_init.copy() if u_init is not None else ScalarField.ones(grid)
    trace = []
    trace_eps = []
    sigma = VectorField.zeros(grid)
    residual = 0.0
    fh = open(trace_file, "w") if trace_file else None
    try:
        for eps in config.eps_schedule():
            stage = OptimizerConfig(eps=eps, a=config.a, p=config.p, k=config.k,
                                    max_outer=config.max_outer,
                                    cg_tol=config.cg_tol, u_tol=config.u_tol)
            eta = eta_barrier(eps, config.a, grid.n, config.k)
            data = np.clip(u.data, eta, 1.0)
            data[u.boundary_mask()] = 1.0
            u = ScalarField(grid, data)
            src = SourceAdapter(spec, eps)
            f = mollified_source(src, grid) if spec.n_sources else np.zeros(grid.cells)
            prev_total = None
            for it in range(config.max_outer):
                sigma = sigma_step(u, src, stage, grid=grid, rhs=f)
                u = u_step(sigma, u, stage, eps=eps)
                eb = energy(sigma, u, eps, config.a, config.p, config.k)
                residual = float(np.sqrt(
                    ((divergence(sigma) - f) ** 2).sum() * grid.cell_volume))
                trace.append(eb)
                trace_eps.append(eps)
                if fh:
                    rec = {"iter": len(trace) - 1, "eps": eps,
                           "residual": residual}
                    rec.update(eb.as_dict())
                    fh.write(json.dumps(rec) + "\n")
                if not spec.n_sources:
                    break
                if prev_total is not None and \
                        prev_total - eb.total < config.u_tol * max(1.0, abs(eb.total)):
                    break
                prev_total = eb.total
    finally:
        if fh:
            fh.close()
    return MinimizeResult(sigma=sigma, u=u, trace=trace, trace_eps=trace_eps,
                          residual=residual, config=config)


class SourceAdapter:
    """SourceSpec view with the mollification radius of the current stage."""

    def __init__(self, spec, eps):
        self.points = spec.points
        self.weights = spec.weights
        self.eps = eps
        self.n_sources = spec.n_sources

    def check_interior(self, grid):
        from .fields import SourceSpec
        SourceSpec(self.points, self.weights, self.eps).check_interior(grid)


def mass_bound_check(result, F0, a, lam):
    """Total-variation bound on sigma implied by an energy level F0.

    Checks sum |sigma| h^n <= F0/2 + F0/(2 a (1-lam)^2) + sqrt(|O| eps F0 / lam).
    """
    if not 0.0 < lam < 1.0:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    if a <= 0:
        raise ValidationError("mass bound requires a > 0")
    grid = result.sigma.grid
    eps = result.config.eps_schedule()[-1]
    omega_vol = float(np.prod(grid.extent))
    total_mass = result.sigma.total_mass()
    bound = (F0 / 2.0 + F0 / (2.0 * a * (1.0 - lam) ** 2)
             + np.sqrt(omega_vol * eps * F0 / lam))
    return bool(total_mass <= bound)
