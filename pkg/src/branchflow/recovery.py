"""Explicit near-optimal pairs (sigma, u) for polyhedral transport plans.

For a single segment carrying mass m the flux interpolates between the
mollified line measure near the endpoints and a uniform tube plateau of
radius r_star * eps along the middle, glued by a cutoff zeta and a radial
corrector that restores the divergence exactly.  The phase field is the
optimal radial transition profile of the reduced problem, evaluated on
the distance to the segment.  Summing per segment (and taking pointwise
minima of the phase fields) covers any vertex-balanced polyhedral plan.

These pairs realize the limit energy up to a controlled surplus and act
as an executable upper-bound oracle for the grid optimizer.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.integrate import quad

from .costs import CostParams, cost_f, q_infinity, transition_energy, unit_ball_volume
from .errors import KirchhoffViolation, ValidationError
from .fields import ScalarField, SourceSpec, VectorField, eta_barrier

# Gauss-Legendre nodes/weights on [0, 1] for the mollifier line integrals
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class Segment:
    """Oriented segment carrying a constant positive multiplicity."""

    start: np.ndarray
    end: np.ndarray
    multiplicity: float

    def __post_init__(self):
        p = np.asarray(self.start, dtype=float)
        q = np.asarray(self.end, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ValidationError("segment endpoints must be vectors of equal length")
        if np.allclose(p, q):
            raise ValidationError("segment endpoints must be distinct")
        if self.multiplicity <= 0:
            raise ValidationError(f"multiplicity must be positive, got {self.multiplicity}")
        object.__setattr__(self, "start", p)
        object.__setattr__(self, "end", q)

    @property
    def length(self):
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self):
        return (self.end - self.start) / self.length


@dataclass(frozen=True)
class PolyhedralMeasure:
    """Finite union of oriented weighted segments."""

    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        self._check_intersections()

    def _check_intersections(self):
        segs = self.segments
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if _segments_overlap(segs[i], segs[j]):
                    raise ValidationError(
                        f"segments {i} and {j} intersect away from their endpoints")

    def vertices(self, decimals=9):
        """Map rounded vertex -> signed multiplicity balance (outflow +)."""
        bal = {}
        for seg in self.segments:
            for point, sign in ((seg.start, +1.0), (seg.end, -1.0)):
                key = tuple(np.round(point, decimals))
                bal[key] = bal.get(key, 0.0) + sign * seg.multiplicity
        return bal


def _segments_overlap(s1, s2, tol=1e-12):
    """True if the segments meet anywhere other than shared endpoints."""
    ends1 = (s1.start, s1.end)
    ends2 = (s2.start, s2.end)
    t, s, dist = _closest_params(s1, s2)
    if dist > tol:
        return False
    interior = tol < t < 1 - tol or tol < s < 1 - tol
    if not interior:
        return False
    # touching at a shared endpoint parameterized mid-segment still counts
    x = s1.start + t * (s1.end - s1.start)
    for e in ends1 + ends2:
        if np.linalg.norm(x - e) < tol:
            return False
    return True


def _closest_params(s1, s2):
    d1 = s1.end - s1.start
    d2 = s2.end - s2.start
    r = s1.start - s2.start
    a = d1 @ d1
    b = d1 @ d2
    c = d2 @ d2
    e = d1 @ r
    f = d2 @ r
    den = a * c - b * b
    if den < 1e-30:
        t = np.clip(-e / a, 0.0, 1.0)
    else:
        t = np.clip((b * f - c * e) / den, 0.0, 1.0)
    s = np.clip((b * t + f) / c, 0.0, 1.0)
    t = np.clip((b * s - e) / a, 0.0, 1.0)
    x1 = s1.start + t * d1
    x2 = s2.start + s * d2
    return t, s, float(np.linalg.norm(x1 - x2))


@dataclass
class RecoveryResult:
    sigma: VectorField
    u: ScalarField
    delta: float
    predicted_bound: float
    limit_value: float
    support_radius: float


def validate_kirchhoff(measure, spec, decimals=9):
    """Vertex balance check: outflow minus inflow must match the sources.

    Orientation convention matches div(m e H^1|_seg) = m (delta_start -
    delta_end): a segment starting at P contributes +m to P's balance.
    Returns a list of (vertex, balance, expected) violations.
    """
    expected = {}
    for x, c in zip(spec.points, spec.weights):
        expected[tuple(np.round(np.asarray(x, dtype=float), decimals))] = float(c)
    violations = []
    balance = measure.vertices(decimals)
    for vertex, got in balance.items():
        want = expected.get(vertex, 0.0)
        if abs(got - want) > 1e-9:
            violations.append((vertex, got, want))
    # sources that no segment touches at all are violations too
    for vertex, want in expected.items():
        if vertex not in balance and abs(want) > 1e-9:
            violations.append((vertex, 0.0, want))
    return violations


def limit_energy(measure, params, tol=1e-5):
    """Sharp transport cost: sum of f(m_j) * length_j over the segments."""

    @lru_cache(maxsize=None)
    def f_of(m):
        return cost_f(m, params, tol=tol).f_value

    return float(sum(f_of(seg.multiplicity) * seg.length
                     for seg in measure.segments))


@lru_cache(maxsize=16)
def _mollifier_norm(n):
    """Normalization of the bump exp(-1/(1-|x|^2)) on the unit ball of R^n."""
    radial, _ = quad(lambda t: t ** (n - 1) * math.exp(-1.0 / (1.0 - t * t)),
                     0.0, 1.0)
    return 1.0 / (n * unit_ball_volume(n) * radial)


def _rho(dist_sq, eps, n):
    """Normalized mollifier rho_eps evaluated at squared distances."""
    z2 = np.asarray(dist_sq, dtype=float) / eps ** 2
    out = np.zeros_like(z2)
    inside = z2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z2[inside]))
    return out * _mollifier_norm(n) / eps ** n


class OptimalProfile:
    """Radial phase profile: eta core, rescaled transition, 1 beyond r.

    The transition piece is the ring minimizer from eta at r_star out to
    1 at r/eps; its truncation radius is delta-matched so the profile
    energy exceeds the reduced-cost transition by at most O(delta).
    """

    def __init__(self, m, eps, r, delta, params, resolution=256):
        if delta <= 0:
            raise ValidationError(f"delta must be positive, got {delta}")
        if params.a <= 0:
            raise ValidationError("recovery profiles require a > 0")
        ev = cost_f(m, params)
        self.r_star = ev.r_star
        self.eta = params.a * eps ** (params.d + 1)
        if self.eta >= 1.0:
            raise ValidationError("eps too large: barrier reaches the ceiling")
        if r <= eps * self.r_star:
            raise ValidationError(
                f"outer radius r={r} must exceed r_star*eps={eps * self.r_star}")
        self.m = m
        self.eps = eps
        self.r = r
        self.delta = delta
        self.params = params
        self.transition = transition_energy(self.eta, self.r_star, r / eps,
                                            params, resolution=resolution)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones(t.shape)
        core = t <= self.r_star * self.eps
        mid = (~core) & (t < self.r)
        out[core] = self.eta
        out[mid] = self.transition(t[mid] / self.eps)
        return out


def endpoint_ramp(eta, eps, r):
    """Linear endpoint profile used when r_star < 1: eta out to sqrt(3) eps."""
    knee = math.sqrt(3.0) * eps
    rise = min(knee, max(r - knee, eps))

    def w(t):
        t = np.asarray(t, dtype=float)
        out = eta + (1.0 - eta) * np.clip((t - knee) / rise, 0.0, 1.0)
        return out

    return w


def _segment_frame(seg, n):
    e1 = seg.direction
    if n == 2:
        basis = [np.array([-e1[1], e1[0]])]
    else:
        ref = np.array([0.0, 0.0, 1.0])
        if abs(e1 @ ref) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        b2 = np.cross(e1, ref)
        b2 /= np.linalg.norm(b2)
        b3 = np.cross(e1, b2)
        basis = [b2, b3]
    return e1, basis


def _sigma_bar1(x1, s, seg, eps, n):
    """Radial profile of the mollified line measure m H^1|_I * rho_eps."""
    L = seg.length
    m = seg.multiplicity
    lo = np.maximum(0.0, x1 - eps)
    hi = np.minimum(L, x1 + eps)
    width = np.maximum(hi - lo, 0.0)
    y = lo[..., None] + width[..., None] * _GL_X
    d2 = (x1[..., None] - y) ** 2 + s[..., None] ** 2
    vals = _rho(d2, eps, n)
    return m * np.sum(vals * _GL_W, axis=-1) * width


def _theta_amplitude(m, rad, w, n):
    q = n - 1
    # core integral int_0^{rad-w} s^{q-1} ds plus cosine shoulder, times the
    # transverse sphere factor q*omega_q; rescales the plateau so the
    # cross-sectional mass is exactly m with the shoulder folded inward
    gx, gw = np.polynomial.legendre.leggauss(24)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    core = (rad - w) ** q / q
    svals = rad - w + w * gx
    sh = 0.5 * (1.0 + np.cos(np.pi * gx))
    shoulder = w * float(np.sum(svals ** (q - 1) * sh * gw))
    return m / (q * unit_ball_volume(q) * (core + shoulder))


def _theta(s, m, r_star, eps, n):
    """Tube plateau of cross-sectional mass m with a C^1 inner shoulder.

    Constant out to rad - w, cosine taper to zero at rad = r_star * eps;
    the taper keeps the discrete divergence of the assembled field O(h)
    while the support stays inside the r_star*eps tube exactly.
    """
    rad = r_star * eps
    w = 0.5 * rad
    amp = _theta_amplitude(m, rad, w, n)
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, amp)
    taper = (s > rad - w) & (s < rad)
    out[taper] = amp * 0.5 * (1.0 + np.cos(np.pi * (s[taper] - rad + w) / w))
    out[s >= rad] = 0.0
    return out


def _zeta_and_slope(x1, L, scale):
    """Endpoint cutoff: 1 within `scale` of an endpoint, 0 in the middle.

    C^1 smoothstep transition on [scale, 2 scale]; a kinked cutoff leaves
    O(1) divergence spikes on the transition-edge cell planes.
    """
    z = np.ones_like(x1)
    slope = np.zeros_like(x1)
    middle = (x1 >= 2 * scale) & (x1 <= L - 2 * scale)
    z[middle] = 0.0
    down = (x1 > scale) & (x1 < 2 * scale)
    t = x1[down] / scale - 1.0
    z[down] = 1.0 - t * t * (3.0 - 2.0 * t)
    slope[down] = -6.0 * t * (1.0 - t) / scale
    up = (x1 > L - 2 * scale) & (x1 < L - scale)
    t = (L - x1[up]) / scale - 1.0
    z[up] = 1.0 - t * t * (3.0 - 2.0 * t)
    slope[up] = 6.0 * t * (1.0 - t) / scale
    return z, slope


def _flux_deficit(x1, s, seg, eps, r_star, n, quad_pts=24):
    """J(x1, s) = int_0^s tau^{n-2} [sigma_bar1 - theta] dtau.

    The integrand jumps at the tube radius and vanishes beyond eps, so the
    quadrature is applied piecewise on [0, r_star*eps], [r_star*eps, eps]
    and clipped there; J is identically zero for s >= eps.
    """
    gx, gw = np.polynomial.legendre.leggauss(quad_pts)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    top = max(r_star, 1.0) * eps
    breaks = sorted({0.0, 0.5 * r_star * eps, r_star * eps, eps, top})
    out = np.zeros_like(s)
    s_eff = np.minimum(s, top)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        a = np.minimum(s_eff, lo)
        b = np.minimum(s_eff, hi)
        width = b - a
        tau = a[..., None] + width[..., None] * gx
        sb = _sigma_bar1(np.broadcast_to(x1[..., None], tau.shape).reshape(-1),
                         tau.reshape(-1), seg, eps, n).reshape(tau.shape)
        th = _theta(tau, seg.multiplicity, r_star, eps, n)
        integrand = tau ** (n - 2) * (sb - th)
        out += width * np.sum(integrand * gw, axis=-1)
    return out


def build_segment_recovery(seg, eps, delta, params, grid, resolution=256,
                           tube_radius=None, bound_slope=10.0):
    """Assemble the near-optimal pair for one segment on a staggered grid.

    The flux is zeta * sigma1 + (1 - zeta) * sigma2 + sigma3 with sigma1
    the mollified line measure, sigma2 the tube plateau and sigma3 the
    radial corrector cancelling the interpolation divergence; the phase
    field is the optimal radial profile of the distance to the segment
    (min-ed with endpoint ramps when r_star < 1).
    """
    n = grid.n
    if params.d != n - 1:
        raise ValidationError(
            f"recovery for 1-currents needs d = n-1 = {n - 1}, got {params.d}")
    if eps < 2.0 * max(grid.h):
        raise ValidationError(f"eps={eps} under-resolved on h={max(grid.h)}")
    margin = _segment_margin(seg, grid)
    profile_r = tube_radius if tube_radius is not None else min(margin, 8.0 * eps)
    if profile_r <= eps:
        raise ValidationError(
            "segment too close to the boundary for the requested eps")
    profile = OptimalProfile(seg.multiplicity, eps, profile_r, delta, params,
                             resolution=resolution)
    r_star = profile.r_star
    scale = max(r_star, 1.0) * eps
    if 4.0 * scale >= seg.length:
        raise ValidationError("segment shorter than the endpoint cutoff zones")
    e1, basis = _segment_frame(seg, n)
    L = seg.length

    sigma = VectorField.zeros(grid)
    for ax in range(n):
        mesh = grid.face_mesh(ax)
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        rel = pts - seg.start
        x1 = rel @ e1
        xp = rel - np.outer(x1, e1)
        s = np.linalg.norm(xp, axis=-1)
        relevant = (x1 > -eps) & (x1 < L + eps) & (s < scale + eps)
        comp = np.zeros(x1.shape)
        if np.any(relevant):
            x1r = x1[relevant]
            sr = s[relevant]
            zeta, slope = _zeta_and_slope(x1r, L, scale)
            par = np.zeros_like(x1r)
            need1 = zeta > 0.0
            if np.any(need1):
                par[need1] = zeta[need1] * _sigma_bar1(x1r[need1], sr[need1],
                                                       seg, eps, n)
            par += (1.0 - zeta) * _theta(sr, seg.multiplicity, r_star, eps, n)
            axis_unit = np.zeros(n)
            axis_unit[ax] = 1.0
            comp_r = par * (e1 @ axis_unit)
            corr = slope != 0.0
            if np.any(corr):
                J = _flux_deficit(x1r[corr], sr[corr], seg, eps, r_star, n)
                sc = np.maximum(sr[corr], 1e-30)
                radial = -slope[corr] * J / sc ** (n - 1)
                trans_dot = xp[relevant][corr] @ axis_unit
                comp_r[corr] += radial * trans_dot
            comp[relevant] = comp_r
        sigma.components[ax] = comp.reshape(grid.face_shape(ax))
    sigma.enforce_boundary()

    centers = grid.center_mesh()
    pts = np.stack([m.ravel() for m in centers], axis=-1)
    rel = pts - seg.start
    x1 = rel @ e1
    xp = rel - np.outer(x1, e1)
    s = np.linalg.norm(xp, axis=-1)
    dist = np.sqrt(np.clip(x1 - L, 0.0, None) ** 2
                   + np.clip(-x1, 0.0, None) ** 2 + s ** 2)
    uvals = profile(dist)
    if r_star < 1.0:
        w = endpoint_ramp(profile.eta, eps, profile_r)
        for endpoint in (seg.start, seg.end):
            de = np.linalg.norm(pts - endpoint, axis=-1)
            uvals = np.minimum(uvals, w(de))
    u = ScalarField(grid, uvals.reshape(grid.cells))
    u.data[u.boundary_mask()] = 1.0

    limit = cost_f(seg.multiplicity, params).f_value * L
    return RecoveryResult(sigma=sigma, u=u, delta=delta,
                          predicted_bound=limit + bound_slope * delta,
                          limit_value=limit,
                          support_radius=scale)


def mass_fraction_near(sigma, measure, radius):
    """Fraction of the discrete mass of |sigma| within `radius` of the plan."""
    grid = sigma.grid
    centers = grid.center_mesh()
    pts = np.stack([m.ravel() for m in centers], axis=-1)
    dist = np.full(pts.shape[0], np.inf)
    for seg in measure.segments:
        rel = pts - seg.start
        x1 = np.clip(rel @ seg.direction, 0.0, seg.length)
        foot = seg.start + x1[:, None] * seg.direction
        dist = np.minimum(dist, np.linalg.norm(pts - foot, axis=-1))
    mass = sigma.center_magnitude().ravel()
    total = mass.sum()
    if total == 0.0:
        return 1.0
    return float(mass[dist <= radius].sum() / total)


def _segment_margin(seg, grid):
    lo = np.zeros(grid.n)
    hi = np.asarray(grid.extent)
    m = np.inf
    for x in (seg.start, seg.end):
        m = min(m, (x - lo).min(), (hi - x).min())
    return float(m)


def endpoint_sources(measure, eps):
    """SourceSpec induced by a polyhedral measure's vertex balances."""
    bal = measure.vertices()
    points = []
    weights = []
    for vertex, c in bal.items():
        if abs(c) > 1e-12:
            points.append(vertex)
            weights.append(c)
    if not points:
        raise ValidationError("measure carries no net endpoint sources")
    return SourceSpec(np.array(points), np.array(weights), eps)


def build_polyhedral_recovery(measure, spec, eps, delta, params, grid,
                              resolution=256, tube_radius=None):
    """Sum per-segment fluxes and take the pointwise minimum phase field."""
    violations = validate_kirchhoff(measure, spec)
    if violations:
        raise KirchhoffViolation(f"vertex balance violated at {violations}")
    sigma = VectorField.zeros(grid)
    u = ScalarField.ones(grid)
    predicted = 0.0
    limit = 0.0
    delta_out = delta
    radius = 0.0
    for seg in measure.segments:
        part = build_segment_recovery(seg, eps, delta, params, grid,
                                      resolution=resolution,
                                      tube_radius=tube_radius)
        for ax in range(grid.n):
            sigma.components[ax] += part.sigma.components[ax]
        u.data = np.minimum(u.data, part.u.data)
        predicted += part.predicted_bound
        limit += part.limit_value
        radius = max(radius, part.support_radius)
    sigma.enforce_boundary()
    u.data[u.boundary_mask()] = 1.0
    return RecoveryResult(sigma=sigma, u=u, delta=delta_out,
                          predicted_bound=predicted, limit_value=limit,
                          support_radius=radius)
