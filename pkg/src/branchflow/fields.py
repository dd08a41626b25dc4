"""Staggered-grid fields on a box and the diffuse transport energy.

The phase field u lives at cell centers with values in [eta, 1] and is
pinned to 1 on the boundary ring of cells; the flux sigma lives on cell
faces (MAC layout) with zero normal component on the box boundary, so the
conservative face-difference divergence telescopes to zero total mass.

The energy of a pair (sigma, u) is

    eps^{p-n+k} |grad u|^p  +  (1-u)^2 / eps^{n-k}  +  u |sigma|^2 / eps

integrated by midpoint rule.  The gradient magnitude is formed from face
differences averaged to centers; the mass term is quadratured on faces
(with arithmetically averaged u) so that both halves of the alternating
scheme in `solver` descend the very same discrete energy.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def eta_barrier(eps, a, n, k=1):
    """Lower barrier for the phase field: a * eps^(n-k+1)."""
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if a < 0:
        raise ValidationError(f"a must be >= 0, got {a}")
    if not 1 <= k <= n - 1:
        raise ValidationError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    return a * eps ** (n - k + 1)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box [0, extent] discretized into uniform cells."""

    extent: tuple
    cells: tuple

    def __post_init__(self):
        extent = tuple(float(e) for e in self.extent)
        cells = tuple(int(c) for c in self.cells)
        if len(extent) != len(cells):
            raise ValidationError("extent and cells must have equal length")
        if len(cells) not in (2, 3):
            raise ValidationError(f"ambient dimension must be 2 or 3, got {len(cells)}")
        if any(c < 8 for c in cells):
            raise ValidationError(f"need >= 8 cells per axis, got {cells}")
        if any(e <= 0 for e in extent):
            raise ValidationError(f"extent must be positive, got {extent}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    def centers(self, axis):
        h = self.h[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def center_mesh(self):
        """Cell-center coordinate arrays, shaped like the cell grid."""
        axes = [self.centers(i) for i in range(self.n)]
        return np.meshgrid(*axes, indexing="ij")

    def face_mesh(self, axis):
        """Coordinate arrays at the face centers orthogonal to `axis`."""
        coords = []
        for i in range(self.n):
            h = self.h[i]
            if i == axis:
                coords.append(np.arange(self.cells[i] + 1) * h)
            else:
                coords.append((np.arange(self.cells[i]) + 0.5) * h)
        return np.meshgrid(*coords, indexing="ij")

    def face_shape(self, axis):
        return tuple(c + 1 if i == axis else c
                     for i, c in enumerate(self.cells))


@dataclass
class ScalarField:
    """Cell-centered phase field with boundary trace 1."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.cells:
            raise ValidationError(
                f"data shape {self.data.shape} does not match grid {self.grid.cells}")

    @classmethod
    def ones(cls, grid):
        return cls(grid, np.ones(grid.cells))

    def boundary_mask(self):
        mask = np.zeros(self.grid.cells, dtype=bool)
        for ax in range(self.grid.n):
            sl = [slice(None)] * self.grid.n
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
        return mask

    def check(self, eta=0.0):
        if self.data.min() < eta - 1e-12 or self.data.max() > 1.0 + 1e-12:
            raise ValidationError(
                f"u out of [eta, 1]: range [{self.data.min()}, {self.data.max()}], eta={eta}")
        if not np.allclose(self.data[self.boundary_mask()], 1.0, atol=1e-12):
            raise ValidationError("u must equal 1 on the boundary cell ring")

    def copy(self):
        return ScalarField(self.grid, self.data.copy())


@dataclass
class VectorField:
    """Face-staggered flux with zero normal component on the boundary."""

    grid: GridSpec
    components: list

    def __post_init__(self):
        comps = []
        for ax, c in enumerate(self.components):
            c = np.asarray(c, dtype=float)
            if c.shape != self.grid.face_shape(ax):
                raise ValidationError(
                    f"component {ax} shape {c.shape} != {self.grid.face_shape(ax)}")
            comps.append(c)
        if len(comps) != self.grid.n:
            raise ValidationError("one component per axis required")
        self.components = comps

    @classmethod
    def zeros(cls, grid):
        return cls(grid, [np.zeros(grid.face_shape(ax)) for ax in range(grid.n)])

    def enforce_boundary(self):
        for ax, c in enumerate(self.components):
            sl = [slice(None)] * self.grid.n
            sl[ax] = 0
            c[tuple(sl)] = 0.0
            sl[ax] = -1
            c[tuple(sl)] = 0.0

    def check(self):
        for ax, c in enumerate(self.components):
            sl = [slice(None)] * self.grid.n
            for end in (0, -1):
                sl[ax] = end
                if not np.allclose(c[tuple(sl)], 0.0, atol=1e-12):
                    raise ValidationError(
                        f"nonzero normal flux on boundary faces of axis {ax}")

    def center_components(self):
        """Average the two faces of every cell; one array per axis."""
        out = []
        for ax, c in enumerate(self.components):
            lo = [slice(None)] * self.grid.n
            hi = [slice(None)] * self.grid.n
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            out.append(0.5 * (c[tuple(lo)] + c[tuple(hi)]))
        return out

    def center_magnitude(self):
        comps = self.center_components()
        return np.sqrt(sum(c ** 2 for c in comps))

    def total_mass(self):
        """Discrete integral of |sigma| over the box (center magnitudes)."""
        return float(self.center_magnitude().sum() * self.grid.cell_volume)

    def copy(self):
        return VectorField(self.grid, [c.copy() for c in self.components])


@dataclass(frozen=True)
class SourceSpec:
    """Balanced point sources with a common mollification radius."""

    points: np.ndarray
    weights: np.ndarray
    eps: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        wts = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != wts.shape[0]:
            raise ValidationError("points and weights must have equal length")
        if wts.size and abs(wts.sum()) > 1e-12 * max(1.0, np.abs(wts).max()):
            raise ValidationError(f"weights must sum to zero, got {wts.sum()}")
        if self.eps <= 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def n_sources(self):
        return self.weights.size

    def check_interior(self, grid):
        for x in self.points:
            if x.shape[0] != grid.n:
                raise ValidationError("source point dimension does not match grid")
            for ax in range(grid.n):
                if not (self.eps <= x[ax] <= grid.extent[ax] - self.eps):
                    raise ValidationError(
                        f"source ball B({tuple(x)}, {self.eps}) leaves the domain")


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_term: float
    potential_term: float
    mass_term: float

    @property
    def total(self):
        return self.gradient_term + self.potential_term + self.mass_term

    def as_dict(self):
        return {"gradient_term": self.gradient_term,
                "potential_term": self.potential_term,
                "mass_term": self.mass_term,
                "total": self.total}


def bump_kernel(dist, eps):
    """Compactly supported radial bump exp(-1/(1 - (r/eps)^2)), unnormalized."""
    z = np.asarray(dist, dtype=float) / eps
    out = np.zeros_like(z)
    inside = z < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def mollified_source(spec, grid):
    """Sample sum_j c_j rho_eps(x - x_j) at cell centers.

    Each source bump is rescaled so its discrete cell-sum integral equals
    c_j exactly; the total discrete mass is then zero to rounding.
    """
    spec.check_interior(grid)
    hmax = max(grid.h)
    if spec.eps < 2.0 * hmax:
        raise ValidationError(
            f"eps under-resolved: eps={spec.eps} < 2h={2.0 * hmax}")
    mesh = grid.center_mesh()
    f = np.zeros(grid.cells)
    vol = grid.cell_volume
    for x, c in zip(spec.points, spec.weights):
        dist = np.sqrt(sum((m - xi) ** 2 for m, xi in zip(mesh, x)))
        kern = bump_kernel(dist, spec.eps)
        s = kern.sum() * vol
        if s <= 0:
            raise ValidationError(f"source at {tuple(x)} not seen by any cell")
        f += (c / s) * kern
    return f


def divergence(sigma):
    """Conservative face-difference divergence at cell centers."""
    grid = sigma.grid
    div = np.zeros(grid.cells)
    for ax, c in enumerate(sigma.components):
        div += np.diff(c, axis=ax) / grid.h[ax]
    return div


def divergence_residual(sigma, spec):
    """L2 norm of div(sigma) minus the mollified source field."""
    f = mollified_source(spec, sigma.grid)
    r = divergence(sigma) - f
    return float(np.sqrt((r ** 2).sum() * sigma.grid.cell_volume))


def grad_magnitude_sq(u, grid):
    """|grad u|^2 at centers from face differences averaged to centers."""
    total = np.zeros(grid.cells)
    for ax in range(grid.n):
        df = np.diff(u, axis=ax) / grid.h[ax]
        g = np.zeros(grid.cells)
        first = [slice(None)] * grid.n
        last = [slice(None)] * grid.n
        inner = [slice(None)] * grid.n
        first[ax] = slice(0, 1)
        last[ax] = slice(-1, None)
        inner[ax] = slice(1, -1)
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        g[tuple(first)] = df[tuple(first)]
        g[tuple(last)] = df[tuple(last)]
        g[tuple(inner)] = 0.5 * (df[tuple(lo)] + df[tuple(hi)])
        total += g ** 2
    return total


def face_mean(u, grid, axis):
    """Arithmetic mean of u onto the interior faces of one axis."""
    lo = [slice(None)] * grid.n
    hi = [slice(None)] * grid.n
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (u[tuple(lo)] + u[tuple(hi)])


def mass_term_value(sigma, u, eps):
    """Face-quadrature of u |sigma|^2 / eps (interior faces only)."""
    grid = sigma.grid
    vol = grid.cell_volume
    total = 0.0
    for ax, c in enumerate(sigma.components):
        ubar = face_mean(u, grid, ax)
        sl = [slice(None)] * grid.n
        sl[ax] = slice(1, -1)
        total += float(np.sum(ubar * c[tuple(sl)] ** 2)) * vol
    return total / eps


def energy(sigma, u, eps, a, p, k=1):
    """EnergyBreakdown of the diffuse functional for a pair (sigma, u)."""
    grid = u.grid
    if sigma.grid != grid:
        raise ValidationError("sigma and u live on different grids")
    n = grid.n
    eta = eta_barrier(eps, a, n, k)
    # range check only: constant test fields need not carry the boundary trace
    if u.data.min() < eta - 1e-12 or u.data.max() > 1.0 + 1e-12:
        raise ValidationError(
            f"u out of [eta, 1]: range [{u.data.min()}, {u.data.max()}], eta={eta}")
    vol = grid.cell_volume
    g2 = grad_magnitude_sq(u.data, grid)
    grad_term = eps ** (p - n + k) * float(np.sum(g2 ** (p / 2.0))) * vol
    pot_term = float(np.sum((1.0 - u.data) ** 2)) * vol / eps ** (n - k)
    mass = mass_term_value(sigma, u.data, eps)
    return EnergyBreakdown(grad_term, pot_term, mass)
