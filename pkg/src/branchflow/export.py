"""Legacy-ASCII VTK and flat-CSV exporters for grid fields.

Cell-centered data is written as STRUCTURED_POINTS point data located at
the cell centers (origin shifted by h/2); 2-D grids are written as a
single z-slab with zero third vector component.
"""

import numpy as np


def _pad3(values, fill):
    vals = list(values)
    while len(vals) < 3:
        vals.append(fill)
    return vals


def write_vtk(path, grid, scalars=None, vectors=None, title="branchflow fields"):
    """Write cell-centered fields to a legacy VTK structured-points file.

    scalars: dict name -> cell array; vectors: dict name -> VectorField
    (sampled to centers) or list of per-axis center arrays.
    """
    dims = _pad3(grid.cells, 1)
    spacing = _pad3(grid.h, 1.0)
    origin = _pad3([h / 2.0 for h in grid.h], 0.0)
    npoints = int(np.prod(dims))
    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % tuple(dims),
        "ORIGIN %.12g %.12g %.12g" % tuple(origin),
        "SPACING %.12g %.12g %.12g" % tuple(spacing),
        "POINT_DATA %d" % npoints,
    ]
    for name, data in (scalars or {}).items():
        lines.append("SCALARS %s double 1" % name)
        lines.append("LOOKUP_TABLE default")
        # VTK expects x fastest: Fortran-order flatten of [ix, iy, iz]
        lines.extend("%.12g" % v for v in np.asarray(data).ravel(order="F"))
    for name, vec in (vectors or {}).items():
        comps = vec.center_components() if hasattr(vec, "center_components") else vec
        comps = [np.asarray(c).ravel(order="F") for c in comps]
        while len(comps) < 3:
            comps.append(np.zeros_like(comps[0]))
        lines.append("VECTORS %s double" % name)
        lines.extend("%.12g %.12g %.12g" % (a, b, c)
                     for a, b, c in zip(*comps))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_csv_field(path, grid, columns):
    """Flat CSV of cell-centered arrays: index, coordinates, values."""
    mesh = grid.center_mesh()
    n = grid.n
    header = ["index"] + ["xyz"[i] for i in range(n)] + list(columns.keys())
    coord_cols = [m.ravel(order="C") for m in mesh]
    data_cols = [np.asarray(v).ravel(order="C") for v in columns.values()]
    lines = [",".join(header)]
    for idx in range(coord_cols[0].size):
        row = [str(idx)]
        row += ["%.12g" % c[idx] for c in coord_cols]
        row += ["%.12g" % c[idx] for c in data_cols]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_profile_csv(path, profile):
    """CSV of a radial transition profile: t, v."""
    lines = ["t,v"]
    lines.extend("%.12g,%.12g" % (t, v)
                 for t, v in zip(profile.radii, profile.values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
