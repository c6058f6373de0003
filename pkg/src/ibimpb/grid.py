"""Uniform Cartesian grid container and finite-difference stencils.

Fields are stored as padded arrays with ``ghost`` layers on every side
(ghost >= 3, enough for the seven-point WENO5 line stencil).  Ghost
values realize a zero Neumann condition by copying the nearest interior
value along each axis.

Full-grid sweeps (WENO pairs, Godunov Hamiltonians) are delegated to the
active core backend; the single-node operations here are the readable
reference used by callers that touch a handful of nodes and by the
tests that pin down stencil behavior.
"""

from dataclasses import dataclass

import numpy as np

from .backend import core
from .errors import ValidationError


@dataclass(frozen=True)
class Grid:
    """Node lattice ``origin + index * h`` with ``dims`` nodes per axis."""

    origin: tuple
    h: float
    dims: tuple
    ghost: int = 3

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValidationError("grid spacing must be positive")
        if any(d < 8 for d in self.dims):
            raise ValidationError("grid needs at least 8 nodes per axis")
        if self.ghost < 3:
            raise ValidationError("ghost layer must be >= 3 for WENO5")

    @property
    def shape(self):
        return tuple(self.dims)

    @property
    def padded_shape(self):
        return tuple(d + 2 * self.ghost for d in self.dims)

    def axis_coords(self, axis):
        return self.origin[axis] + self.h * np.arange(self.dims[axis])

    def node_position(self, index):
        return np.asarray(self.origin, dtype=float) + self.h * np.asarray(index, dtype=float)

    def positions(self, indices):
        """Positions of an (n, 3) integer index array."""
        return np.asarray(self.origin, dtype=float)[None, :] + self.h * np.asarray(indices, dtype=float)


class GridField:
    """Scalar field on a Grid, padded with ghost layers."""

    def __init__(self, grid, fill=0.0):
        self.grid = grid
        self.data = np.full(grid.padded_shape, fill, dtype=np.float64)

    @property
    def interior(self):
        g = self.grid.ghost
        return self.data[g:-g, g:-g, g:-g]

    def copy(self):
        out = GridField.__new__(GridField)
        out.grid = self.grid
        out.data = self.data.copy()
        return out

    @classmethod
    def from_interior(cls, grid, values):
        f = cls(grid)
        f.interior[...] = values
        fill_ghost_neumann(f)
        return f

    @classmethod
    def from_function(cls, grid, fn):
        xs = [grid.axis_coords(a) for a in range(3)]
        X, Y, Z = np.meshgrid(*xs, indexing="ij", sparse=True)
        return cls.from_interior(grid, fn(X, Y, Z))


def fill_ghost_neumann(f):
    """Copy-extend the nearest interior value into the ghost layers.

    Axis-by-axis sweeps also populate edge/corner ghosts consistently.
    """
    g = f.grid.ghost
    d = f.data
    for axis in range(3):
        idx_lo = [slice(None)] * 3
        idx_hi = [slice(None)] * 3
        src_lo = [slice(None)] * 3
        src_hi = [slice(None)] * 3
        for k in range(g):
            idx_lo[axis] = k
            src_lo[axis] = g
            idx_hi[axis] = d.shape[axis] - 1 - k
            src_hi[axis] = d.shape[axis] - 1 - g
            d[tuple(idx_lo)] = d[tuple(src_lo)]
            d[tuple(idx_hi)] = d[tuple(src_hi)]
    return f


# ---------------------------------------------------------------------------
# Single-node reference stencils
# ---------------------------------------------------------------------------


def _weno5_scalar(v1, v2, v3, v4, v5):
    s1 = (13.0 / 12.0) * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = (13.0 / 12.0) * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = (13.0 / 12.0) * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    eps = 1e-6 * max(v1 * v1, v2 * v2, v3 * v3, v4 * v4, v5 * v5) + 1e-99
    a1 = 0.1 / (s1 + eps) ** 2
    a2 = 0.6 / (s2 + eps) ** 2
    a3 = 0.3 / (s3 + eps) ** 2
    c1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    c2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    c3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    return (a1 * c1 + a2 * c2 + a3 * c3) / (a1 + a2 + a3)


def weno5_derivative_pair(f, node, axis):
    """Left/right biased WENO5 approximations of d(f)/d(axis) at a node."""
    g = f.grid.ghost
    h = f.grid.h
    idx = [node[0] + g, node[1] + g, node[2] + g]
    line = []
    for off in range(-3, 4):
        p = list(idx)
        p[axis] += off
        line.append(f.data[tuple(p)])
    d = [(line[k + 1] - line[k]) / h for k in range(6)]
    pm = _weno5_scalar(d[0], d[1], d[2], d[3], d[4])
    pp = _weno5_scalar(d[5], d[4], d[3], d[2], d[1])
    return pm, pp


def central_gradient(f, node):
    """Second-order centered gradient at a node."""
    g = f.grid.ghost
    h = f.grid.h
    idx = [node[0] + g, node[1] + g, node[2] + g]
    out = np.empty(3)
    for axis in range(3):
        hi = list(idx)
        lo = list(idx)
        hi[axis] += 1
        lo[axis] -= 1
        out[axis] = (f.data[tuple(hi)] - f.data[tuple(lo)]) / (2.0 * h)
    return out


def godunov_eikonal_hamiltonian(f, node, sign):
    """Godunov-upwinded |grad f| at a node.

    ``sign=+1`` selects the combination for a front advancing along the
    outward normal; ``sign=-1`` the mirrored one (used by the inward
    eikonal flow).
    """
    acc = 0.0
    for axis in range(3):
        pm, pp = weno5_derivative_pair(f, node, axis)
        if sign > 0:
            acc += max(max(pm, 0.0) ** 2, min(pp, 0.0) ** 2)
        else:
            acc += max(min(pm, 0.0) ** 2, max(pp, 0.0) ** 2)
    return np.sqrt(acc)


# ---------------------------------------------------------------------------
# Full-grid sweeps (backend delegated)
# ---------------------------------------------------------------------------


def weno_gradient_field(f, nthreads=1):
    """(pm+pp)/2 WENO gradient on the whole interior, one array per axis."""
    return core.weno_gradient(f.data, f.grid.ghost, f.grid.h, nthreads)


def flow_rhs_field(f, nthreads=1):
    return core.hj_flow_rhs(f.data, f.grid.ghost, f.grid.h, nthreads)


def reinit_rhs_field(f, sgn, nthreads=1):
    return core.hj_reinit_rhs(f.data, sgn, f.grid.ghost, f.grid.h, nthreads)


# ---------------------------------------------------------------------------
# Sampling and export
# ---------------------------------------------------------------------------


def sample_trilinear(f, points):
    """Trilinear interpolation of the field at physical points (n, 3)."""
    grid = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = (pts - np.asarray(grid.origin)[None, :]) / grid.h
    i0 = np.floor(u).astype(np.int64)
    i0 = np.clip(i0, 0, np.asarray(grid.dims) - 2)
    t = u - i0
    g = grid.ghost
    vals = np.zeros(len(pts))
    for dx in (0, 1):
        wx = (1.0 - t[:, 0]) if dx == 0 else t[:, 0]
        for dy in (0, 1):
            wy = (1.0 - t[:, 1]) if dy == 0 else t[:, 1]
            for dz in (0, 1):
                wz = (1.0 - t[:, 2]) if dz == 0 else t[:, 2]
                vals += (wx * wy * wz
                         * f.data[i0[:, 0] + dx + g, i0[:, 1] + dy + g, i0[:, 2] + dz + g])
    return vals if vals.shape[0] > 1 else float(vals[0])


def write_vtk(f, path, name="field"):
    """Dump the interior as legacy-VTK structured points (ASCII)."""
    grid = f.grid
    nx, ny, nz = grid.dims
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write(f"ORIGIN {grid.origin[0]:.17g} {grid.origin[1]:.17g} {grid.origin[2]:.17g}\n")
        fh.write(f"SPACING {grid.h:.17g} {grid.h:.17g} {grid.h:.17g}\n")
        fh.write(f"POINT_DATA {nx * ny * nz}\n")
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        # VTK structured points run x fastest
        vals = np.transpose(f.interior, (2, 1, 0)).ravel()
        for v in vals:
            fh.write(f"{v:.9g}\n")
