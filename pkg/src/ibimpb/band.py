"""Narrowband extraction: projections, normals and quadrature weights.

Surface integrals are evaluated as Riemann sums over the grid nodes
within distance eps of the surface,

    S[f] = h^3 * sum_i f(x_i*) * w_i,      w_i = delta_eps(d_i) * J_i,

where x_i* is the closest-point projection of node x_i.  The gradient
entering the projection is the WENO pair average, normalized to unit
length so that first-order reinitialization residue does not leak into
the normals.  J is 1 by default; the full curvature-corrected Jacobian
is available for accuracy studies.
"""

from dataclasses import dataclass

import numpy as np

from .backend import core
from .errors import DegenerateGradientError
from .grid import fill_ghost_neumann

__all__ = ["Narrowband", "delta_eps", "extract", "jacobian_full",
           "surface_integral", "write_band_csv"]


def delta_eps(eta, eps):
    """Cosine bump of unit mass and vanishing first moment on [-eps, eps]."""
    eta = np.asarray(eta, dtype=float)
    out = np.where(np.abs(eta) < eps,
                   (0.5 / eps) * (1.0 + np.cos(np.pi * eta / eps)),
                   0.0)
    return out if out.ndim else float(out)


@dataclass
class Narrowband:
    """Nodes of the band in deterministic (row-major grid) order.

    Arrays are parallel: ``indices`` (n,3) int grid indices, ``pos``
    (n,3) node positions, ``dist`` (n,), ``proj`` (n,3) closest surface
    points, ``normal`` (n,3) outward unit normals, ``weight`` (n,)
    quadrature factors delta_eps(d)*J.
    """

    indices: np.ndarray
    pos: np.ndarray
    dist: np.ndarray
    proj: np.ndarray
    normal: np.ndarray
    weight: np.ndarray
    eps: float
    h: float

    def __len__(self):
        return self.dist.shape[0]

    @property
    def dof(self):
        """Stacked unknown count of the two-density system."""
        return 2 * len(self)

    @property
    def cell_volume(self):
        return self.h ** 3


def extract(sdf, jacobian="one", nthreads=1):
    """Collect every node with |phi| < eps into a Narrowband."""
    f = sdf.field
    grid = f.grid
    eps = sdf.eps
    fill_ghost_neumann(f)
    vals = f.interior
    mask = np.abs(vals) < eps
    # row-major order keeps runs bit-for-bit reproducible
    idx = np.argwhere(mask)
    if idx.shape[0] == 0:
        raise DegenerateGradientError("narrowband is empty; no surface found")
    d = vals[mask]

    gx, gy, gz = (np.asarray(a) for a in
                  core.weno_gradient(f.data, grid.ghost, grid.h, nthreads))
    grad = np.stack([gx[mask], gy[mask], gz[mask]], axis=1)
    gnorm = np.sqrt(np.einsum("ij,ij->i", grad, grad))
    if np.any(gnorm < 0.5):
        raise DegenerateGradientError(
            "|grad phi| < 0.5 on a band node; reinitialization failed")
    normal = grad / gnorm[:, None]

    pos = grid.positions(idx)
    proj = pos - d[:, None] * normal

    if jacobian == "one":
        jac = np.ones_like(d)
    elif jacobian == "full":
        jac = jacobian_full(sdf, idx)
    else:
        raise ValueError(f"unknown jacobian mode {jacobian!r}")
    weight = delta_eps(d, eps) * jac

    return Narrowband(indices=idx, pos=pos, dist=d, proj=proj,
                      normal=normal, weight=weight, eps=eps, h=grid.h)


def jacobian_full(sdf, idx=None):
    """J = 1 - d*Lap(d) + d^2 <grad d, Hess(d) grad d> by central differences.

    Co-area factor between the surface and the level set through each
    node; equals 1 on the surface and for planes.
    """
    f = sdf.field
    g = f.grid.ghost
    h = f.grid.h
    fill_ghost_neumann(f)
    data = f.data
    if idx is None:
        idx = np.argwhere(np.abs(f.interior) < sdf.eps)
    p = idx + g
    i, j, k = p[:, 0], p[:, 1], p[:, 2]

    c = data[i, j, k]
    xp, xm = data[i + 1, j, k], data[i - 1, j, k]
    yp, ym = data[i, j + 1, k], data[i, j - 1, k]
    zp, zm = data[i, j, k + 1], data[i, j, k - 1]

    gx = (xp - xm) / (2 * h)
    gy = (yp - ym) / (2 * h)
    gz = (zp - zm) / (2 * h)
    hxx = (xp - 2 * c + xm) / h ** 2
    hyy = (yp - 2 * c + ym) / h ** 2
    hzz = (zp - 2 * c + zm) / h ** 2
    hxy = (data[i + 1, j + 1, k] - data[i + 1, j - 1, k]
           - data[i - 1, j + 1, k] + data[i - 1, j - 1, k]) / (4 * h ** 2)
    hxz = (data[i + 1, j, k + 1] - data[i + 1, j, k - 1]
           - data[i - 1, j, k + 1] + data[i - 1, j, k - 1]) / (4 * h ** 2)
    hyz = (data[i, j + 1, k + 1] - data[i, j + 1, k - 1]
           - data[i, j - 1, k + 1] + data[i, j - 1, k - 1]) / (4 * h ** 2)

    lap = hxx + hyy + hzz
    quad = (gx * (hxx * gx + hxy * gy + hxz * gz)
            + gy * (hxy * gx + hyy * gy + hyz * gz)
            + gz * (hxz * gx + hyz * gy + hzz * gz))
    d = c
    return 1.0 - d * lap + d * d * quad


def surface_integral(band, values):
    """h^3-weighted band quadrature of nodewise values f(x_i*)."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite integrand on the narrowband")
    return band.cell_volume * float(np.dot(values, band.weight))


def write_band_csv(band, stream):
    stream.write("i,j,k,x,y,z,dist,px,py,pz,nx,ny,nz,weight\n")
    for r in range(len(band)):
        stream.write("%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                     "%.17g,%.17g,%.17g,%.17g\n"
                     % (band.indices[r, 0], band.indices[r, 1], band.indices[r, 2],
                        band.pos[r, 0], band.pos[r, 1], band.pos[r, 2],
                        band.dist[r],
                        band.proj[r, 0], band.proj[r, 1], band.proj[r, 2],
                        band.normal[r, 0], band.normal[r, 1], band.normal[r, 2],
                        band.weight[r]))
