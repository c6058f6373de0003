"""Surface area, reaction potentials, polarization energy and benchmarks.

Internal units are rationalized Gaussian-style: lengths in Angstrom,
charges in elementary charges, and the potential of a point charge q at
distance r in dielectric eps is q/(4 pi eps r).  Energies therefore
come out in e^2/(4 pi Angstrom); converting to kcal/mol multiplies by
4 pi (to undo the rationalization) times the conventional Coulomb
constant 332.0637 kcal mol^-1 A e^-2.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .band import surface_integral
from .kernels import FOUR_PI

KCAL_MOL_PER_E2_ANG = 332.0637


def energy_to_kcal_mol(e_internal, coulomb_constant=KCAL_MOL_PER_E2_ANG):
    return e_internal * FOUR_PI * coulomb_constant


@dataclass
class EnergyReport:
    area: float
    g_pol: float                    # internal units
    g_pol_kcal_mol: float
    psi_rxn: np.ndarray             # per atom, internal units
    errors: dict = field(default_factory=dict)


def surface_area(band):
    """Band quadrature of 1."""
    return surface_integral(band, np.ones(len(band)))


def _reaction_kernel_rows(z, band, diel):
    """Rows of the reaction-field integrand at one interior point.

    f(z, y*) = (eE/eI dGk/dn(y*) - dG0/dn(y*)) psi + (G0 - Gk) psi_n;
    z stays away from the band, so no regularization is involved.
    """
    dx = z[None, :] - band.proj
    r2 = np.einsum("ij,ij->i", dx, dx)
    r = np.sqrt(r2)
    nydd = np.einsum("ij,ij->i", band.normal, dx)
    er = np.exp(-diel.kappa * r)
    okr = (1.0 + diel.kappa * r) * er
    coef_psi = nydd * (diel.theta_ext * okr - 1.0) / (FOUR_PI * r * r2)
    coef_psin = (1.0 - er) / (FOUR_PI * r)
    return coef_psi, coef_psin


def reaction_potential(z, band, psi, psi_n, diel, sdf=None):
    """psi_rxn(z) by the band quadrature of the layer densities."""
    z = np.asarray(z, dtype=float)
    if sdf is not None:
        from .grid import sample_trilinear

        if abs(sample_trilinear(sdf.field, z[None, :])) < sdf.eps:
            warnings.warn("reaction potential evaluated too close to the "
                          "surface; result is inaccurate", stacklevel=2)
    coef_psi, coef_psin = _reaction_kernel_rows(z, band, diel)
    return surface_integral(band, coef_psi * psi + coef_psin * psi_n)


def polarization_energy(mol, band, psi, psi_n, diel, sdf=None):
    """G_pol = 1/2 sum_k q_k psi_rxn(z_k) plus the per-atom potentials."""
    centers = mol.centers
    charges = mol.charges
    psi_rxn = np.empty(len(mol))
    for k in range(centers.shape[0]):
        psi_rxn[k] = reaction_potential(centers[k], band, psi, psi_n, diel,
                                        sdf=sdf if k == 0 else None)
    g_pol = 0.5 * float(np.dot(charges, psi_rxn))
    return g_pol, psi_rxn


def polarization_energy_fused(mol, band, psi, psi_n, diel):
    """Single fused accumulation of G_pol (cross-check of the per-atom path)."""
    acc = 0.0
    for k in range(len(mol)):
        coef_psi, coef_psin = _reaction_kernel_rows(mol.centers[k], band, diel)
        acc += 0.5 * mol.charges[k] * surface_integral(
            band, coef_psi * psi + coef_psin * psi_n)
    return acc


# ---------------------------------------------------------------------------
# Single-ion analytic reference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KirkwoodReference:
    """Closed-form solution for a single charged sphere.

    ``psi_n`` is the interior-trace normal derivative, which is what the
    integral equations solve for; the exterior trace is kept alongside
    because the two differ by the dielectric jump.
    """

    psi: float
    psi_n: float
    psi_n_exterior: float
    g_pol: float
    area: float
    psi_rxn_center: float

    def psi_exterior_at(self, rho, q, r, diel):
        return (q * math.exp(-diel.kappa * (rho - r))
                / (FOUR_PI * diel.eps_ext * (1.0 + diel.kappa * r) * rho))


def kirkwood_reference(q, r, diel):
    if r <= 0.0:
        raise ValueError("sphere radius must be positive")
    kr = diel.kappa * r
    psi = q / (FOUR_PI * diel.eps_ext * (1.0 + kr) * r)
    psi_n_int = -q / (FOUR_PI * diel.eps_int * r * r)
    psi_n_ext = -q / (FOUR_PI * diel.eps_ext * r * r)
    g_pol = (q * q / (8.0 * math.pi * r)) * (
        1.0 / (diel.eps_ext * (1.0 + kr)) - 1.0 / diel.eps_int)
    psi_rxn0 = (q / (FOUR_PI * r)) * (
        1.0 / (diel.eps_ext * (1.0 + kr)) - 1.0 / diel.eps_int)
    return KirkwoodReference(psi=psi, psi_n=psi_n_int, psi_n_exterior=psi_n_ext,
                             g_pol=g_pol, area=FOUR_PI * r * r,
                             psi_rxn_center=psi_rxn0)


def benchmark_errors(band, psi, psi_n, area, g_pol, ref):
    """Solution / area / energy relative errors against a reference.

    The solution error is the band-quadrature L2 norm over both density
    components, relative to the reference norm.
    """
    dpsi = psi - ref.psi
    dpsin = psi_n - ref.psi_n
    num = surface_integral(band, dpsi * dpsi + dpsin * dpsin)
    den = surface_integral(band, np.full(len(band), ref.psi ** 2 + ref.psi_n ** 2))
    if den == 0.0 or ref.area == 0.0 or ref.g_pol == 0.0:
        raise ValueError("reference norm is zero; errors undefined")
    return {
        "solution": math.sqrt(num / den),
        "area": abs(area - ref.area) / ref.area,
        "energy": abs(g_pol - ref.g_pol) / abs(ref.g_pol),
    }
