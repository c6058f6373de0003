"""Laplace/Yukawa fundamental solutions and the four combined kernels.

The coupled integral equations pair the free-space Green function
G0 = 1/(4 pi r) with the screened one Gk = exp(-kappa r)/(4 pi r).
Four combinations appear, acting between surface points x (target,
normal n_x) and y (source, normal n_y):

    K11 = dG0/dn_y - (eE/eI) dGk/dn_y
    K12 = G0 - Gk
    K21 = d2G0/dn_x dn_y - d2Gk/dn_x dn_y
    K22 = dG0/dn_x - (eI/eE) dGk/dn_x

All four are weakly singular; on a uniform-grid Nystrom discretization
they are regularized locally: whenever the source projects into the
radius-tau disc of the tangent plane at x (and genuinely belongs to the
local surface patch, see ``is_regularized_pair``), the kernel value is
replaced by its average over that disc - zero for K11/K21/K22 and an
explicit constant for K12.

This module is the scalar reference; the fused vectorized versions used
by the operator backends are checked against it in the tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FOUR_PI = 4.0 * math.pi

# A tangentially-near source only counts as part of the local patch if it
# is also close in R^3; otherwise the far side of a closed surface (for a
# sphere: the antipodal disc) would be swallowed by the regularization.
NEAR_FIELD_RADIUS_FACTOR = 2.0


@dataclass(frozen=True)
class Dielectrics:
    """Interior/exterior dielectric constants and screening kappa (1/A)."""

    eps_int: float = 1.0
    eps_ext: float = 80.0
    kappa: float = 0.1257

    def __post_init__(self):
        if self.eps_int <= 0.0 or self.eps_ext <= 0.0:
            raise ValidationError("dielectric constants must be positive")
        if self.kappa < 0.0:
            raise ValidationError("kappa must be >= 0")

    @property
    def theta_ext(self):
        return self.eps_ext / self.eps_int

    @property
    def theta_int(self):
        return self.eps_int / self.eps_ext

    @property
    def lambda1(self):
        return 0.5 * (1.0 + self.eps_ext / self.eps_int)

    @property
    def lambda2(self):
        return 0.5 * (1.0 + self.eps_int / self.eps_ext)


# ---------------------------------------------------------------------------
# Fundamental solutions and their normal derivatives
# ---------------------------------------------------------------------------


def g0(x, y):
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if r == 0.0:
        raise ZeroDivisionError("singular evaluation: x == y")
    return 1.0 / (FOUR_PI * r)


def gk(x, y, kappa):
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if r == 0.0:
        raise ZeroDivisionError("singular evaluation: x == y")
    return math.exp(-kappa * r) / (FOUR_PI * r)


def _geometry(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise ZeroDivisionError("singular evaluation: x == y")
    return d, math.sqrt(r2), r2


def dg0_dny(x, y, ny):
    d, r, r2 = _geometry(x, y)
    return float(np.dot(ny, d)) / (FOUR_PI * r * r2)


def dgk_dny(x, y, ny, kappa):
    d, r, r2 = _geometry(x, y)
    return float(np.dot(ny, d)) * (1.0 + kappa * r) * math.exp(-kappa * r) / (FOUR_PI * r * r2)


def dg0_dnx(x, y, nx):
    d, r, r2 = _geometry(x, y)
    return -float(np.dot(nx, d)) / (FOUR_PI * r * r2)


def dgk_dnx(x, y, nx, kappa):
    d, r, r2 = _geometry(x, y)
    return -float(np.dot(nx, d)) * (1.0 + kappa * r) * math.exp(-kappa * r) / (FOUR_PI * r * r2)


def d2g0_dnx_dny(x, y, nx, ny):
    d, r, r2 = _geometry(x, y)
    return (float(np.dot(nx, ny)) / (FOUR_PI * r * r2)
            - 3.0 * float(np.dot(nx, d)) * float(np.dot(ny, d)) / (FOUR_PI * r * r2 * r2))


def d2gk_dnx_dny(x, y, nx, ny, kappa):
    d, r, r2 = _geometry(x, y)
    er = math.exp(-kappa * r)
    okr = (1.0 + kappa * r) * er
    qkr = (3.0 + 3.0 * kappa * r + kappa * kappa * r2) * er
    return (float(np.dot(nx, ny)) * okr / (FOUR_PI * r * r2)
            - float(np.dot(nx, d)) * float(np.dot(ny, d)) * qkr / (FOUR_PI * r * r2 * r2))


# ---------------------------------------------------------------------------
# Regularization
# ---------------------------------------------------------------------------


def near_field_test(x, y, nx, tau):
    """True iff y falls inside the radius-tau tangent disc at x.

    Tangential distance only, as the discretization's regularization
    window is defined in the tangent plane at the target projection.
    """
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    ndd = float(np.dot(nx, d))
    tang2 = float(d @ d) - ndd * ndd
    return tang2 < tau * tau


def is_regularized_pair(x, y, nx, tau):
    """Near-field rule actually applied by the discrete operator.

    In addition to the tangent-disc test the pair must be close in R^3
    (within NEAR_FIELD_RADIUS_FACTOR * tau); a source on a distant sheet
    of the surface can project into the tangent disc without being part
    of the local patch the disc average stands for.
    """
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r2 = float(d @ d)
    ndd = float(np.dot(nx, d))
    rloc = NEAR_FIELD_RADIUS_FACTOR * tau
    return (r2 - ndd * ndd < tau * tau) and (r2 < rloc * rloc)


def k12_near_value(kappa, tau):
    """Average of G0 - Gk over the radius-tau tangent disc.

    (exp(-kappa tau) - 1 + kappa tau) / (2 pi kappa tau^2), evaluated by
    series for small kappa*tau to dodge the 0/0; the kappa -> 0 limit
    is 0 because the two kernels coincide there.
    """
    kt = kappa * tau
    if kt < 1e-4:
        return kappa / FOUR_PI * (1.0 - kt / 3.0 + kt * kt / 12.0)
    return (math.exp(-kt) - 1.0 + kt) / (2.0 * math.pi * kappa * tau * tau)


def kernel_block(which, x, nx, y, ny, diel, tau):
    """Regularized combined kernel K_which between projected points.

    ``which`` is one of 11, 12, 21, 22.  Near pairs (see
    ``is_regularized_pair``) take the tangent-disc averages: 0 for
    K11/K21/K22 and ``k12_near_value`` for K12.
    """
    if is_regularized_pair(x, y, nx, tau):
        if which == 12:
            return k12_near_value(diel.kappa, tau)
        if which in (11, 21, 22):
            return 0.0
        raise ValueError(f"unknown kernel block {which}")
    k = diel.kappa
    if which == 11:
        return dg0_dny(x, y, ny) - diel.theta_ext * dgk_dny(x, y, ny, k)
    if which == 12:
        return g0(x, y) - gk(x, y, k)
    if which == 21:
        return d2g0_dnx_dny(x, y, nx, ny) - d2gk_dnx_dny(x, y, nx, ny, k)
    if which == 22:
        return dg0_dnx(x, y, nx) - diel.theta_int * dgk_dnx(x, y, nx, k)
    raise ValueError(f"unknown kernel block {which}")
