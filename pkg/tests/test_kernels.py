import math

import numpy as np
import pytest

from ibimpb.kernels import (Dielectrics, FOUR_PI, NEAR_FIELD_RADIUS_FACTOR,
                            d2g0_dnx_dny, d2gk_dnx_dny, dg0_dnx, dg0_dny,
                            dgk_dnx, dgk_dny, g0, gk, is_regularized_pair,
                            k12_near_value, kernel_block, near_field_test)
from conftest import random_unit_vectors

DIEL = Dielectrics(eps_int=1.0, eps_ext=80.0, kappa=0.1257)


# ---------------------------------------------------------------------------
# Fundamental solutions
# ---------------------------------------------------------------------------


def test_g0_unit_separation():
    assert g0([0, 0, 0], [1, 0, 0]) == pytest.approx(1.0 / FOUR_PI)


def test_gk_reduces_to_g0_at_zero_kappa():
    x, y = [0.3, -0.2, 1.0], [-1.0, 0.4, 0.2]
    assert gk(x, y, 0.0) == g0(x, y)


def test_gk_formula_value():
    val = gk([0, 0, 0], [2, 0, 0], 0.1257)
    assert val == pytest.approx(math.exp(-0.2514) / (8 * math.pi), rel=1e-12)


def test_singular_evaluation_raises():
    with pytest.raises(ZeroDivisionError):
        g0([1, 1, 1], [1, 1, 1])
    with pytest.raises(ZeroDivisionError):
        gk([1, 1, 1], [1, 1, 1], 0.1)


# ---------------------------------------------------------------------------
# Analytic derivatives vs finite differences (the correctness anchor)
# ---------------------------------------------------------------------------


def fd_normal_derivative(fun, point, normal, step=1e-5):
    p = np.asarray(point, dtype=float)
    n = np.asarray(normal, dtype=float)
    return (fun(p + step * n) - fun(p - step * n)) / (2 * step)


def test_first_normal_derivatives_match_fd(rng):
    kappa = DIEL.kappa
    for _ in range(100):
        x = rng.uniform(-2, 2, 3)
        y = rng.uniform(-2, 2, 3)
        if np.linalg.norm(x - y) < 0.3:
            continue
        nx, ny = random_unit_vectors(rng, 2)
        fd = fd_normal_derivative(lambda q: g0(x, q), y, ny)
        assert dg0_dny(x, y, ny) == pytest.approx(fd, rel=1e-5, abs=1e-12)
        fd = fd_normal_derivative(lambda q: gk(x, q, kappa), y, ny)
        assert dgk_dny(x, y, ny, kappa) == pytest.approx(fd, rel=1e-5, abs=1e-12)
        fd = fd_normal_derivative(lambda q: g0(q, y), x, nx)
        assert dg0_dnx(x, y, nx) == pytest.approx(fd, rel=1e-5, abs=1e-12)
        fd = fd_normal_derivative(lambda q: gk(q, y, kappa), x, nx)
        assert dgk_dnx(x, y, nx, kappa) == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_second_normal_derivatives_match_fd(rng):
    kappa = DIEL.kappa
    for _ in range(100):
        x = rng.uniform(-2, 2, 3)
        y = rng.uniform(-2, 2, 3)
        if np.linalg.norm(x - y) < 0.5:
            continue
        nx, ny = random_unit_vectors(rng, 2)
        fd = fd_normal_derivative(lambda q: dg0_dny(q, y, ny), x, nx)
        assert d2g0_dnx_dny(x, y, nx, ny) == pytest.approx(fd, rel=1e-5, abs=1e-10)
        fd = fd_normal_derivative(lambda q: dgk_dny(q, y, ny, kappa), x, nx)
        assert d2gk_dnx_dny(x, y, nx, ny, kappa) == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_k11_matches_fd_of_combined_kernel():
    # the r=2 axial configuration: n_x = n_y = (1,0,0), x - y = (2,0,0)
    x = np.array([2.0, 0.0, 0.0])
    y = np.zeros(3)
    n = np.array([1.0, 0.0, 0.0])
    theta = DIEL.theta_ext
    kappa = DIEL.kappa

    def combined(q):
        return g0(x, q) - theta * gk(x, q, kappa)

    fd = fd_normal_derivative(combined, y, n)
    val = kernel_block(11, x, n, y, n, DIEL, tau=0.05)
    assert val == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------------------
# Near-field test and regularized values
# ---------------------------------------------------------------------------


def test_near_field_pure_normal_offset_is_near():
    x = np.zeros(3)
    n = np.array([0.0, 0.0, 1.0])
    tau = 0.2
    assert near_field_test(x, x + 0.5 * tau * n, n, tau)


def test_near_field_tangential_offset_far():
    x = np.zeros(3)
    n = np.array([0.0, 0.0, 1.0])
    t = np.array([1.0, 0.0, 0.0])
    tau = 0.2
    assert not near_field_test(x, x + 2 * tau * t, n, tau)


def test_near_field_45_degrees():
    x = np.zeros(3)
    n = np.array([0.0, 0.0, 1.0])
    tau = 0.2
    y = x + tau * np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    assert near_field_test(x, y, n, tau)


def test_regularized_pair_excludes_antipodes():
    # a source on the far sheet projects into the tangent disc but is not
    # part of the local patch
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([-1.0, 0.0, 0.0])
    n = np.array([1.0, 0.0, 0.0])
    tau = 0.05
    assert near_field_test(x, y, n, tau)          # tangential distance 0
    assert not is_regularized_pair(x, y, n, tau)  # but 3-D far


def test_kernel_block_coincident_point_values():
    x = np.array([0.3, 0.4, 0.5])
    n = np.array([0.0, 1.0, 0.0])
    tau = 0.07
    assert kernel_block(11, x, n, x, n, DIEL, tau) == 0.0
    assert kernel_block(21, x, n, x, n, DIEL, tau) == 0.0
    assert kernel_block(22, x, n, x, n, DIEL, tau) == 0.0
    kt = DIEL.kappa * tau
    expect = (math.exp(-kt) - 1 + kt) / (2 * math.pi * DIEL.kappa * tau ** 2)
    assert kernel_block(12, x, n, x, n, DIEL, tau) == pytest.approx(expect, rel=1e-12)


def test_k12_k21_vanish_for_zero_kappa():
    d0 = Dielectrics(eps_int=1.0, eps_ext=80.0, kappa=0.0)
    x = np.array([1.0, 0.2, -0.3])
    y = np.array([-0.5, 1.0, 0.8])
    nx, ny = np.array([1.0, 0, 0]), np.array([0, 0, 1.0])
    assert kernel_block(12, x, nx, y, ny, d0, 0.05) == 0.0
    assert kernel_block(21, x, nx, y, ny, d0, 0.05) == 0.0


def test_k12_near_value_series_continuity():
    # the small-argument series must agree with the closed form at the seam
    tau = 0.5
    kappa = 0.99e-4 / tau  # series branch
    series = k12_near_value(kappa, tau)
    kt = kappa * tau
    closed = (math.exp(-kt) - 1 + kt) / (2 * math.pi * kappa * tau ** 2)
    assert series == pytest.approx(closed, rel=1e-9)
    assert k12_near_value(0.0, tau) == 0.0


def test_k12_near_value_is_disc_average():
    # radial quadrature of (1 - exp(-kappa s))/(4 pi s) over the tangent disc
    kappa, tau = 0.1257, 0.08
    s = np.linspace(0.0, tau, 200001)[1:]
    integrand = (1.0 - np.exp(-kappa * s)) / (FOUR_PI * s) * 2 * math.pi * s
    disc_avg = np.trapezoid(integrand, s) / (math.pi * tau ** 2)
    assert k12_near_value(kappa, tau) == pytest.approx(disc_avg, rel=1e-4)


def test_k21_integrable_singularity_exponent():
    # tangential approach with parallel normals: |K21| ~ C/r
    n = np.array([0.0, 0.0, 1.0])
    rs = np.logspace(-3, 0, 40)
    vals = []
    for r in rs:
        x = np.zeros(3)
        y = np.array([r, 0.0, 0.0])
        k = d2g0_dnx_dny(x, y, n, n) - d2gk_dnx_dny(x, y, n, n, DIEL.kappa)
        vals.append(abs(k))
    slope = np.polyfit(np.log(rs), np.log(vals), 1)[0]
    assert slope >= -1.2


def test_kernel_symmetries(rng):
    for _ in range(20):
        x, y = rng.uniform(-1, 1, (2, 3))
        if np.linalg.norm(x - y) < 0.3:
            continue
        nx, ny = random_unit_vectors(rng, 2)
        tau = 0.01
        k12_xy = kernel_block(12, x, nx, y, ny, DIEL, tau)
        k12_yx = kernel_block(12, y, ny, x, nx, DIEL, tau)
        assert k12_xy == pytest.approx(k12_yx, rel=1e-12)
        k21_xy = kernel_block(21, x, nx, y, ny, DIEL, tau)
        k21_yx = kernel_block(21, y, ny, x, nx, DIEL, tau)
        assert k21_xy == pytest.approx(k21_yx, rel=1e-12)


def test_matched_dielectrics_all_kernels_vanish(rng):
    d = Dielectrics(eps_int=4.0, eps_ext=4.0, kappa=0.0)
    x, y = rng.uniform(-1, 1, (2, 3))
    nx, ny = random_unit_vectors(rng, 2)
    for which in (11, 12, 21, 22):
        assert kernel_block(which, x, nx, y, ny, d, 0.01) == 0.0
