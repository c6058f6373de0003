import io

import numpy as np
import pytest

from ibimpb.band import extract
from ibimpb.errors import GeometryError
from ibimpb.kernels import Dielectrics, FOUR_PI
from ibimpb.molecule import Atom, Molecule
from ibimpb.solver import (apply_system, assemble_rhs, build_system,
                           dump_summary_json, gmres_solve, initial_guess,
                           write_solution_csv)
from ibimpb.summation import SummationBackend
from ibimpb.postprocess import kirkwood_reference
from conftest import sphere_grid

DIEL = Dielectrics(eps_int=1.0, eps_ext=80.0, kappa=0.1257)


def ion():
    return Molecule(atoms=(Atom(center=(0.0, 0.0, 0.0), radius=1.0, charge=1.0),))


def ion_system(n=48, diel=DIEL, tau_ratio=1.0, backend=None):
    sdf = sphere_grid(n, 2.113)
    band = extract(sdf)
    return build_system(band, ion(), diel, tau_ratio * sdf.grid.h,
                        backend=backend, sdf=sdf), sdf


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------


def test_rhs_single_ion_g1_formula():
    sys, _ = ion_system()
    r = np.linalg.norm(sys.band.proj, axis=1)
    assert np.allclose(sys.g1, 1.0 / (FOUR_PI * r), rtol=1e-12)
    # at the surface |x*| = 1 this is 1/(4 pi)
    assert np.median(sys.g1) == pytest.approx(1.0 / FOUR_PI, rel=5e-3)


def test_rhs_g2_sign_matches_fd_of_potential():
    sys, _ = ion_system()
    band = sys.band
    step = 1e-6
    up = band.proj + step * band.normal
    dn = band.proj - step * band.normal
    pot = lambda p: 1.0 / (FOUR_PI * np.linalg.norm(p, axis=1))
    fd = (pot(up) - pot(dn)) / (2 * step)
    assert np.allclose(sys.g2, fd, rtol=1e-4)
    assert np.all(sys.g2 < 0.0)  # outward derivative of 1/r is negative


def test_rhs_zero_charges_zero_solution():
    diel = DIEL
    sdf = sphere_grid(32, 2.113)
    band = extract(sdf)
    mol = Molecule(atoms=(Atom(center=(0.0, 0.0, 0.0), radius=1.0, charge=0.0),))
    sys = build_system(band, mol, diel, sdf.grid.h, sdf=sdf)
    assert np.all(sys.rhs == 0.0)
    res = gmres_solve(sys)
    assert np.all(res.psi == 0.0) and np.all(res.psi_n == 0.0)
    assert res.matvecs <= 1


def test_rhs_rejects_atom_outside_surface():
    sdf = sphere_grid(32, 2.113)
    band = extract(sdf)
    mol = Molecule(atoms=(Atom(center=(1.8, 0.0, 0.0), radius=0.5, charge=1.0),))
    with pytest.raises(GeometryError):
        assemble_rhs(band, mol, DIEL, sdf=sdf)


def test_rhs_rejects_atom_in_band():
    sdf = sphere_grid(32, 2.113)
    band = extract(sdf)
    mol = Molecule(atoms=(Atom(center=(0.99, 0.0, 0.0), radius=0.5, charge=1.0),))
    with pytest.raises(GeometryError):
        assemble_rhs(band, mol, DIEL, sdf=sdf)


# ---------------------------------------------------------------------------
# Operator and initial guess
# ---------------------------------------------------------------------------


def test_matched_dielectrics_system_is_diagonal(rng):
    diel = Dielectrics(eps_int=2.0, eps_ext=2.0, kappa=0.0)
    sys, _ = ion_system(n=32, diel=diel)
    assert sys.lambda1 == 1.0 and sys.lambda2 == 1.0
    p = rng.normal(size=sys.size)
    out = apply_system(sys, p)
    assert np.array_equal(out, p)  # all four kernels vanish identically


def test_initial_guess_scalar_division():
    sys, _ = ion_system(n=32)
    assert sys.lambda1 == pytest.approx(40.5)
    p0 = initial_guess(sys)
    m = len(sys.band)
    assert np.allclose(p0[:m], sys.g1 / 40.5, rtol=1e-15)
    assert np.allclose(p0[m:], sys.g2 / sys.lambda2, rtol=1e-15)


def test_initial_guess_zero_rhs():
    diel = DIEL
    sdf = sphere_grid(32, 2.113)
    band = extract(sdf)
    mol = Molecule(atoms=(Atom(center=(0.0, 0.0, 0.0), radius=1.0, charge=0.0),))
    sys = build_system(band, mol, diel, sdf.grid.h, sdf=sdf)
    assert np.all(initial_guess(sys) == 0.0)


def test_matched_media_converges_immediately():
    diel = Dielectrics(eps_int=2.0, eps_ext=2.0, kappa=0.0)
    sys, _ = ion_system(n=32, diel=diel)
    res = gmres_solve(sys)
    assert res.matvecs == 1          # the initial residual is already zero
    assert res.iterations == 0
    m = len(sys.band)
    assert np.allclose(res.psi, sys.g1, rtol=1e-14)
    assert np.allclose(res.psi_n, sys.g2, rtol=1e-14)


# ---------------------------------------------------------------------------
# Kirkwood consistency: the solved normal derivative is the interior trace
# ---------------------------------------------------------------------------


def test_analytic_densities_are_near_solution():
    sys, _ = ion_system(n=48)
    ref = kirkwood_reference(1.0, 1.0, DIEL)
    m = len(sys.band)
    b = sys.rhs
    bnorm = np.linalg.norm(b)

    interior = np.concatenate([np.full(m, ref.psi), np.full(m, ref.psi_n)])
    res_int = np.linalg.norm(apply_system(sys, interior) - b) / bnorm
    exterior = np.concatenate([np.full(m, ref.psi),
                               np.full(m, ref.psi_n_exterior)])
    res_ext = np.linalg.norm(apply_system(sys, exterior) - b) / bnorm

    # discretization-scale residual for the correct trace, O(1) otherwise
    assert res_int < 0.05, res_int
    assert res_ext > 10 * res_int


def test_solved_densities_match_kirkwood():
    sys, _ = ion_system(n=48)
    res = gmres_solve(sys)
    ref = kirkwood_reference(1.0, 1.0, DIEL)
    psi_err = np.abs(res.psi - ref.psi).max() / abs(ref.psi)
    psin_err = np.abs(res.psi_n - ref.psi_n).max() / abs(ref.psi_n)
    assert psi_err < 0.1
    assert psin_err < 0.1
    assert res.iterations <= 6


def test_residual_monotone_within_restart_cycle():
    sys, _ = ion_system(n=48)
    res = gmres_solve(sys)
    hist = res.residuals
    assert all(hist[i + 1] <= hist[i] * (1 + 1e-12) for i in range(len(hist) - 1))
    assert hist[-1] <= 1e-5


def test_backend_independence_dense_vs_tree():
    backend_tree = SummationBackend(variant="tree")
    sys_d, _ = ion_system(n=48, backend=SummationBackend(variant="dense"))
    sys_t, _ = ion_system(n=48, backend=backend_tree)
    rd = gmres_solve(sys_d)
    rt = gmres_solve(sys_t)
    diff = np.linalg.norm(rt.stacked - rd.stacked) / np.linalg.norm(rd.stacked)
    assert diff <= 10 * backend_tree.tol


def test_operator_linearity_end_to_end(rng):
    sys, _ = ion_system(n=32)
    p = rng.normal(size=sys.size)
    q = rng.normal(size=sys.size)
    lhs = apply_system(sys, 2.0 * p - 3.0 * q)
    rhs = 2.0 * apply_system(sys, p) - 3.0 * apply_system(sys, q)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_solve_determinism():
    sys, _ = ion_system(n=32)
    a = gmres_solve(sys)
    b = gmres_solve(sys)
    assert np.array_equal(a.stacked, b.stacked)
    assert a.residuals == b.residuals


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def test_solution_csv_and_summary():
    sys, _ = ion_system(n=32)
    res = gmres_solve(sys)
    buf = io.StringIO()
    write_solution_csv(sys.band, res, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "px,py,pz,nx,ny,nz,psi,psi_n"
    assert len(lines) == len(sys.band) + 1
    jbuf = io.StringIO()
    dump_summary_json(res, jbuf)
    assert '"iterations"' in jbuf.getvalue()
    assert '"matvecs"' in jbuf.getvalue()
