import io

import numpy as np
import pytest

from ibimpb.errors import EmptyMoleculeError, PqrParseError
from ibimpb.molecule import Atom, Molecule, bounding_box, parse_pqr, write_pqr

PQR_SINGLE_ION = "ATOM      1  I   ION     1       0.000   0.000   0.000  1.0000 1.0000\n"


def test_atom_record_field_mapping():
    mol = parse_pqr("ATOM 1 N VAL 1 0.0 0.0 0.0 1.0 1.0")
    assert len(mol) == 1
    a = mol.atoms[0]
    assert a.center == (0.0, 0.0, 0.0)
    assert a.charge == 1.0
    assert a.radius == 1.0


def test_single_ion_file():
    mol = parse_pqr(PQR_SINGLE_ION)
    assert len(mol) == 1
    assert mol.atoms[0].radius == 1.0
    assert mol.atoms[0].charge == 1.0


def test_remark_only_file_is_empty_molecule():
    with pytest.raises(EmptyMoleculeError):
        parse_pqr("REMARK generated\nREMARK nothing else\n")


def test_hetatm_parsed_and_others_ignored():
    text = (
        "REMARK   1 header\n"
        "HETATM    2  O   HOH     2       1.5    -2.0     3.25 -0.5 1.2\n"
        "TER\n"
        "END\n"
    )
    mol = parse_pqr(text)
    assert len(mol) == 1
    assert mol.atoms[0].center == (1.5, -2.0, 3.25)


def test_malformed_numeric_field_reports_line():
    with pytest.raises(PqrParseError) as err:
        parse_pqr("ATOM 1 N VAL 1 0.0 zero 0.0 1.0 1.0")
    assert "line 1" in str(err.value)


def test_nonpositive_radius_rejected():
    with pytest.raises(PqrParseError):
        parse_pqr("ATOM 1 H VAL 1 0.0 0.0 0.0 0.4 0.0")


def test_atom_order_preserved():
    text = "".join(
        f"ATOM {i} C RES 1 {float(i)} 0.0 0.0 0.1 1.5\n" for i in range(1, 6)
    )
    mol = parse_pqr(text)
    assert [a.center[0] for a in mol.atoms] == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_roundtrip_bitwise():
    atoms = tuple(
        Atom(center=(0.1 * i, -2.5 + i / 3.0, 1e-7 * i), radius=1.0 + 0.01 * i,
             charge=(-1) ** i * 0.3333333333333333)
        for i in range(1, 8)
    )
    mol = Molecule(atoms=atoms)
    buf = io.StringIO()
    write_pqr(mol, buf)
    back = parse_pqr(buf.getvalue())
    assert back.atoms == mol.atoms


def test_bounding_box_single_ball():
    mol = parse_pqr(PQR_SINGLE_ION)
    lo, hi = bounding_box(mol, probe=1.4, pad=3.0)
    assert np.all(lo <= -5.4) and np.all(hi >= 5.4)
    assert np.allclose(hi - lo, (hi - lo)[0])  # cube


def test_bounding_box_two_balls():
    text = ("ATOM 1 C A 1 -5.0 0.0 0.0 0.0 1.0\n"
            "ATOM 2 C A 1 5.0 0.0 0.0 0.0 1.0\n")
    mol = parse_pqr(text)
    lo, hi = bounding_box(mol, probe=0.0, pad=0.0)
    assert lo[0] <= -6.0 and hi[0] >= 6.0


def test_bounding_box_contains_every_inflated_ball(rng):
    centers = rng.uniform(-8, 8, (20, 3))
    text = "".join(
        "ATOM %d C A 1 %f %f %f 0.1 %f\n" % (i, *c, r)
        for i, (c, r) in enumerate(zip(centers, rng.uniform(0.5, 2.0, 20)))
    )
    mol = parse_pqr(text)
    probe, pad = 1.4, 2.0
    lo, hi = bounding_box(mol, probe, pad)
    for a in mol.atoms:
        reach = a.radius + probe + pad
        for ax in range(3):
            assert lo[ax] <= a.center[ax] - reach
            assert hi[ax] >= a.center[ax] + reach
