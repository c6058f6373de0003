"""Molecule input: PQR parsing, validation and bounding boxes.

A PQR file is whitespace-aligned rather than column-strict, so ATOM and
HETATM records are read by taking the last five numeric columns as
``x y z charge radius``.  Radii must be strictly positive: force fields
occasionally emit zero-radius hydrogens, which would puncture the
surface construction, so they are rejected up front.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMoleculeError, PqrParseError, ValidationError

_RECORD_NAMES = ("ATOM", "HETATM")


@dataclass(frozen=True)
class Atom:
    """One charged sphere: center (Angstrom), radius (Angstrom), charge (e)."""

    center: tuple
    radius: float
    charge: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.center):
            raise ValidationError(f"non-finite atom center {self.center}")
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValidationError(f"atom radius must be positive, got {self.radius}")
        if not math.isfinite(self.charge):
            raise ValidationError(f"non-finite atom charge {self.charge}")


@dataclass(frozen=True)
class Molecule:
    """Ordered list of atoms; order is preserved because charge indexing
    in the polarization-energy sum follows the input file."""

    atoms: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.atoms) == 0:
            raise EmptyMoleculeError("molecule has no atoms")

    def __len__(self):
        return len(self.atoms)

    @property
    def centers(self):
        return np.array([a.center for a in self.atoms], dtype=float)

    @property
    def radii(self):
        return np.array([a.radius for a in self.atoms], dtype=float)

    @property
    def charges(self):
        return np.array([a.charge for a in self.atoms], dtype=float)


def parse_pqr(stream, label=""):
    """Parse PQR text (a string or an iterable of lines) into a Molecule.

    Every ATOM/HETATM line contributes one atom; all other lines are
    ignored.  The last five whitespace-separated numeric fields of a
    record are (x, y, z, charge, radius).
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream
    atoms = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        fields = line.split()
        if not fields or fields[0] not in _RECORD_NAMES:
            continue
        if len(fields) < 6:
            raise PqrParseError(f"record has too few fields: {line!r}", line_no)
        try:
            values = [float(tok) for tok in fields[-5:]]
        except ValueError as exc:
            raise PqrParseError(f"malformed numeric field in {line!r}: {exc}",
                                line_no) from None
        x, y, z, q, r = values
        try:
            atoms.append(Atom(center=(x, y, z), radius=r, charge=q))
        except ValidationError as exc:
            raise PqrParseError(str(exc), line_no) from None
    if not atoms:
        raise EmptyMoleculeError("no ATOM/HETATM records found")
    return Molecule(atoms=tuple(atoms), label=label)


def read_pqr(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pqr(fh, label=str(path))


def write_pqr(mol, stream):
    """Serialize a molecule back to a minimal PQR (atom records only).

    Field values are written with repr-roundtrip precision so that
    parse(write(mol)) reproduces the atoms bitwise.
    """
    for i, a in enumerate(mol.atoms, start=1):
        stream.write(
            "ATOM  %5d  X   UNK %5d    %s %s %s %s %s\n"
            % (i, i, repr(a.center[0]), repr(a.center[1]), repr(a.center[2]),
               repr(a.charge), repr(a.radius))
        )


def bounding_box(mol, probe, pad):
    """Axis-aligned cube containing every ball of radius r_k + probe + pad.

    Returns ``(lo, hi)`` with lo/hi scalars: the cube is centered on the
    tight bounding box of the inflated balls and its half-width is the
    largest per-axis reach.  A cube (single spacing h on every axis) is
    required because the grid is uniform and cubic.
    """
    if probe < 0.0 or pad < 0.0:
        raise ValidationError("probe and pad must be non-negative")
    centers = mol.centers
    reach = mol.radii + probe + pad
    lo = (centers - reach[:, None]).min(axis=0)
    hi = (centers + reach[:, None]).max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * float((hi - lo).max())
    return mid - half, mid + half
