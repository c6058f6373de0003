"""Linearized Poisson-Boltzmann electrostatics on uniform Cartesian grids.

The solver never meshes the molecular surface.  It builds the solvent
excluded surface as the zero level set of a signed distance function,
collects the grid nodes of a narrowband around that surface, and solves
the coupled pair of boundary integral equations for the surface potential
and its normal derivative directly on those nodes.  Surface area, surface
potentials and the polarization energy are then read off the converged
densities.

Subpackage layout:

* :mod:`ibimpb.molecule`  - PQR parsing, atom records, bounding boxes
* :mod:`ibimpb.grid`      - Cartesian grid container and stencils
* :mod:`ibimpb.surface`   - level set construction of the surface
* :mod:`ibimpb.band`      - narrowband extraction, projections, weights
* :mod:`ibimpb.kernels`   - Laplace/Yukawa kernels and regularization
* :mod:`ibimpb.summation` - dense and treecode operator backends
* :mod:`ibimpb.solver`    - block system assembly and GMRES driver
* :mod:`ibimpb.postprocess` - area, reaction potentials, energies
* :mod:`ibimpb.pipeline`  - end-to-end runs and the ion benchmark
* :mod:`ibimpb.cli`       - command line interface

Hot loops live in the compiled extension :mod:`ibimpb._core`; a pure
NumPy twin (:mod:`ibimpb._core_py`) is selected automatically when the
extension is unavailable (see :mod:`ibimpb.backend`).
"""

from .molecule import Atom, Molecule, parse_pqr, bounding_box
from .grid import Grid, GridField
from .kernels import Dielectrics
from .backend import core_backend_name

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Molecule",
    "parse_pqr",
    "bounding_box",
    "Grid",
    "GridField",
    "Dielectrics",
    "core_backend_name",
    "__version__",
]
