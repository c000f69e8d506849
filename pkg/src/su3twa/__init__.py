"""Truncated Wigner simulation of lattice spin-one systems.

The phase space attached to each lattice site is spanned by the expectation
values of the eight su(3) generators, so a site is a point X = (X_1, ..., X_8)
rather than a classical Bloch vector.  Ensembles of such points, drawn from a
moment-matched Gaussian Wigner function, are propagated with generalized Bloch
equations and averaged to approximate quantum expectation values.

Subpackages of interest:

* :mod:`su3twa.algebra`   generator matrices and structure constants
* :mod:`su3twa.wigner`    initial-state moments and Gaussian sampling
* :mod:`su3twa.models`    Hamiltonians, lattices and mean-field terms
* :mod:`su3twa.dynamics`  equations of motion and the RK4 integrator
* :mod:`su3twa.exact`     dense exact-diagonalization oracle (small systems)
* :mod:`su3twa.ensemble`  trajectory ensembles and observable averaging
* :mod:`su3twa.cli`       command line front end
"""

__version__ = "0.1.0"

from .algebra import build_generator_set, structure_constants
from .models import CouplingGraph, ModelSpec, SiteTerm
from .wigner import moments_from_density, named_density, restrict_su2

__all__ = [
    "__version__",
    "build_generator_set",
    "structure_constants",
    "CouplingGraph",
    "ModelSpec",
    "SiteTerm",
    "moments_from_density",
    "named_density",
    "restrict_su2",
]
