"""Random unimodular and affine lattices: sampling, exact point counts, hole-probability checks."""
from randlat.lattice import (
    AffineUnimodularLattice,
    UnimodularLattice,
    dual,
    lattice_eq,
    lll_reduce,
    make_affine,
    make_lattice,
    shortest_vector,
)
from randlat.sampling import RngState, SamplerSpec, sample_affine, sample_lattice

__version__ = "0.1.0"

__all__ = [
    "AffineUnimodularLattice", "UnimodularLattice", "dual", "lattice_eq", "lll_reduce",
    "make_affine", "make_lattice", "shortest_vector", "RngState", "SamplerSpec",
    "sample_affine", "sample_lattice",
]
