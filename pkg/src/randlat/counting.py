"""Exact counts of (affine) lattice points in regions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from randlat.errors import CoverageError, DimensionMismatch
from randlat.lattice import AffineUnimodularLattice, UnimodularLattice, enumerate_coeffs
from randlat.regions import Ball, Region

ZERO_TOL = 1e-12


@dataclass
class CountResult:
    count: int
    points: Optional[np.ndarray] = None


def _split(lat):
    if isinstance(lat, AffineUnimodularLattice):
        return lat.lattice, lat.offset
    if isinstance(lat, UnimodularLattice):
        return lat, None
    raise TypeError(f"expected a lattice, got {type(lat).__name__}")


def enumerate_in_ball(L: UnimodularLattice, center, radius, early_exit=False, exclude_zero=False):
    """All v in L with |v - center| <= radius + 1e-9, as an (m, d) array."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    center = np.asarray(center, dtype=float)
    if center.shape != (L.d,):
        raise DimensionMismatch("center dimension does not match lattice")
    q, r = L.qr
    c = enumerate_coeffs(r, q.T @ center, radius, early_exit=early_exit, exclude_zero=exclude_zero)
    return L.points(c)


def lattice_points_near(lat, center, radius, exclude_zero=False):
    """Points of a lattice or affine lattice within ``radius`` of ``center``."""
    L, offset = _split(lat)
    if offset is None:
        return enumerate_in_ball(L, center, radius, exclude_zero=exclude_zero)
    return enumerate_in_ball(L, np.asarray(center) - offset, radius) + offset


def count_region(lat, R: Region, keep_points=False, exclude_zero=False) -> CountResult:
    """#(lat ∩ R); ``exclude_zero`` drops the origin (used for regular lattices)."""
    if lat.d != R.d:
        raise DimensionMismatch(f"lattice dimension {lat.d} vs region dimension {R.d}")
    c, r = R.bounding_ball()
    pts = lattice_points_near(lat, c, r)
    pts = _filter(pts, R, exclude_zero)
    return CountResult(len(pts), pts if keep_points else None)


def _filter(pts, R, exclude_zero):
    if len(pts) == 0:
        return pts
    keep = R.contains(pts)
    if exclude_zero:
        keep &= np.sum(pts * pts, axis=1) > ZERO_TOL**2
    return pts[keep]


def is_empty(lat, R: Region, exclude_zero=False) -> bool:
    """True iff lat ∩ R is empty; stops at the first point found when R is a ball."""
    if lat.d != R.d:
        raise DimensionMismatch(f"lattice dimension {lat.d} vs region dimension {R.d}")
    c, r = R.bounding_ball()
    L, offset = _split(lat)
    if isinstance(R, Ball) and not exclude_zero:
        shift = c if offset is None else c - offset
        return len(enumerate_in_ball(L, shift, r, early_exit=True)) == 0
    pts = lattice_points_near(lat, c, r)
    return len(_filter(pts, R, exclude_zero)) == 0


def required_coeff_bound(lat, R: Region) -> int:
    """Smallest K such that [-K, K]^d of coefficients in lat's own basis covers R."""
    L, offset = _split(lat)
    c, r = R.bounding_ball()
    shift = c if offset is None else c - offset
    dual_norms = np.linalg.norm(np.linalg.inv(L.basis), axis=1)
    return int(np.ceil(np.max(dual_norms) * (np.linalg.norm(shift) + r)))


def brute_force_count(lat, R: Region, coeff_bound: int, exclude_zero=False) -> CountResult:
    """Scan every coefficient vector in [-K, K]^d of the *given* basis.

    This is the independent oracle for count_region: no reduction, no
    Gram-Schmidt pruning.
    """
    if lat.d != R.d:
        raise DimensionMismatch(f"lattice dimension {lat.d} vs region dimension {R.d}")
    need = required_coeff_bound(lat, R)
    if coeff_bound < need:
        raise CoverageError(f"coeff_bound {coeff_bound} < required {need}")
    L, offset = _split(lat)
    rng = np.arange(-coeff_bound, coeff_bound + 1, dtype=float)
    rest = np.array(list(itertools.product(rng, repeat=L.d - 1)), dtype=float).reshape(-1, L.d - 1)
    base = offset if offset is not None else np.zeros(L.d)
    found = []
    # one slab per value of the first coefficient keeps memory at (2K+1)^(d-1) points
    for a in rng:
        pts = base + a * L.basis[:, 0] + rest @ L.basis[:, 1:].T
        found.append(_filter(pts, R, exclude_zero))
    pts = np.concatenate(found)
    return CountResult(len(pts), pts)


def count_many(lat, regions, exclude_zero=False, reach=None):
    """Counts for several regions from a single enumeration.

    ``reach`` is a (center, radius) ball containing every region; callers that
    reuse the same regions for many lattices should precompute it.
    """
    if reach is None:
        reach = enclosing_reach(regions)
    pts = lattice_points_near(lat, reach[0], reach[1])
    if exclude_zero and len(pts):
        pts = pts[np.sum(pts * pts, axis=1) > ZERO_TOL**2]
    return np.array([int(np.count_nonzero(R._contains(pts))) if len(pts) else 0 for R in regions])


def enclosing_reach(regions):
    """Center and radius of a ball containing all the given regions."""
    balls = [R.bounding_ball() for R in regions]
    center = np.mean([c for c, _ in balls], axis=0)
    radius = max(float(np.linalg.norm(c - center)) + r for c, r in balls)
    return center, radius
