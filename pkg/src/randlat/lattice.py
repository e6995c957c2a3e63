"""Unimodular and affine unimodular lattices in R^d.

A basis is a d x d float array whose *columns* are the basis vectors, so the
lattice is ``{B @ k : k in Z^d}``.
"""
from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np

from randlat import _kernels
from randlat.constants import unit_ball_volume
from randlat.errors import (
    DimensionMismatch,
    EnumerationOverflow,
    NonSquare,
    NonUnimodular,
    NumericalFailure,
)

DET_TOL = 1e-9
INT_TOL = 1e-6
MAX_DIM = 8


def _frozen(a):
    a = np.array(a, dtype=float, order="C")
    a.flags.writeable = False
    return a


def _check_basis(basis):
    B = np.asarray(basis, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise NonSquare(f"basis must be a square matrix, got shape {B.shape}")
    if B.shape[0] < 2:
        raise NonSquare("dimension must be at least 2")
    if not np.all(np.isfinite(B)):
        raise NonUnimodular("basis has non-finite entries")
    det = np.linalg.det(B)
    if abs(det - 1.0) > DET_TOL:
        raise NonUnimodular(f"det = {det!r}, expected 1")
    return B


class UnimodularLattice:
    """A covolume-one lattice ``B Z^d``; reduction is computed on first use."""

    def __init__(self, basis):
        self.basis = _frozen(_check_basis(basis))
        self._lock = threading.Lock()
        self._reduced = None

    @property
    def d(self):
        return self.basis.shape[0]

    def _reduce(self):
        with self._lock:
            if self._reduced is None:
                U, Br, q, r, status = _kernels.reduce_and_factor(self.basis, 0.999, 100_000)
                _raise_for_status(status)
                self._reduced = (_frozen(Br), U, _frozen(q), _frozen(r))
        return self._reduced

    @property
    def reduced_basis(self):
        return self._reduce()[0]

    @property
    def change_of_basis(self):
        """Integer unimodular U with ``reduced_basis = basis @ U``."""
        return self._reduce()[1]

    @property
    def gram(self):
        Br = self.reduced_basis
        return Br.T @ Br

    @property
    def qr(self):
        """(Q, R) of the reduced basis, R upper triangular with positive diagonal."""
        _, _, q, r = self._reduce()
        return q, r

    def points(self, coeffs):
        """Lattice points for integer coefficient rows w.r.t. the reduced basis."""
        return np.asarray(coeffs, dtype=float) @ self.reduced_basis.T

    def __repr__(self):
        return f"UnimodularLattice(d={self.d}, basis={self.basis.tolist()})"


class AffineUnimodularLattice:
    """The translate ``L + offset`` with offset stored in L's fundamental parallelepiped."""

    def __init__(self, lattice: UnimodularLattice, offset):
        self.lattice = lattice
        self.offset = _frozen(_reduce_offset(lattice.basis, offset))

    @property
    def d(self):
        return self.lattice.d

    @property
    def basis(self):
        return self.lattice.basis

    def __repr__(self):
        return f"AffineUnimodularLattice(d={self.d}, offset={self.offset.tolist()})"


def _reduce_offset(B, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (B.shape[0],):
        raise DimensionMismatch(f"offset has shape {x.shape}, lattice dimension {B.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("offset must be finite")
    u = np.linalg.solve(B, x)
    u = u - np.floor(u)
    # -eps from round-off would otherwise land next to the far face
    u[u >= 1.0 - 1e-12] = 0.0
    return B @ u


def make_lattice(basis) -> UnimodularLattice:
    return UnimodularLattice(basis)


def make_affine(L: UnimodularLattice, x) -> AffineUnimodularLattice:
    return AffineUnimodularLattice(L, x)


def dual(L: UnimodularLattice) -> UnimodularLattice:
    """Dual lattice; its basis is the inverse transpose of L's basis."""
    return UnimodularLattice(np.linalg.inv(L.basis).T)


def _raise_for_status(status):
    if status == 1:
        raise NumericalFailure("Gram-Schmidt degenerated during LLL")
    if status == 2:
        raise NumericalFailure("LLL did not converge")
    if status == 3:
        raise NumericalFailure("basis condition number exceeds 1e12")


def _lll_transform(B, delta):
    B = np.ascontiguousarray(B, dtype=float)
    U, _, _, _, status = _kernels.reduce_and_factor(B, float(delta), 100_000)
    _raise_for_status(status)
    return U


def lll_reduce(L, delta=0.999):
    """LLL-reduced basis of ``L`` (a lattice or a raw basis matrix)."""
    if not 0.25 < delta < 1:
        raise ValueError("delta must lie in (0.25, 1)")
    B = L.basis if isinstance(L, UnimodularLattice) else np.asarray(L, dtype=float)
    return B @ _lll_transform(B, delta)


def is_lll_reduced(B, delta=0.999, eta=0.5 + 1e-9):
    B = np.asarray(B, dtype=float)
    mu, bn = _kernels._gso(np.ascontiguousarray(B))
    d = B.shape[1]
    for k in range(1, d):
        if np.any(np.abs(mu[k, :k]) > eta):
            return False
        if bn[k] < (delta - mu[k, k - 1] ** 2) * bn[k - 1] * (1 - 1e-12):
            return False
    return True


def lattice_eq(L1: UnimodularLattice, L2: UnimodularLattice) -> bool:
    if L1.d != L2.d:
        raise DimensionMismatch("lattices of different dimension")
    T = np.linalg.solve(L1.basis, L2.basis)
    if np.max(np.abs(T - np.rint(T))) > INT_TOL:
        return False
    return abs(abs(round(np.linalg.det(np.rint(T)))) - 1) == 0


def covering_radius_bound(R):
    """Half the diagonal of the Gram-Schmidt box; bounds the covering radius."""
    return 0.5 * float(np.sqrt(np.sum(np.diag(R) ** 2)))


MAX_POINTS = 10**8


def enumerate_coeffs(R, t, radius, early_exit=False, exclude_zero=False, slack=1e-9):
    """Integer vectors c with ||R c - t|| <= radius + slack (R upper triangular)."""
    d = R.shape[0]
    r = radius + slack
    predicted = unit_ball_volume(d) * (r + covering_radius_bound(R)) ** d
    if predicted > MAX_POINTS:
        raise EnumerationOverflow(f"about {predicted:.3g} points predicted in radius {radius}")
    R = np.ascontiguousarray(R, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    cap = 1 if early_exit else int(predicted * 1.5) + 16
    out = np.empty((cap, d), dtype=np.int64)
    n = _kernels.fp_enumerate(R, t, r * r, out, early_exit, exclude_zero)
    if n > cap:
        out = np.empty((n, d), dtype=np.int64)
        _kernels.fp_enumerate(R, t, r * r, out, early_exit, exclude_zero)
    return out[:n]


def shortest_vector(L: UnimodularLattice):
    """Nonzero vector of minimal norm.

    Ties (within 1e-9) are resolved by flipping each candidate so its first
    nonzero coordinate is positive, then taking the lexicographically smallest.
    """
    q, r = L.qr
    radius = float(np.min(np.linalg.norm(L.reduced_basis, axis=0)))
    c = enumerate_coeffs(r, np.zeros(L.d), radius, exclude_zero=True)
    pts = L.points(c)
    norms = np.linalg.norm(pts, axis=1)
    cand = pts[norms <= norms.min() + 1e-9]
    for row in cand:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if row[nz[0]] < 0:
            row *= -1
    order = np.lexsort(cand.T[::-1])
    return cand[order[0]] + 0.0


def load_basis(path):
    """Read a basis from a JSON array of rows or a whitespace-separated text file.

    Rows of the file are rows of the matrix (row-major), so columns are the
    basis vectors as everywhere else in the package.
    """
    text = Path(path).read_text()
    try:
        rows = json.loads(text)
    except json.JSONDecodeError:
        rows = [[float(x) for x in line.split()] for line in text.splitlines() if line.strip()]
    return np.array(rows, dtype=float)


def basis_to_json(B):
    return json.dumps(np.asarray(B).tolist())
