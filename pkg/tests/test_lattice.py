import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randlat.errors import DimensionMismatch, EnumerationOverflow, NonSquare, NonUnimodular
from randlat.lattice import (
    AffineUnimodularLattice,
    UnimodularLattice,
    dual,
    enumerate_coeffs,
    is_lll_reduced,
    lattice_eq,
    lll_reduce,
    load_basis,
    make_affine,
    make_lattice,
    shortest_vector,
)
from randlat.sampling import sample_rotation, sample_x2_exact, sample_xd_siegel, trial_rng


def unimodular_int(d, rng, steps=6):
    U = np.eye(d, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(d, size=2, replace=False)
        U[:, i] += int(rng.integers(-3, 4)) * U[:, j]
    return U


def grid_shortest_norm(B, K):
    best = np.inf
    for c in itertools.product(range(-K, K + 1), repeat=B.shape[0]):
        if any(c):
            best = min(best, np.linalg.norm(B @ np.array(c, dtype=float)))
    return best


# -- construction ----------------------------------------------------------

def test_identity_is_z2():
    L = make_lattice(np.eye(2))
    assert lattice_eq(L, make_lattice([[1.0, 1.0], [0.0, 1.0]]))


def test_diagonal_unimodular_ok():
    L = make_lattice(np.diag([2.0, 0.5]))
    assert L.d == 2


def test_non_unimodular_rejected():
    with pytest.raises(NonUnimodular):
        make_lattice(np.diag([2.0, 1.0]))


def test_non_square_rejected():
    with pytest.raises(NonSquare):
        make_lattice(np.ones((2, 3)))


def test_nonfinite_rejected():
    with pytest.raises(NonUnimodular):
        make_lattice([[np.nan, 0.0], [0.0, 1.0]])


def test_basis_is_read_only():
    L = make_lattice(np.eye(2))
    with pytest.raises(ValueError):
        L.basis[0, 0] = 3.0


# -- dual --------------------------------------------------------------------

def test_dual_of_zd_is_zd():
    for d in (2, 3, 4):
        assert lattice_eq(dual(make_lattice(np.eye(d))), make_lattice(np.eye(d)))


def test_dual_of_diagonal():
    D = dual(make_lattice(np.diag([2.0, 0.5]))).basis
    np.testing.assert_allclose(D, np.diag([0.5, 2.0]), atol=1e-12)


def test_dual_pairing_random_3d():
    rng = trial_rng(3, 0)
    for _ in range(20):
        L = sample_xd_siegel(3, rng)
        D = dual(L).basis
        assert np.max(np.abs(D.T @ L.basis - np.eye(3))) <= 1e-9


def test_dual_is_involution():
    L = sample_xd_siegel(3, trial_rng(1, 1))
    assert lattice_eq(dual(dual(L)), L)


# -- reduction -------------------------------------------------------------

def test_lll_fixes_identity():
    np.testing.assert_array_equal(lll_reduce(make_lattice(np.eye(2))), np.eye(2))


def test_lll_skewed_example():
    L = make_lattice([[1.0, 100.5], [0.0, 1.0]])
    Br = lll_reduce(L)
    norms = np.linalg.norm(Br, axis=0)
    assert np.all(norms <= 2)
    # the reduced basis must contain a shortest vector, found by grid scan
    assert np.isclose(norms.min(), grid_shortest_norm(L.basis, 120))
    assert lattice_eq(L, make_lattice(Br))


def test_lll_rejects_bad_delta():
    with pytest.raises(ValueError):
        lll_reduce(make_lattice(np.eye(2)), delta=0.2)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 5))
def test_lll_output_is_reduced_and_same_lattice(seed, d):
    rng = np.random.default_rng(seed)
    Q = sample_rotation(d, rng)
    B = Q @ unimodular_int(d, rng)
    L = make_lattice(B)
    Br = lll_reduce(L)
    assert is_lll_reduced(Br)
    T = np.linalg.solve(B, Br)
    assert np.max(np.abs(T - np.rint(T))) < 1e-6
    assert abs(abs(np.linalg.det(Br)) - 1) < 1e-9


def test_reduced_basis_wrapped_equals_original():
    rng = trial_rng(11, 0)
    for _ in range(10):
        L = make_lattice(sample_x2_exact(rng).basis @ unimodular_int(2, rng))
        assert lattice_eq(L, make_lattice(L.reduced_basis))
        np.testing.assert_allclose(L.basis @ L.change_of_basis, L.reduced_basis, atol=1e-9)


def test_lattice_eq_negative():
    assert not lattice_eq(make_lattice(np.eye(2)), make_lattice(np.diag([2.0, 0.5])))


def test_lattice_eq_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        lattice_eq(make_lattice(np.eye(2)), make_lattice(np.eye(3)))


# -- affine ------------------------------------------------------------------

def test_make_affine_zero():
    np.testing.assert_array_equal(make_affine(make_lattice(np.eye(2)), [0.0, 0.0]).offset, [0.0, 0.0])


def test_make_affine_mod_one():
    A = make_affine(make_lattice(np.eye(2)), [1.5, -0.25])
    np.testing.assert_allclose(A.offset, [0.5, 0.75], atol=1e-12)


def test_make_affine_basis_frame():
    A = make_affine(make_lattice(np.diag([2.0, 0.5])), [2.3, 0.6])
    np.testing.assert_allclose(A.offset, [0.3, 0.1], atol=1e-12)


def test_make_affine_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        make_affine(make_lattice(np.eye(2)), [0.0, 0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_affine_offset_in_parallelepiped(x):
    L = sample_x2_exact(trial_rng(5, 0))
    A = AffineUnimodularLattice(L, x)
    u = np.linalg.solve(L.basis, A.offset)
    assert np.all(u >= -1e-12) and np.all(u < 1 + 1e-12)
    # offset differs from x by a lattice vector
    k = np.linalg.solve(L.basis, np.asarray(x) - A.offset)
    assert np.max(np.abs(k - np.rint(k))) < 1e-6


# -- shortest vector -------------------------------------------------------

def test_shortest_z2():
    v = shortest_vector(make_lattice(np.eye(2)))
    assert np.isclose(np.linalg.norm(v), 1.0)
    assert v.tolist() in ([0.0, 1.0], [1.0, 0.0])


def test_shortest_diagonal():
    v = shortest_vector(make_lattice(np.diag([2.0, 0.5])))
    np.testing.assert_allclose(v, [0.0, 0.5])


def test_shortest_matches_grid_scan():
    rng = trial_rng(2024, 0)
    for _ in range(100):
        L = sample_x2_exact(rng)
        B = L.basis @ unimodular_int(2, rng, steps=2)
        L = make_lattice(B)
        # coefficient box large enough: |c_i| <= |dual row i| * lambda_1 with lambda_1 <= first column norm
        K = int(np.ceil(np.max(np.linalg.norm(np.linalg.inv(B), axis=1)) * np.linalg.norm(B[:, 0]))) + 1
        assert np.isclose(np.linalg.norm(shortest_vector(L)), grid_shortest_norm(B, K), rtol=1e-12)


def test_shortest_is_deterministic():
    L = sample_xd_siegel(3, trial_rng(9, 9))
    np.testing.assert_array_equal(shortest_vector(L), shortest_vector(make_lattice(L.basis.copy())))


# -- enumeration guard -------------------------------------------------------

def test_enumeration_overflow():
    L = make_lattice(np.eye(3))
    _, R = L.qr
    with pytest.raises(EnumerationOverflow):
        enumerate_coeffs(R, np.zeros(3), 1e4)


# -- io ----------------------------------------------------------------------

def test_load_basis_json_and_text(tmp_path):
    B = [[1.0, 100.5], [0.0, 1.0]]
    p = tmp_path / "b.json"
    p.write_text(json.dumps(B))
    np.testing.assert_array_equal(load_basis(p), B)
    p = tmp_path / "b.txt"
    p.write_text("1 100.5\n0 1\n")
    np.testing.assert_array_equal(load_basis(p), B)


def test_thread_safe_lazy_reduction():
    from concurrent.futures import ThreadPoolExecutor

    L = UnimodularLattice(sample_xd_siegel(4, trial_rng(1, 2)).basis)
    with ThreadPoolExecutor(8) as pool:
        out = list(pool.map(lambda _: L.reduced_basis, range(16)))
    assert all(o is out[0] for o in out)


def test_reduction_preserves_orientation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        B = sample_rotation(3, rng) @ unimodular_int(3, rng)
        assert np.linalg.det(lll_reduce(B)) > 0
