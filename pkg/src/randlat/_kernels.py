"""Compiled inner loops: LLL reduction and Fincke-Pohst enumeration.

Bases are stored column-wise throughout (column j is the j-th basis vector).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _gso(B):
    d = B.shape[1]
    mu = np.eye(d)
    bn = np.zeros(d)
    Bs = np.zeros_like(B)
    n = B.shape[0]
    for i in range(d):
        for r in range(n):
            Bs[r, i] = B[r, i]
        for j in range(i):
            s = 0.0
            for r in range(n):
                s += B[r, i] * Bs[r, j]
            mu[i, j] = s / bn[j]
            for r in range(n):
                Bs[r, i] -= mu[i, j] * Bs[r, j]
        s = 0.0
        for r in range(n):
            s += Bs[r, i] * Bs[r, i]
        bn[i] = s
    return mu, bn


@njit(cache=True)
def lll_kernel(B, delta, max_iter):
    """LLL-reduce the columns of B.

    Returns (U, status) with B @ U reduced; status is 0 on success, 1 when a
    Gram-Schmidt norm collapses and 2 when the iteration cap is hit.
    """
    d = B.shape[1]
    B = B.copy()
    U = np.eye(d, dtype=np.int64)
    mu, bn = _gso(B)
    scale = bn.max()
    k = 1
    it = 0
    while k < d:
        it += 1
        if it > max_iter:
            return U, 2
        for j in range(k - 1, -1, -1):
            q = np.rint(mu[k, j])
            if q != 0.0:
                qi = np.int64(q)
                B[:, k] -= q * B[:, j]
                U[:, k] -= qi * U[:, j]
                for l in range(j):
                    mu[k, l] -= q * mu[j, l]
                mu[k, j] -= q
        if bn[k] >= (delta - mu[k, k - 1] ** 2) * bn[k - 1]:
            k += 1
        else:
            for i in range(d):
                tmp = B[i, k]
                B[i, k] = B[i, k - 1]
                B[i, k - 1] = tmp
                ti = U[i, k]
                U[i, k] = U[i, k - 1]
                U[i, k - 1] = ti
            mu, bn = _gso(B)
            if bn.min() < 1e-24 * scale:
                return U, 1
            k = max(k - 1, 1)
    return U, 0


@njit(cache=True)
def fp_enumerate(R, t, r2, out, early_exit, exclude_zero):
    """Depth-first enumeration of integer c with ||R c - t||^2 <= r2.

    R is upper triangular with positive diagonal. Coefficient vectors are
    written to the rows of ``out`` while there is room; the return value is the
    total number found, so a caller can detect truncation and retry.
    """
    d = R.shape[0]
    cap = out.shape[0]
    c = np.zeros(d, dtype=np.int64)
    hi = np.zeros(d, dtype=np.int64)
    ctr = np.zeros(d)
    rem = np.zeros(d + 1)
    rem[d] = r2
    count = 0

    k = d - 1
    w = np.sqrt(r2) / R[k, k]
    ctr[k] = t[k] / R[k, k]
    c[k] = np.int64(np.ceil(ctr[k] - w)) - 1
    hi[k] = np.int64(np.floor(ctr[k] + w))
    while True:
        c[k] += 1
        if c[k] > hi[k]:
            k += 1
            if k == d:
                break
            continue
        diff = R[k, k] * (c[k] - ctr[k])
        rem[k] = rem[k + 1] - diff * diff
        if rem[k] < 0.0:
            continue
        if k == 0:
            if exclude_zero:
                nz = False
                for i in range(d):
                    if c[i] != 0:
                        nz = True
                        break
                if not nz:
                    continue
            if count < cap:
                for i in range(d):
                    out[count, i] = c[i]
            count += 1
            if early_exit:
                return count
        else:
            k -= 1
            s = t[k]
            for j in range(k + 1, d):
                s -= R[k, j] * c[j]
            ctr[k] = s / R[k, k]
            w = np.sqrt(rem[k + 1]) / R[k, k]
            c[k] = np.int64(np.ceil(ctr[k] - w)) - 1
            hi[k] = np.int64(np.floor(ctr[k] + w))
    return count


@njit(cache=True)
def reduce_and_factor(B, delta, max_iter):
    """LLL transform plus QR of the reduced basis, in one call.

    Returns (U, Br, Q, R, status). Status 3 flags an input whose Gram-Schmidt
    norms span more than 1e12 (an ill-conditioned basis).
    """
    d = B.shape[1]
    _, bn0 = _gso(B)
    if np.sqrt(bn0.max() / bn0.min()) > 1e12:
        z = np.zeros((d, d))
        return np.eye(d, dtype=np.int64), z, z, z, 3
    U, status = lll_kernel(B, delta, max_iter)
    # keep orientation: flipping a column's sign leaves the basis LLL-reduced
    if np.linalg.det(U.astype(np.float64)) < 0:
        U[:, d - 1] = -U[:, d - 1]
    Uf = U.astype(np.float64)
    Br = B @ Uf
    mu, bn = _gso(Br)
    R = np.zeros((d, d))
    Q = np.zeros((d, d))
    for i in range(d):
        R[i, i] = np.sqrt(bn[i])
        for j in range(i):
            R[j, i] = mu[i, j] * R[j, j]
    # Q = Br R^-1, column by column (R upper triangular)
    for i in range(d):
        for r in range(d):
            s = Br[r, i]
            for j in range(i):
                s -= Q[r, j] * R[j, i]
            Q[r, i] = s / R[i, i]
    return U, Br, Q, R, status
