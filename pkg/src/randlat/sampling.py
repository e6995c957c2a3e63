"""Random lattices from the Haar probability measures on X_d and Y_d.

Three constructions of a Haar-random unimodular lattice are provided:

* ``exact2`` -- d = 2 only: hyperbolic-measure rejection sampling in the
  modular fundamental domain, then a uniform rotation.
* ``siegel`` -- 2 <= d <= 4: Iwasawa coordinates g = k a n drawn from the
  Haar density on a Siegel box, accepted iff the basis a n is HKZ-reduced.
* ``hecke`` -- any d: a uniformly chosen index-p sublattice of Z^d rescaled
  to covolume one (approximately Haar, bias shrinking with p).

Affine lattices add an offset uniform on the torus R^d / L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from randlat import _kernels
from randlat.errors import ConfigError, NotPrime, RejectionStall
from randlat.lattice import AffineUnimodularLattice, UnimodularLattice

METHODS = ("exact2", "siegel", "hecke")
DEFAULT_HECKE_PRIME = 10007
MAX_REJECTIONS = 10**6
SQRT3_2 = math.sqrt(3.0) / 2


@dataclass(frozen=True)
class RngState:
    master_seed: int
    stream_index: int

    def generator(self) -> np.random.Generator:
        return trial_rng(self.master_seed, self.stream_index)


def trial_rng(seed, index) -> np.random.Generator:
    """Independent generator for trial ``index``; depends only on (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class SamplerSpec:
    method: str
    d: int
    hecke_prime: int = DEFAULT_HECKE_PRIME
    # negative-control hook: draw from the Siegel box without the fundamental-domain test
    skip_rejection: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown sampler {self.method!r}; choose from {METHODS}")
        if self.method == "exact2" and self.d != 2:
            raise ConfigError("exact2 sampler requires d = 2")
        if self.method == "siegel" and not 2 <= self.d <= 4:
            raise ConfigError("siegel sampler supports 2 <= d <= 4")
        if self.method == "hecke":
            if self.d < 2:
                raise ConfigError("hecke sampler requires d >= 2")
            if self.hecke_prime < 101:
                raise ConfigError("hecke prime must be >= 101")
            if not is_prime(self.hecke_prime):
                raise NotPrime(f"{self.hecke_prime} is not prime")
        if self.d > 8:
            raise ConfigError("dimensions above 8 are not supported")


def is_prime(p) -> bool:
    from sympy import isprime

    return bool(isprime(int(p)))


def sample_rotation(d, rng):
    """Haar-random element of SO(d)."""
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, -1] = -Q[:, -1]
    return Q


def _rot2(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def draw_modular_point(rng, skip_rejection=False):
    """(x, y, proposals): a point of the modular fundamental domain under dx dy / y^2.

    Proposals come from the strip |x| <= 1/2, y >= sqrt(3)/2 with density
    proportional to y^-2 (y = (sqrt(3)/2) / u, u uniform on (0, 1]).
    """
    tries = 0
    while True:
        tries += 1
        y = SQRT3_2 / (1.0 - rng.random())
        x = rng.random() - 0.5
        if skip_rejection or x * x + y * y >= 1.0:
            return x, y, tries


def sample_x2_exact(rng, skip_rejection=False) -> UnimodularLattice:
    x, y, _ = draw_modular_point(rng, skip_rejection)
    theta = rng.uniform(0.0, 2 * math.pi)
    ry = math.sqrt(y)
    upper = np.array([[1 / ry, x / ry], [0.0, ry]])
    return UnimodularLattice(_rot2(theta) @ upper)


def siegel_rates(d):
    """Exponential rates k(d-k) of the log-ratios s_k = log(a_{k+1}/a_k).

    The Haar density in g = k a n coordinates is prod_{i<j} a_i / a_j, and
    summing log(a_j/a_i) = s_i + ... + s_{j-1} over pairs i < j counts s_k
    once for each of the k(d-k) pairs straddling k. For d = 2 this is
    exp(-s) ds = dy / y^2 with y = a_2 / a_1, the hyperbolic measure.
    """
    return np.array([k * (d - k) for k in range(1, d)], dtype=float)


def is_hkz_reduced(T, rtol=1e-10):
    """HKZ test for an upper-triangular basis with positive diagonal.

    Requires each T[k, k] to be the length of a shortest nonzero vector of the
    projected lattice spanned by the columns of T[k:, k:]. Size reduction is
    not checked here.
    """
    d = T.shape[0]
    out = np.empty((1, d), dtype=np.int64)
    for k in range(d - 1):
        block = np.ascontiguousarray(T[k:, k:])
        r2 = T[k, k] ** 2 * (1 - rtol)
        if _kernels.fp_enumerate(block, np.zeros(d - k), r2, out, True, True):
            return False
    return True


def draw_siegel_upper(d, rng, skip_rejection=False):
    """Upper-triangular a n from the Siegel box, accepted iff HKZ-reduced."""
    rates = siegel_rates(d)
    lo = math.log(SQRT3_2)
    iu = np.triu_indices(d, 1)
    for _ in range(MAX_REJECTIONS):
        s = lo + rng.exponential(1.0 / rates)
        u = np.concatenate(([0.0], np.cumsum(s)))
        a = np.exp(u - u.mean())
        n = np.eye(d)
        n[iu] = rng.random(len(iu[0])) - 0.5
        T = a[:, None] * n
        if skip_rejection or is_hkz_reduced(T):
            return T
    raise RejectionStall(f"{MAX_REJECTIONS} consecutive rejections in the siegel sampler (d={d})")


def sample_xd_siegel(d, rng, skip_rejection=False) -> UnimodularLattice:
    if not 2 <= d <= 4:
        raise ConfigError("siegel sampler supports 2 <= d <= 4")
    T = draw_siegel_upper(d, rng, skip_rejection)
    return UnimodularLattice(sample_rotation(d, rng) @ T)


def hecke_hnf(d, p, rng):
    """Uniformly random Hermite normal form of an index-p sublattice of Z^d.

    A pivot in row j (0-based) has p^(d-1-j) completions: free entries to the
    right of the pivot in that row, each in {0, ..., p-1}.
    """
    w = np.array([float(p) ** (d - 1 - j) for j in range(d)])
    j = int(rng.choice(d, p=w / w.sum()))
    H = np.eye(d, dtype=np.int64)
    H[j, j] = p
    H[j, j + 1:] = rng.integers(0, p, size=d - 1 - j)
    return H


def sample_xd_hecke(d, p, rng) -> UnimodularLattice:
    if not is_prime(p):
        raise NotPrime(f"{p} is not prime")
    H = hecke_hnf(d, p, rng)
    B = H.astype(float) * float(p) ** (-1.0 / d)
    return UnimodularLattice(sample_rotation(d, rng) @ B)


def sample_lattice(spec: SamplerSpec, rng) -> UnimodularLattice:
    if spec.method == "exact2":
        return sample_x2_exact(rng, spec.skip_rejection)
    if spec.method == "siegel":
        return sample_xd_siegel(spec.d, rng, spec.skip_rejection)
    return sample_xd_hecke(spec.d, spec.hecke_prime, rng)


def sample_affine(spec: SamplerSpec, rng) -> AffineUnimodularLattice:
    L = sample_lattice(spec, rng)
    return AffineUnimodularLattice(L, L.basis @ rng.random(spec.d))


def sample_torsion_affine(spec: SamplerSpec, q, rng) -> AffineUnimodularLattice:
    """Exploratory: offset B k / q with k uniform among primitive q-torsion classes."""
    if q < 2:
        raise ValueError("q must be >= 2")
    L = sample_lattice(spec, rng)
    while True:
        k = rng.integers(0, q, size=spec.d)
        if math.gcd(*k.tolist(), q) == 1:
            break
    return AffineUnimodularLattice(L, L.basis @ (k / q))
