"""Length spectra of flat tori R^d / L and the hole bound for random tori.

The spectrum here is the set of lengths |w| of nonzero dual vectors w in L*.
Laplace eigenvalues of the torus are 4 pi^2 |w|^2; convert with
``laplace_eigenvalues`` if needed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from randlat.constants import rogers_constant
from randlat.counting import enumerate_in_ball, is_empty
from randlat.estimators import BoundReport, bound_report, proportion_result
from randlat.lattice import UnimodularLattice, dual
from randlat.regions import RadialSet, lift_radial, radial_volume
from randlat.errors import TimeBudgetExceeded
from randlat.sampling import SamplerSpec, sample_lattice, trial_rng

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SpectrumSample:
    lengths: np.ndarray
    cutoff: float


def spectrum_up_to(L: UnimodularLattice, cutoff) -> SpectrumSample:
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    pts = enumerate_in_ball(dual(L), np.zeros(L.d), cutoff, exclude_zero=True)
    norms = np.sort(np.linalg.norm(pts, axis=1))
    norms = norms[(norms > ZERO_TOL) & (norms <= cutoff + 1e-12)]
    return SpectrumSample(norms, float(cutoff))


def laplace_eigenvalues(sample: SpectrumSample):
    return 4 * math.pi**2 * sample.lengths**2


def spectrum_hole(L: UnimodularLattice, S: RadialSet) -> bool:
    """True iff no nonzero dual vector has its length in S."""
    if not S.intervals:
        return True
    return is_empty(dual(L), lift_radial(S, L.d), exclude_zero=True)


def spectrum_bound(S: RadialSet, d) -> float:
    vol = radial_volume(S, d)
    return math.inf if vol == 0 else rogers_constant(d) / vol


def verify_spectrum_bound(spec: SamplerSpec, S: RadialSet, n, seed, time_budget=None) -> BoundReport:
    """Empirical P(spectrum misses S) over n Haar-random tori against C_d / |S|_d."""
    if n < 1000:
        raise ValueError(f"need at least 1000 trials, got {n}")
    deadline = None if time_budget is None else time.monotonic() + time_budget
    holes = np.empty(n, dtype=bool)
    for i in range(n):
        if deadline is not None and i % 256 == 0 and time.monotonic() > deadline:
            raise TimeBudgetExceeded(f"time budget exhausted after {i} of {n} trials")
        holes[i] = spectrum_hole(sample_lattice(spec, trial_rng(seed, i)), S)
    return bound_report(proportion_result(holes, seed), spectrum_bound(S, spec.d))
