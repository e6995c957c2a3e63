"""Monte Carlo estimates of lattice-point statistics and the exact values they target.

For a random affine unimodular lattice and a region A the count
N_A = #(Λ ∩ A) satisfies E[N_A] = |A|, Var[N_A] = |A| and more generally
E[N_A N_B] = |A||B| + |A ∩ B|. The hole probability P(N_A = 0) is below
1/(1+|A|). For regular lattices (which always contain 0) the count is over
nonzero points and the hole bound is C_d/|A|.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from randlat.constants import rogers_constant, unit_ball_volume, zeta  # noqa: F401 (re-exported)
from randlat.counting import count_many, enclosing_reach
from randlat.errors import TimeBudgetExceeded
from randlat.lattice import dual as dual_lattice
from randlat.regions import Region, intersection_volume
from randlat.sampling import SamplerSpec, sample_affine, sample_lattice, trial_rng

SETTINGS = ("affine", "regular")
Z95 = 1.959963984540054
BOOTSTRAP_STREAM = 2**32 - 1


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    std_error: float
    ci_lo: float
    ci_hi: float
    n_trials: int
    seed: int

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    empirical: EstimateResult
    bound: float

    @property
    def slack(self):
        return self.bound - self.empirical.estimate

    @property
    def satisfied(self):
        return self.empirical.estimate - 3 * self.empirical.std_error <= self.bound


def bound_report(est: EstimateResult, bound: float) -> BoundReport:
    return BoundReport(est, float(bound))


def chebyshev(mean, var):
    """Hole-probability bound var / (var + mean^2) from the second-moment inequality."""
    if var == 0 and mean == 0:
        return 1.0
    return var / (var + mean * mean)


def theoretical_bounds(volume, d, setting):
    if volume < 0:
        raise ValueError("volume must be nonnegative")
    if setting == "affine":
        return 1.0 / (1.0 + volume)
    if setting == "regular":
        return math.inf if volume == 0 else rogers_constant(d) / volume
    raise ValueError(f"unknown setting {setting!r}")


# -- drawing counts -------------------------------------------------------

def _draw_one(spec, regions, reach, seed, i, setting, dual):
    rng = trial_rng(seed, i)
    if setting == "affine":
        lat = sample_affine(spec, rng)
    else:
        lat = sample_lattice(spec, rng)
        if dual:
            lat = dual_lattice(lat)
    return count_many(lat, regions, exclude_zero=setting == "regular", reach=reach)


def _draw_chunk(spec, regions, seed, start, stop, setting, dual, deadline):
    reach = enclosing_reach(regions)
    out = np.empty((stop - start, len(regions)), dtype=np.int64)
    for k, i in enumerate(range(start, stop)):
        if deadline is not None and k % 256 == 0 and time.monotonic() > deadline:
            raise TimeBudgetExceeded(f"time budget exhausted after {k} of {stop - start} trials")
        out[k] = _draw_one(spec, regions, reach, seed, i, setting, dual)
    return out


def draw_counts(spec: SamplerSpec, regions, n, seed, setting="affine", dual=False,
                workers=1, time_budget=None):
    """(n, len(regions)) array of counts; trial i always uses stream (seed, i).

    Regular-setting counts exclude the origin. With ``dual`` the counts are
    taken on the dual of each sampled lattice (regular setting only).
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")
    if dual and setting != "regular":
        raise ValueError("dual counting is only defined for regular lattices")
    regions = list(regions)
    deadline = None if time_budget is None else time.monotonic() + time_budget
    if workers <= 1:
        return _draw_chunk(spec, regions, seed, 0, n, setting, dual, deadline)
    bounds = np.linspace(0, n, workers * 4 + 1).astype(int)
    with ProcessPoolExecutor(workers) as pool:
        futs = [pool.submit(_draw_chunk, spec, regions, seed, a, b, setting, dual, deadline)
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        return np.concatenate([f.result() for f in futs])


# -- summaries ------------------------------------------------------------

def mean_result(x, seed) -> EstimateResult:
    x = np.asarray(x, dtype=float)
    n = len(x)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateResult(m, se, m - Z95 * se, m + Z95 * se, n, seed)


def variance_result(counts, seed, bootstrap_B=1000) -> EstimateResult:
    """Bessel-corrected variance with a percentile bootstrap interval.

    Counts are small integers, so each bootstrap replicate is a multinomial
    redraw of the value histogram rather than an index resample.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = len(counts)
    est = float(counts.var(ddof=1))
    values, freq = np.unique(counts, return_counts=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(BOOTSTRAP_STREAM,))))
    reps = rng.multinomial(n, freq / n, size=bootstrap_B)
    v = values.astype(float)
    s1 = reps @ v
    s2 = reps @ (v * v)
    boot = (s2 - s1 * s1 / n) / (n - 1)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return EstimateResult(est, float(boot.std(ddof=1)), float(min(lo, est)), float(max(hi, est)), n, seed)


def proportion_result(hits, seed) -> EstimateResult:
    """Proportion with Wald standard error and Wilson 95% interval."""
    from statsmodels.stats.proportion import proportion_confint

    hits = np.asarray(hits, dtype=bool)
    n = len(hits)
    k = int(hits.sum())
    p = k / n
    se = math.sqrt(p * (1 - p) / n)
    lo, hi = proportion_confint(k, n, alpha=0.05, method="wilson")
    return EstimateResult(p, se, float(min(lo, p)), float(max(hi, p)), n, seed)


# -- public estimators ------------------------------------------------------

def _need(n, minimum):
    if n < minimum:
        raise ValueError(f"need at least {minimum} trials, got {n}")


def estimate_mean(spec, R: Region, n, seed, setting="affine", **kw) -> EstimateResult:
    _need(n, 100)
    return mean_result(draw_counts(spec, [R], n, seed, setting, **kw)[:, 0], seed)


def estimate_variance(spec, R: Region, n, seed, bootstrap_B=1000, setting="affine", **kw) -> EstimateResult:
    _need(n, 1000)
    if bootstrap_B < 200:
        raise ValueError("bootstrap_B must be >= 200")
    return variance_result(draw_counts(spec, [R], n, seed, setting, **kw)[:, 0], seed, bootstrap_B)


def estimate_pair_moment(spec, R1: Region, R2: Region, n, seed, setting="affine", **kw) -> EstimateResult:
    _need(n, 100)
    c = draw_counts(spec, [R1, R2], n, seed, setting, **kw)
    return mean_result(c[:, 0] * c[:, 1], seed)


def pair_moment_target(R1: Region, R2: Region) -> float:
    """|A||B| + |A ∩ B|, the affine two-point value of E[N_A N_B]."""
    return R1.volume() * R2.volume() + intersection_volume(R1, R2)


def estimate_hole_prob(spec, R: Region, n, seed, setting="affine", **kw) -> EstimateResult:
    _need(n, 1000)
    return proportion_result(draw_counts(spec, [R], n, seed, setting, **kw)[:, 0] == 0, seed)


def check_hole_bound(spec, R: Region, n, seed, setting="affine", **kw) -> BoundReport:
    est = estimate_hole_prob(spec, R, n, seed, setting, **kw)
    return bound_report(est, theoretical_bounds(R.volume(), R.d, setting))


__all__ = [
    "EstimateResult", "BoundReport", "bound_report", "chebyshev", "theoretical_bounds",
    "zeta", "unit_ball_volume", "rogers_constant", "draw_counts", "mean_result",
    "variance_result", "proportion_result", "estimate_mean", "estimate_variance",
    "estimate_pair_moment", "pair_moment_target", "estimate_hole_prob", "check_hole_bound",
]
