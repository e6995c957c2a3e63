"""Bounded test sets A in R^d with exact volumes, and radial sets A in R^+.

Every region is closed (boundary points count as inside) and knows a ball
that contains it, which is what the enumerator needs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import betainc

from randlat.constants import unit_ball_volume
from randlat.errors import ConfigError, DimensionMismatch

BOUNDARY_TOL = 1e-12
DISJOINT_CHECK_POINTS = 10_000


def _vec(x):
    a = np.array(x, dtype=float)
    a.flags.writeable = False
    return a


class Region:
    d: int

    def volume(self) -> float:
        raise NotImplementedError

    def bounding_ball(self):
        raise NotImplementedError

    def _contains(self, pts):
        raise NotImplementedError

    def contains(self, v):
        """Membership for one vector (returns bool) or an (m, d) array (returns mask)."""
        pts = np.asarray(v, dtype=float)
        if pts.shape[-1] != self.d:
            raise DimensionMismatch(f"point dimension {pts.shape[-1]} vs region dimension {self.d}")
        if pts.ndim == 1:
            return bool(self._contains(pts[None, :])[0])
        return self._contains(pts)

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(Region):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def d(self):
        return self.center.shape[0]

    def volume(self):
        return unit_ball_volume(self.d) * self.radius**self.d

    def bounding_ball(self):
        return self.center, float(self.radius)

    def _contains(self, pts):
        r2 = np.sum((pts - self.center) ** 2, axis=1)
        return r2 <= self.radius**2 + BOUNDARY_TOL

    def to_json(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(Region):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if self.lo.shape != self.hi.shape:
            raise DimensionMismatch("box corners differ in dimension")
        if not np.all(self.lo < self.hi):
            raise ValueError("box needs lo < hi in every coordinate")

    @property
    def d(self):
        return self.lo.shape[0]

    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def bounding_ball(self):
        return _vec((self.lo + self.hi) / 2), float(np.linalg.norm(self.hi - self.lo) / 2)

    def _contains(self, pts):
        return np.all((pts >= self.lo - BOUNDARY_TOL) & (pts <= self.hi + BOUNDARY_TOL), axis=1)

    def to_json(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Annulus(Region):
    center: np.ndarray
    r_in: float
    r_out: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not 0 <= self.r_in < self.r_out:
            raise ValueError("annulus needs 0 <= r_in < r_out")

    @property
    def d(self):
        return self.center.shape[0]

    def volume(self):
        return unit_ball_volume(self.d) * (self.r_out**self.d - self.r_in**self.d)

    def bounding_ball(self):
        return self.center, float(self.r_out)

    def _contains(self, pts):
        r2 = np.sum((pts - self.center) ** 2, axis=1)
        return (r2 >= self.r_in**2 - BOUNDARY_TOL) & (r2 <= self.r_out**2 + BOUNDARY_TOL)

    def to_json(self):
        return {"type": "annulus", "center": self.center.tolist(), "r_in": self.r_in, "r_out": self.r_out}


@dataclass(frozen=True, eq=False)
class Predicate(Region):
    """User-supplied membership test; volume and bounding ball are declared, never integrated."""

    member: Callable
    center: np.ndarray
    radius: float
    declared_volume: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if self.radius < 0 or self.declared_volume < 0:
            raise ValueError("radius and volume must be nonnegative")

    @property
    def d(self):
        return self.center.shape[0]

    def volume(self):
        return float(self.declared_volume)

    def bounding_ball(self):
        return self.center, float(self.radius)

    def _contains(self, pts):
        return np.array([bool(self.member(p)) for p in pts], dtype=bool)

    def to_json(self):
        raise TypeError("predicate regions cannot be serialized")


@dataclass(frozen=True, eq=False)
class DisjointUnion(Region):
    members: tuple
    check_seed: int = field(default=0, repr=False)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("union needs at least one member")
        if len({m.d for m in members}) != 1:
            raise DimensionMismatch("union members differ in dimension")
        object.__setattr__(self, "members", members)
        _check_disjoint(members, self.check_seed)
        object.__setattr__(self, "_ball", _enclosing_ball([m.bounding_ball() for m in members]))

    @property
    def d(self):
        return self.members[0].d

    def volume(self):
        return float(sum(m.volume() for m in self.members))

    def bounding_ball(self):
        return self._ball

    def _contains(self, pts):
        mask = np.zeros(len(pts), dtype=bool)
        for m in self.members:
            mask |= m._contains(pts)
        return mask

    def to_json(self):
        return {"type": "union", "members": [m.to_json() for m in self.members]}


def _check_disjoint(members, seed):
    if len(members) < 2:
        return
    rng = np.random.default_rng(seed)
    for i, m in enumerate(members):
        c, r = m.bounding_ball()
        pts = c + rng.uniform(-r, r, size=(DISJOINT_CHECK_POINTS, m.d))
        pts = pts[m._contains(pts)]
        for j, other in enumerate(members):
            if j != i and np.any(other._contains(pts)):
                raise ValueError(f"union members {i} and {j} overlap")


def _enclosing_ball(balls):
    centers = np.array([c for c, _ in balls])
    radii = np.array([r for _, r in balls])

    def reach(c):
        return float(np.max(np.linalg.norm(centers - c, axis=1) + radii))

    if np.allclose(centers, centers[0], atol=0, rtol=0):
        c = centers[0]
    else:
        c0 = centers.mean(axis=0)
        c = minimize(reach, c0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12}).x
        if reach(c) > reach(c0):
            c = c0
    return _vec(c), reach(c)


def volume(R: Region) -> float:
    return R.volume()


def contains(R: Region, v):
    return R.contains(v)


def bounding_ball(R: Region):
    return R.bounding_ball()


def thin_box(V, t, d, center=None):
    """Box of volume V: one side V^(1/d) * t, the other d-1 sides V^(1/d) / t^(1/(d-1))."""
    s = V ** (1.0 / d)
    sides = np.array([s * t] + [s / t ** (1.0 / (d - 1))] * (d - 1))
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return Box(c - sides / 2, c + sides / 2)


def ball_of_volume(V, d, center=None):
    c = np.zeros(d) if center is None else center
    return Ball(c, (V / unit_ball_volume(d)) ** (1.0 / d))


def annulus_of_volume(V, d, ratio=0.5, center=None):
    """Annulus of volume V with r_in = ratio * r_out."""
    c = np.zeros(d) if center is None else center
    r_out = (V / (unit_ball_volume(d) * (1 - ratio**d))) ** (1.0 / d)
    return Annulus(c, ratio * r_out, r_out)


def cube_of_volume(V, d, center=None):
    return thin_box(V, 1.0, d, center)


@dataclass(frozen=True)
class RadialSet:
    """Finite union of closed intervals [a, b] in R^+, sorted and pairwise disjoint."""

    intervals: tuple = ()

    def __post_init__(self):
        iv = tuple((float(a), float(b)) for a, b in self.intervals)
        for a, b in iv:
            if not 0 <= a < b or not math.isfinite(b):
                raise ValueError(f"bad interval [{a}, {b}]")
        for (a0, b0), (a1, b1) in zip(iv, iv[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", iv)

    @property
    def upper(self):
        return self.intervals[-1][1] if self.intervals else 0.0

    def to_json(self):
        return {"type": "radial", "intervals": [list(i) for i in self.intervals]}


def radial_volume(S: RadialSet, d) -> float:
    """Lebesgue measure of {v in R^d : |v| in S} = sum N_d (b^d - a^d)."""
    nd = unit_ball_volume(d)
    return float(sum(nd * (b**d - a**d) for a, b in S.intervals))


def lift_radial(S: RadialSet, d) -> Region:
    if not S.intervals:
        raise ValueError("cannot lift an empty radial set")
    origin = np.zeros(d)
    parts = [Ball(origin, b) if a == 0 else Annulus(origin, a, b) for a, b in S.intervals]
    return parts[0] if len(parts) == 1 else DisjointUnion(tuple(parts))


def intersection_volume(R1: Region, R2: Region, mc_points=1_000_000, seed=0) -> float:
    """|R1 ∩ R2|: exact for box/box and ball/ball pairs, Monte Carlo otherwise."""
    if R1 is R2:
        return R1.volume()
    c1, r1 = R1.bounding_ball()
    c2, r2 = R2.bounding_ball()
    if np.linalg.norm(c1 - c2) > r1 + r2:
        return 0.0
    if isinstance(R1, Box) and isinstance(R2, Box):
        side = np.minimum(R1.hi, R2.hi) - np.maximum(R1.lo, R2.lo)
        return float(np.prod(np.clip(side, 0, None)))
    if isinstance(R1, Ball) and isinstance(R2, Ball):
        return _ball_ball_overlap(R1.d, float(np.linalg.norm(R1.center - R2.center)), R1.radius, R2.radius)
    rng = np.random.default_rng(seed)
    lo = c1 - r1
    pts = lo + rng.uniform(0, 2 * r1, size=(mc_points, R1.d))
    hit = R1._contains(pts) & R2._contains(pts)
    return float(hit.mean() * (2 * r1) ** R1.d)


def _cap(d, r, h):
    # volume of a cap of height h in [0, 2r] of a d-ball of radius r
    if h <= 0:
        return 0.0
    if h >= 2 * r:
        return unit_ball_volume(d) * r**d
    full = unit_ball_volume(d) * r**d
    x = (2 * r * h - h * h) / (r * r)
    half = 0.5 * full * betainc((d + 1) / 2, 0.5, x)
    return half if h <= r else full - half


def _ball_ball_overlap(d, dist, r1, r2):
    if dist >= r1 + r2:
        return 0.0
    if dist <= abs(r1 - r2):
        return unit_ball_volume(d) * min(r1, r2) ** d
    x1 = (dist * dist + r1 * r1 - r2 * r2) / (2 * dist)
    return _cap(d, r1, r1 - x1) + _cap(d, r2, r2 - (dist - x1))


def region_from_json(obj, d=None):
    """Build a Region (or RadialSet) from its JSON form; ``d`` is only needed for radial specs."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        kind = obj["type"]
        if kind == "ball":
            return Ball(obj["center"], float(obj["radius"]))
        if kind == "box":
            return Box(obj["lo"], obj["hi"])
        if kind == "annulus":
            return Annulus(obj["center"], float(obj["r_in"]), float(obj["r_out"]))
        if kind == "union":
            return DisjointUnion(tuple(region_from_json(m) for m in obj["members"]))
        if kind == "radial":
            S = RadialSet(tuple(tuple(iv) for iv in obj["intervals"]))
            return S if d is None else lift_radial(S, d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid region spec {obj!r}: {exc}") from exc
    raise ConfigError(f"unknown region type {obj.get('type')!r}")
