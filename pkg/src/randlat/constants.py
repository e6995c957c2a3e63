"""Closed-form constants: zeta values, unit-ball volumes, the regular-lattice hole constant."""
import math

from scipy.special import zeta as _hurwitz_zeta

from randlat.errors import DomainError


def zeta(s):
    """Riemann zeta for real s > 1."""
    s = float(s)
    if not s > 1:
        raise DomainError(f"zeta(s) requires s > 1, got {s}")
    return float(_hurwitz_zeta(s, 1.0))


def unit_ball_volume(d):
    """Volume of the unit ball in R^d, pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def rogers_constant(d):
    """Constant C_d of the regular-lattice hole bound C_d / |A|.

    16 zeta(2) in the plane, 8 zeta(d-1) / zeta(d) from d = 3 on.
    """
    if d < 2:
        raise DomainError("dimension must be >= 2")
    if d == 2:
        return 16 * zeta(2)
    return 8 * zeta(d - 1) / zeta(d)
