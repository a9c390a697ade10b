"""Angular collision-kernel math for hard spheres and hard power-law potentials.

The collision rate factorises as |v - v*|^gamma * beta(theta) with the angular
density beta supported on (0, pi/2).  Two families are supported:

* hard spheres: beta = 1, gamma = 1;
* power law: beta(theta) = theta^(-1-nu) with nu in (0, 1) and gamma in (0, 1),
  which is non-integrable at 0 (grazing collisions).

Everything here is derived from the tail mass of beta,

    angular_tail(theta)   = integral of beta over [theta, pi/2],

and its inverse map ``deflection_angle`` that converts an accumulated-rate
coordinate z back into a deflection angle.  For hard spheres the inverse is
max(pi/2 - z, 0); for the power law it has the closed form
(nu*z + (pi/2)^(-nu))^(-1/nu).

All functions are pure and thread-safe.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError

PI_HALF = 0.5 * math.pi

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=200)


class Family(enum.Enum):
    HARD_SPHERE = "hard_sphere"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class KernelSpec:
    """Collision kernel family with its velocity and angular exponents.

    ``gamma`` is the relative-speed exponent; ``nu`` the angular singularity
    exponent (power law only, ``None`` for hard spheres).
    """

    family: Family
    gamma: float = 1.0
    nu: float | None = None

    def __post_init__(self):
        if self.family is Family.HARD_SPHERE:
            if self.gamma != 1.0:
                raise DomainError("hard spheres require gamma = 1")
            if self.nu is not None:
                raise DomainError("nu is not meaningful for hard spheres")
        else:
            if not 0.0 < self.gamma < 1.0:
                raise DomainError(f"power law requires 0 < gamma < 1, got {self.gamma}")
            if self.nu is None or not 0.0 < self.nu < 1.0:
                raise DomainError(f"power law requires 0 < nu < 1, got {self.nu}")


def hard_sphere() -> KernelSpec:
    return KernelSpec(Family.HARD_SPHERE)


def power_law(gamma: float, nu: float) -> KernelSpec:
    return KernelSpec(Family.POWER_LAW, gamma, nu)


def _as_float_array(x, name: str):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _scalar_like(out: np.ndarray, template) -> float | np.ndarray:
    return float(out) if np.isscalar(template) or np.ndim(template) == 0 else out


def angular_density(spec: KernelSpec, theta) -> float | np.ndarray:
    """Angular rate density beta(theta) on the open interval (0, pi/2)."""
    th = _as_float_array(theta, "theta")
    if np.any(th <= 0.0) or np.any(th >= PI_HALF):
        raise DomainError("theta must lie strictly inside (0, pi/2)")
    if spec.family is Family.HARD_SPHERE:
        out = np.ones_like(th)
    else:
        out = th ** (-1.0 - spec.nu)
    return _scalar_like(out, theta)


def angular_tail(spec: KernelSpec, theta) -> float | np.ndarray:
    """Tail mass of beta over [theta, pi/2]; strictly decreasing, zero at pi/2."""
    th = _as_float_array(theta, "theta")
    if np.any(th <= 0.0) or np.any(th > PI_HALF):
        raise DomainError("theta must lie in (0, pi/2]")
    if spec.family is Family.HARD_SPHERE:
        out = PI_HALF - th
    else:
        nu = spec.nu
        out = (th ** -nu - PI_HALF ** -nu) / nu
    return _scalar_like(out, theta)


def tail_at_zero(spec: KernelSpec) -> float:
    """Limit of the tail mass at theta -> 0+ (finite only for hard spheres)."""
    return PI_HALF if spec.family is Family.HARD_SPHERE else math.inf


def deflection_angle(spec: KernelSpec, z) -> float | np.ndarray:
    """Inverse of the tail mass: maps accumulated rate z >= 0 to an angle.

    Hard spheres return max(pi/2 - z, 0); zero means "no deflection" and is
    the only place this map may vanish.  The power-law inverse is strictly
    positive for every finite z.
    """
    zz = _as_float_array(z, "z")
    if np.any(zz < 0.0):
        raise DomainError("z must be nonnegative")
    if spec.family is Family.HARD_SPHERE:
        out = np.maximum(PI_HALF - zz, 0.0)
    else:
        nu = spec.nu
        out = (nu * zz + PI_HALF ** -nu) ** (-1.0 / nu)
    return _scalar_like(out, z)


def _one_minus_cos_angle(spec: KernelSpec, z, x_pow_gamma: float):
    theta = deflection_angle(spec, np.asarray(z) / x_pow_gamma)
    return 1.0 - np.cos(theta)


def deflection_integral(spec: KernelSpec, x: float, k: float) -> float:
    """pi * integral over z in [0, k] of (1 - cos(angle(z / x^gamma))).

    The x -> 0 limit is taken as zero: vanishing relative speed produces no
    deflection at any z.
    """
    if x < 0.0:
        raise DomainError("relative speed must be nonnegative")
    if k < 1.0:
        raise DomainError("cutoff level must be >= 1")
    if x == 0.0:
        return 0.0
    xg = x ** spec.gamma
    if spec.family is Family.HARD_SPHERE:
        upper = min(k, PI_HALF * xg)
        if upper <= 0.0:
            return 0.0
        val, _ = integrate.quad(lambda z: _one_minus_cos_angle(spec, z, xg), 0.0, upper, **_QUAD_OPTS)
    else:
        val, _ = integrate.quad(lambda z: _one_minus_cos_angle(spec, z, xg), 0.0, k, **_QUAD_OPTS)
    return math.pi * val


def deflection_tail_integral(spec: KernelSpec, x: float, k: float) -> float:
    """pi * integral over z in [k, inf) of (1 - cos(angle(z / x^gamma)))."""
    if x < 0.0:
        raise DomainError("relative speed must be nonnegative")
    if k < 1.0:
        raise DomainError("cutoff level must be >= 1")
    if x == 0.0:
        return 0.0
    xg = x ** spec.gamma
    if spec.family is Family.HARD_SPHERE:
        support = PI_HALF * xg
        if k >= support:
            return 0.0
        val, _ = integrate.quad(lambda z: _one_minus_cos_angle(spec, z, xg), k, support, **_QUAD_OPTS)
    else:
        val, _ = integrate.quad(
            lambda z: _one_minus_cos_angle(spec, z, xg), k, np.inf, **_QUAD_OPTS
        )
    return math.pi * val


def tanaka_bound_lhs(spec: KernelSpec, x: float, y: float) -> float:
    """integral over z of (angle(z/x) - angle(z/y))^2, the coupled-angle mismatch."""
    if x <= 0.0 or y <= 0.0:
        raise DomainError("speeds must be positive")

    def integrand(z):
        return (deflection_angle(spec, z / x) - deflection_angle(spec, z / y)) ** 2

    if spec.family is Family.HARD_SPHERE:
        support = PI_HALF * max(x, y)
        kinks = sorted({PI_HALF * x, PI_HALF * y})
        val, _ = integrate.quad(integrand, 0.0, support, points=kinks, **_QUAD_OPTS)
    else:
        val, _ = integrate.quad(integrand, 0.0, np.inf, **_QUAD_OPTS)
    return val


@lru_cache(maxsize=None)
def tanaka_coupling_constant(spec: KernelSpec) -> float:
    """Calibrated constant c such that lhs <= c (x-y)^2 / (x+y) on a log grid.

    The literature provides the constant non-constructively; we take the grid
    supremum of lhs * (x+y) / (x-y)^2 over speeds in [1e-2, 1e2] and add a 5%
    safety margin.  Cached per kernel spec.
    """
    grid = np.logspace(-2.0, 2.0, 13)
    sup = 0.0
    for x in grid:
        for y in grid:
            if x >= y:
                continue
            ratio = tanaka_bound_lhs(spec, x, y) * (x + y) / (x - y) ** 2
            sup = max(sup, ratio)
    return 1.05 * sup


def tanaka_bound_check(spec: KernelSpec, x: float, y: float) -> bool:
    """Whether the squared-angle mismatch obeys the calibrated (x-y)^2/(x+y) bound."""
    lhs = tanaka_bound_lhs(spec, x, y)
    if x == y:
        return True
    rhs = tanaka_coupling_constant(spec) * (x - y) ** 2 / (x + y)
    return lhs <= rhs * (1.0 + 1e-12) + 1e-15


def _moment_damping_integrand(p: float):
    def g(theta):
        half = 0.5 * theta
        return 1.0 - math.cos(half) ** p - math.sin(half) ** p

    return g


def povzner_constant(p: float, spec: KernelSpec) -> float:
    """Moment-damping coefficient: integral of [1 - cos^p(t/2) - sin^p(t/2)] beta(t) dt.

    Strictly positive for p > 2 (the integrand vanishes identically at p = 2).
    For the power law the endpoint singularity theta^(-1-nu) is tamed by the
    O(theta^2) zero of the bracket; we integrate in the substituted variable
    u = theta^(1-nu) so the transformed integrand is bounded.
    """
    if p <= 2.0:
        raise DomainError("moment order must exceed 2")
    g = _moment_damping_integrand(p)
    if spec.family is Family.HARD_SPHERE:
        val, _ = integrate.quad(g, 0.0, PI_HALF, **_QUAD_OPTS)
        return val
    nu = spec.nu
    e = 1.0 - nu

    def integrand(u):
        if u <= 0.0:
            return 0.0
        theta = u ** (1.0 / e)
        return g(theta) * u ** (-1.0 / e) / e

    val, _ = integrate.quad(integrand, 0.0, PI_HALF ** e, **_QUAD_OPTS)
    return val


@lru_cache(maxsize=None)
def envelope_constants(spec: KernelSpec) -> tuple[float, float]:
    """Constants (lo, hi) with lo*(1+z)^(-1/nu) <= angle(z) <= hi*(1+z)^(-1/nu).

    Power law only.  The ratio angle(z)*(1+z)^(1/nu) is continuous and positive
    with finite limits pi/2 at z=0 and nu^(-1/nu) at infinity, so a dense-grid
    min/max with a tiny margin yields valid envelope constants.
    """
    if spec.family is not Family.POWER_LAW:
        raise DomainError("the envelope bound applies to power-law kernels only")
    z = np.concatenate([[0.0], np.logspace(-8.0, 9.0, 4000)])
    ratio = deflection_angle(spec, z) * (1.0 + z) ** (1.0 / spec.nu)
    asymptote = spec.nu ** (-1.0 / spec.nu)
    lo = min(float(ratio.min()), PI_HALF, asymptote) * (1.0 - 1e-6)
    hi = max(float(ratio.max()), PI_HALF, asymptote) * (1.0 + 1e-6)
    return lo, hi
