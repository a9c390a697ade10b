"""Deterministic 3D binary-collision kinematics.

A collision between velocities v and v* with deviation angle theta and
azimuth phi changes v by

    a = -(1 - cos(theta))/2 * (v - v*) + sin(theta)/2 * T(v - v*, phi)

where T(X, phi) sweeps the circle of radius |X| in the plane orthogonal to X.
The partner velocity receives -a, so the pair update conserves momentum by
construction and kinetic energy identically in exact arithmetic
(a . (v - v*) = -|a|^2).

Frame convention (fixed so results are reproducible): e1 = X/|X|; e2 is the
coordinate axis least aligned with X, Gram-Schmidt'ed against e1 (ties broken
x before y before z); e3 = e1 x e2.  Any measurable convention yields the same
process law; this one is branch-stable away from axis-alignment boundaries.

All functions broadcast over leading dimensions and are pure.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .kernels import KernelSpec, deflection_angle

TWO_PI = 2.0 * math.pi


class Frame(NamedTuple):
    """Right-handed orthonormal triple with e1 along the defining vector."""

    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray


def _check_vec(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != 3:
        raise DomainError(f"{name} must have 3 components")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def frame_of(x_vec) -> Frame:
    """Deterministic right-handed orthonormal frame with e1 = X/|X|."""
    x = _check_vec(x_vec, "x_vec")
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise DomainError("cannot build a frame for the zero vector")
    n = x / norm
    pick = np.argmin(np.abs(n), axis=-1)
    axis = np.eye(3)[pick]
    e2 = axis - np.sum(axis * n, axis=-1, keepdims=True) * n
    e2 = e2 / np.linalg.norm(e2, axis=-1, keepdims=True)
    e3 = np.cross(n, e2)
    return Frame(n, e2, e3)


def transverse_vector(x_vec, phi) -> np.ndarray:
    """Vector of norm |X| orthogonal to X at azimuth phi in the transverse plane."""
    x = _check_vec(x_vec, "x_vec")
    f = frame_of(x)
    norm = np.linalg.norm(x, axis=-1)
    c = np.cos(phi) * norm
    s = np.sin(phi) * norm
    return c[..., None] * f.e2 + s[..., None] * f.e3


def deflection(v, v_star, theta, phi) -> np.ndarray:
    """Velocity change of the first particle for deviation angle theta, azimuth phi.

    Satisfies |a| = sqrt((1 - cos(theta))/2) * |v - v*| identically.  The pair
    with equal velocities is a fixed point: zero is returned.
    """
    v = _check_vec(v, "v")
    vs = _check_vec(v_star, "v_star")
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > math.pi / 2 + 1e-15):
        raise DomainError("theta must lie in [0, pi/2]")
    x = v - vs
    norm = np.linalg.norm(x, axis=-1)
    zero = norm == 0.0
    safe = np.where(zero[..., None], 1.0, x)
    f = frame_of(safe)
    cphi = np.cos(phi)
    sphi = np.sin(phi)
    trans = (cphi * norm)[..., None] * f.e2 + (sphi * norm)[..., None] * f.e3
    a = -0.5 * (1.0 - np.cos(th))[..., None] * x + 0.5 * np.sin(th)[..., None] * trans
    return np.where(zero[..., None], 0.0, a)


def deflection_z(spec: KernelSpec, v, v_star, z, phi, cutoff_k=math.inf) -> np.ndarray:
    """Deflection in the accumulated-rate parameterization, truncated at z > cutoff_k.

    The deviation angle is angle(z / |v - v*|^gamma); zero relative speed is
    the z -> infinity limit and produces no deflection.
    """
    v = _check_vec(v, "v")
    vs = _check_vec(v_star, "v_star")
    zz = np.asarray(z, dtype=float)
    if np.any(zz < 0.0):
        raise DomainError("z must be nonnegative")
    x = v - vs
    norm = np.linalg.norm(x, axis=-1)
    xg = np.where(norm > 0.0, norm, 1.0) ** spec.gamma
    theta = deflection_angle(spec, np.minimum(zz / xg, 1e300))
    theta = np.where((norm > 0.0) & (zz <= cutoff_k), theta, 0.0)
    return deflection(v, vs, theta, phi)


def collide_pair(spec: KernelSpec, v_i, v_j, z, phi, cutoff_k=math.inf):
    """Symmetric two-particle update: (v_i + a, v_j - a).

    The partner deflection is the momentum conjugate of the first, so the pair
    sum and the pair kinetic energy are preserved identically in exact
    arithmetic and to rounding in floats.
    """
    a = deflection_z(spec, v_i, v_j, z, phi, cutoff_k)
    return np.asarray(v_i, dtype=float) + a, np.asarray(v_j, dtype=float) - a


def alignment_angle(x_vec, y_vec) -> float:
    """Azimuthal offset that best aligns the transverse circle of Y with that of X.

    Returns the minimizer over psi of the mean squared mismatch between
    T(X, phi)/|X| and T(Y, phi + psi)/|Y| over a full azimuth sweep, in
    [0, 2*pi).  Computed in closed form from the two transverse frames.
    Antipodal X, Y make every psi a minimizer; 0 is returned (documented
    degenerate case).  Invariant under positive scaling of either argument.
    """
    fx = frame_of(x_vec)
    fy = frame_of(y_vec)
    c = float(np.dot(fx.e2, fy.e2) + np.dot(fx.e3, fy.e3))
    s = float(np.dot(fx.e2, fy.e3) - np.dot(fx.e3, fy.e2))
    if math.hypot(c, s) < 1e-12:
        return 0.0
    return math.atan2(s, c) % TWO_PI
