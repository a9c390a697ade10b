"""Compiled event loop for the binary-collision jump process.

The total proposal rate pi * N * z_range is constant in time for both kernel
families (the hard-sphere majorant depends only on the conserved total
energy), so the event schedule is a homogeneous Poisson process and the whole
loop consumes pre-drawn uniforms.  One event consumes one row of the uniform
matrix, in order: interarrival draw, pair draw, z draw, azimuth draw.

State mutation is in place; a single run is strictly sequential.  All kernels
release the GIL so replicas can execute on a thread pool.
"""

import math

import numpy as np
from numba import njit

HARD_SPHERE = 0
POWER_LAW = 1

TWO_PI = 2.0 * math.pi
PI_HALF = 0.5 * math.pi


@njit(cache=True)
def pair_from_uniform(u, n):
    """Decode one uniform into an ordered pair (i, j), i < j, uniform over pairs."""
    m = n * (n - 1) // 2
    k = int(u * m)
    if k >= m:
        k = m - 1
    tmp = 2 * n - 1
    i = int((tmp - math.sqrt(tmp * tmp - 8.0 * k)) * 0.5)
    while i * (2 * n - i - 1) // 2 > k:
        i -= 1
    while (i + 1) * (2 * n - i - 2) // 2 <= k:
        i += 1
    j = k - i * (2 * n - i - 1) // 2 + i + 1
    return i, j


@njit(cache=True, inline="always")
def _deflection_angle(family, gamma, nu, pihalf_neg_nu, z, x):
    """Deviation angle for rate coordinate z at relative speed x; 0 = no deflection."""
    if x <= 0.0:
        return 0.0
    xg = x**gamma
    if xg == 0.0:
        return 0.0
    w = z / xg
    if family == HARD_SPHERE:
        t = PI_HALF - w
        return t if t > 0.0 else 0.0
    return (nu * w + pihalf_neg_nu) ** (-1.0 / nu)


@njit(cache=True, inline="always")
def _transverse_frame(n0, n1, n2):
    """Unit e2, e3 completing n to a right-handed frame (axis least aligned with n)."""
    a0 = abs(n0)
    a1 = abs(n1)
    a2 = abs(n2)
    if a0 <= a1 and a0 <= a2:
        b0, b1, b2 = 1.0, 0.0, 0.0
    elif a1 <= a2:
        b0, b1, b2 = 0.0, 1.0, 0.0
    else:
        b0, b1, b2 = 0.0, 0.0, 1.0
    d = b0 * n0 + b1 * n1 + b2 * n2
    e0 = b0 - d * n0
    e1 = b1 - d * n1
    e2 = b2 - d * n2
    en = math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
    e0 /= en
    e1 /= en
    e2 /= en
    f0 = n1 * e2 - n2 * e1
    f1 = n2 * e0 - n0 * e2
    f2 = n0 * e1 - n1 * e0
    return e0, e1, e2, f0, f1, f2


@njit(cache=True, inline="always")
def _apply_given(vel, i, j, x0, x1, x2, xn, theta, phi):
    """Apply the symmetric pair update for precomputed relative velocity x."""
    e0, e1, e2, f0, f1, f2 = _transverse_frame(x0 / xn, x1 / xn, x2 / xn)
    ct = math.cos(theta)
    st = math.sin(theta)
    cp = math.cos(phi)
    sp = math.sin(phi)
    g0 = xn * (cp * e0 + sp * f0)
    g1 = xn * (cp * e1 + sp * f1)
    g2 = xn * (cp * e2 + sp * f2)
    h = 0.5 * (1.0 - ct)
    a0 = -h * x0 + 0.5 * st * g0
    a1 = -h * x1 + 0.5 * st * g1
    a2 = -h * x2 + 0.5 * st * g2
    vel[i, 0] += a0
    vel[i, 1] += a1
    vel[i, 2] += a2
    vel[j, 0] -= a0
    vel[j, 1] -= a1
    vel[j, 2] -= a2


@njit(cache=True)
def apply_collision(vel, i, j, z, phi, family, gamma, nu, pihalf_neg_nu, cutoff):
    """In-place pair collision; returns whether the state changed.

    No-ops: z beyond the cutoff, zero relative speed, or (hard spheres) a rate
    coordinate past the deflection support.
    """
    if z > cutoff:
        return False
    x0 = vel[i, 0] - vel[j, 0]
    x1 = vel[i, 1] - vel[j, 1]
    x2 = vel[i, 2] - vel[j, 2]
    xn2 = x0 * x0 + x1 * x1 + x2 * x2
    if xn2 == 0.0:
        return False
    xn = math.sqrt(xn2)
    theta = _deflection_angle(family, gamma, nu, pihalf_neg_nu, z, xn)
    if theta <= 0.0:
        return False
    _apply_given(vel, i, j, x0, x1, x2, xn, theta, phi)
    return True


@njit(cache=True, inline="always")
def _alignment_angle_raw(bx0, bx1, bx2, bn, ax0, ax1, ax2, an):
    """Azimuth shift for the second (a) system so its transverse sweep tracks b's."""
    be0, be1, be2, bf0, bf1, bf2 = _transverse_frame(bx0 / bn, bx1 / bn, bx2 / bn)
    ae0, ae1, ae2, af0, af1, af2 = _transverse_frame(ax0 / an, ax1 / an, ax2 / an)
    c = be0 * ae0 + be1 * ae1 + be2 * ae2 + bf0 * af0 + bf1 * af1 + bf2 * af2
    s = be0 * af0 + be1 * af1 + be2 * af2 - (bf0 * ae0 + bf1 * ae1 + bf2 * ae2)
    if math.sqrt(c * c + s * s) < 1e-12:
        return 0.0
    return math.atan2(s, c)


@njit(cache=True, nogil=True)
def run_events(
    vel,
    u,
    t,
    horizon,
    family,
    gamma,
    nu,
    pihalf_neg_nu,
    cutoff,
    z_range,
    rate,
    snap_times,
    snap_vel,
    snap_events,
    snap_props,
    snap_pos,
    events,
    props,
):
    """Process up to len(u) proposal events; returns progress and counters.

    Snapshots are written whenever the next event time passes a snapshot time,
    so each recorded state is exact at the requested time.  The row that
    crosses the horizon is consumed but not applied.
    """
    n = vel.shape[0]
    n_snaps = snap_times.shape[0]
    rows = u.shape[0]
    used = 0
    finished = False
    for r in range(rows):
        dt = -math.log1p(-u[r, 0]) / rate
        tn = t + dt
        while snap_pos < n_snaps and snap_times[snap_pos] < tn:
            snap_vel[snap_pos, :, :] = vel
            snap_events[snap_pos] = events
            snap_props[snap_pos] = props
            snap_pos += 1
        if tn > horizon:
            t = horizon
            used = r + 1
            finished = True
            break
        t = tn
        used = r + 1
        props += 1
        i, j = pair_from_uniform(u[r, 1], n)
        z = u[r, 2] * z_range
        phi = TWO_PI * u[r, 3]
        if apply_collision(vel, i, j, z, phi, family, gamma, nu, pihalf_neg_nu, cutoff):
            events += 1
    return t, used, events, props, snap_pos, finished


@njit(cache=True, nogil=True)
def run_coupled_events(
    vel_a,
    vel_b,
    u,
    t,
    horizon,
    family,
    gamma,
    nu,
    pihalf_neg_nu,
    cutoff_a,
    cutoff_b,
    z_range,
    rate,
    align,
    snap_times,
    snap_a,
    snap_b,
    snap_pos,
    events_a,
    events_b,
    props,
):
    """Shared-noise pair of systems driven by one proposal stream.

    Each proposal carries (pair, z, azimuth).  System b (the wider cutoff)
    collides with the raw azimuth; system a collides only when z clears its
    own cutoff, with its azimuth rotated by the transverse alignment angle
    computed from the two pre-event relative velocities (common-random-number
    coupling).  Both relative velocities are read before either update.
    """
    n = vel_a.shape[0]
    n_snaps = snap_times.shape[0]
    rows = u.shape[0]
    used = 0
    finished = False
    for r in range(rows):
        dt = -math.log1p(-u[r, 0]) / rate
        tn = t + dt
        while snap_pos < n_snaps and snap_times[snap_pos] < tn:
            snap_a[snap_pos, :, :] = vel_a
            snap_b[snap_pos, :, :] = vel_b
            snap_pos += 1
        if tn > horizon:
            t = horizon
            used = r + 1
            finished = True
            break
        t = tn
        used = r + 1
        props += 1
        i, j = pair_from_uniform(u[r, 1], n)
        z = u[r, 2] * z_range
        phi = TWO_PI * u[r, 3]

        ax0 = vel_a[i, 0] - vel_a[j, 0]
        ax1 = vel_a[i, 1] - vel_a[j, 1]
        ax2 = vel_a[i, 2] - vel_a[j, 2]
        an2 = ax0 * ax0 + ax1 * ax1 + ax2 * ax2
        bx0 = vel_b[i, 0] - vel_b[j, 0]
        bx1 = vel_b[i, 1] - vel_b[j, 1]
        bx2 = vel_b[i, 2] - vel_b[j, 2]
        bn2 = bx0 * bx0 + bx1 * bx1 + bx2 * bx2

        theta_b = 0.0
        bn = 0.0
        if z <= cutoff_b and bn2 > 0.0:
            bn = math.sqrt(bn2)
            theta_b = _deflection_angle(family, gamma, nu, pihalf_neg_nu, z, bn)
        theta_a = 0.0
        an = 0.0
        if z <= cutoff_a and an2 > 0.0:
            an = math.sqrt(an2)
            theta_a = _deflection_angle(family, gamma, nu, pihalf_neg_nu, z, an)

        psi = 0.0
        if align and theta_a > 0.0 and bn2 > 0.0:
            if bn == 0.0:
                bn = math.sqrt(bn2)
            psi = _alignment_angle_raw(bx0, bx1, bx2, bn, ax0, ax1, ax2, an)

        if theta_b > 0.0:
            _apply_given(vel_b, i, j, bx0, bx1, bx2, bn, theta_b, phi)
            events_b += 1
        if theta_a > 0.0:
            _apply_given(vel_a, i, j, ax0, ax1, ax2, an, theta_a, phi + psi)
            events_a += 1
    return t, used, events_a, events_b, props, snap_pos, finished
