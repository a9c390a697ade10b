"""Squared Wasserstein-2 machinery on equally weighted point clouds.

For two uniform empirical measures of equal size the optimal coupling is a
permutation, so the exact squared distance is a minimum-cost perfect matching
under squared Euclidean costs.  The solver is an exact assignment algorithm;
an independent brute-force enumeration over permutations is kept alongside as
the small-instance oracle.  Unequal sizes are handled only through disjoint
block subsampling, whose dropped-remainder bias bound is reported explicitly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import DomainError

_BRUTE_LIMIT = 9


def _cloud(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise DomainError(f"{name} must be an (n, 3) array with n >= 1")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def second_moment(cloud) -> float:
    """Mean squared norm of the point cloud."""
    c = _cloud(cloud, "cloud")
    return float(np.mean(np.sum(c**2, axis=1)))


def w2_squared_exact(a, b) -> float:
    """Exact squared W2 between equal-size uniform clouds via optimal assignment.

    Costs are raw squared distances; the 1/n weight is applied afterwards.
    """
    ca = _cloud(a, "a")
    cb = _cloud(b, "b")
    if ca.shape[0] != cb.shape[0]:
        raise DomainError("clouds must have equal size (use subsample_compare otherwise)")
    cost = cdist(ca, cb, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum()) / ca.shape[0]


def w2_squared_brute(a, b) -> float:
    """Minimum over all permutations; independent oracle for n <= 9."""
    ca = _cloud(a, "a")
    cb = _cloud(b, "b")
    n = ca.shape[0]
    if cb.shape[0] != n:
        raise DomainError("clouds must have equal size")
    if n > _BRUTE_LIMIT:
        raise DomainError(f"brute force is limited to n <= {_BRUTE_LIMIT}")
    cost = cdist(ca, cb, "sqeuclidean")
    perms = np.array(list(itertools.permutations(range(n))))
    totals = cost[np.arange(n), perms].sum(axis=1)
    return float(totals.min()) / n


def w2_squared_sliced(a, b, n_projections: int, seed: int = 0, directions=None) -> float:
    """Average squared 1D quantile distance over random unit directions.

    A scalable lower-bound surrogate: projecting the 3D optimal coupling
    couples the 1D marginals at no larger cost, so every slice is at most the
    exact squared distance.  Deterministic given the seed; pass ``directions``
    to pin the projection axes.
    """
    ca = _cloud(a, "a")
    cb = _cloud(b, "b")
    if ca.shape[0] != cb.shape[0]:
        raise DomainError("clouds must have equal size")
    if directions is None:
        if n_projections < 1:
            raise DomainError("need at least one projection")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        directions = rng.normal(size=(n_projections, 3))
    dirs = np.asarray(directions, dtype=float)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(ca @ dirs.T, axis=0)
    pb = np.sort(cb @ dirs.T, axis=0)
    return float(np.mean((pa - pb) ** 2, axis=0).mean())


def mixture_convexity_check(f, f_prime, g, g_prime, lam: float) -> bool:
    """Whether squared W2 is jointly convex under mixing with weight lam.

    The mixtures are realized by concatenation, which forces
    lam = n_f / (n_f + n_g); any other weight is rejected.  The inequality is
    a theorem for exact distances, so a False return indicates a solver bug.
    """
    cf = _cloud(f, "f")
    cfp = _cloud(f_prime, "f_prime")
    cg = _cloud(g, "g")
    cgp = _cloud(g_prime, "g_prime")
    if cf.shape[0] != cfp.shape[0] or cg.shape[0] != cgp.shape[0]:
        raise DomainError("paired clouds must have equal sizes")
    expected = cf.shape[0] / (cf.shape[0] + cg.shape[0])
    if abs(lam - expected) > 1e-12:
        raise DomainError(f"mixture weight must equal n_f/(n_f+n_g) = {expected}")
    lhs = w2_squared_exact(np.vstack([cf, cg]), np.vstack([cfp, cgp]))
    rhs = lam * w2_squared_exact(cf, cfp) + (1.0 - lam) * w2_squared_exact(cg, cgp)
    return lhs <= rhs + 1e-12 * (1.0 + abs(rhs))


def subsample_compare(big, reference, block_k: int) -> tuple[float, float]:
    """Average exact squared W2 of disjoint size-k blocks of ``big`` vs ``reference``.

    Returns (mean block distance, dropped-remainder bias bound).  The l = m
    mod k leftover points are dropped; mixing convexity bounds their effect by
    (l/m) * (2 m2(reference) + 2 m2(big)), reported alongside.
    """
    cb = _cloud(big, "big")
    cr = _cloud(reference, "reference")
    m = cb.shape[0]
    k = int(block_k)
    if k < 1 or k > m:
        raise DomainError("block size must lie in [1, len(big)]")
    if cr.shape[0] != k:
        raise DomainError("reference size must equal the block size")
    r = m // k
    values = [w2_squared_exact(cb[u * k : (u + 1) * k], cr) for u in range(r)]
    leftover = m - r * k
    bias = (leftover / m) * (2.0 * second_moment(cr) + 2.0 * second_moment(cb))
    return float(np.mean(values)), float(bias)
