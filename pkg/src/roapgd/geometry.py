"""Norm-ball candidate regions under a linear shape transform.

A region is the set ``{x : ||C x||_p <= r}`` with norm order ``p`` in
``{1, 2, inf}``, radius ``r > 0`` and a full-rank shape matrix ``C``.
``C = I`` gives the usual norm balls; for ``p = 2`` a general ``C`` gives
ellipsoids.  Regions are immutable value objects and every operation here is
pure, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import UnsupportedRegionError

#: Norm orders the artifact accepts; anything else is rejected.
SUPPORTED_ORDERS = (1, 2, math.inf)

#: Relative tolerance for boundary membership.  Shared by every module so a
#: point produced on the boundary by one operation passes the membership test
#: of another.
MEMBERSHIP_RTOL = 1e-9

#: A shape matrix is considered full rank when its smallest singular value is
#: at least this fraction of the largest.
RANK_RTOL = 1e-10


def as_state(x, dim=None):
    """Coerce to a finite 1-D float vector, optionally checking its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D state vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"state has dimension {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state vector contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class Region:
    """Candidate region ``{x : ||C x||_p <= radius}``."""

    p: float
    radius: float
    shape: np.ndarray

    def __post_init__(self):
        if self.p not in SUPPORTED_ORDERS:
            raise ValueError(f"norm order must be one of {SUPPORTED_ORDERS}, got {self.p}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")
        shape = np.asarray(self.shape, dtype=float)
        if shape.ndim != 2 or shape.shape[0] != shape.shape[1]:
            raise ValueError(f"shape matrix must be square, got {shape.shape}")
        if not np.all(np.isfinite(shape)):
            raise ValueError("shape matrix contains non-finite entries")
        sv = np.linalg.svd(shape, compute_uv=False)
        if sv[-1] < RANK_RTOL * sv[0]:
            raise ValueError(
                f"shape matrix is rank deficient (singular value ratio {sv[-1] / sv[0]:.2e})"
            )
        object.__setattr__(self, "shape", shape)

    @classmethod
    def ball(cls, p, radius, dim):
        """Region with an identity shape matrix."""
        return cls(p, radius, np.eye(dim))

    @property
    def dim(self):
        return self.shape.shape[0]

    @property
    def is_identity_shape(self):
        return bool(np.array_equal(self.shape, np.eye(self.dim)))

    def with_radius(self, radius):
        return Region(self.p, radius, self.shape)

    def norm(self, x):
        """``||C x||_p`` for a single state vector."""
        return float(np.linalg.norm(self.shape @ as_state(x, self.dim), ord=self.p))

    def contains(self, x, rtol=MEMBERSHIP_RTOL):
        """Membership test, with relative slack at the boundary."""
        return self.norm(x) <= self.radius * (1.0 + rtol)

    def from_transformed(self, u):
        """Map a point from transformed coordinates back: solves ``C x = u``."""
        return np.linalg.solve(self.shape, np.asarray(u, dtype=float))


def _project_ball_l2(x, radius):
    n = np.linalg.norm(x)
    if n <= radius:
        return x
    return (x / n) * radius


def _project_ball_l1(x, radius):
    """Euclidean projection onto the 1-norm ball (sort-based simplex method)."""
    if np.linalg.norm(x, ord=1) <= radius:
        return x
    a = np.abs(x)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, a.size + 1)
    rho = np.nonzero(u * idx > (css - radius))[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0)


def _project_ellipsoid_l2(region, x):
    """Euclidean projection onto ``{z : z^T (C^T C) z <= r^2}``.

    Solves the stationarity condition ``z(mu) = (I + mu Q)^{-1} x`` for the
    multiplier ``mu >= 0`` that makes the constraint active.  The residual is
    strictly decreasing in ``mu``, so a bracketed root solve converges; the
    result is corrected radially in transformed coordinates, leaving
    ``| ||Cz|| - r | <= 1e-12 * r``.
    """
    q = region.shape.T @ region.shape
    lam, vecs = np.linalg.eigh(q)
    w = vecs.T @ x
    rsq = region.radius**2

    def resid(mu):
        zw = w / (1.0 + mu * lam)
        return float(np.sum(lam * zw * zw)) - rsq

    hi = 1.0
    while resid(hi) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("ellipsoid projection failed to bracket the multiplier")
    mu = brentq(resid, 0.0, hi, xtol=1e-300, rtol=8.9e-16)
    z = vecs @ (w / (1.0 + mu * lam))
    return z * (region.radius / region.norm(z))


def project(region, x):
    """Closest point of the region to ``x``.

    For ``p = 2`` this is the exact Euclidean projection for any full-rank
    shape matrix (radial scaling when ``C^T C`` is a multiple of the identity,
    a one-dimensional multiplier solve otherwise).  For ``p`` in ``{1, inf}``
    only ``C = I`` is supported: the sort-based 1-norm ball projection and the
    coordinate clamp.  Points already inside the region are returned
    unchanged, which makes the operation exactly idempotent.
    """
    x = as_state(x, region.dim)
    if region.contains(x):
        return x
    if region.p == 2:
        if region.is_identity_shape:
            return _project_ball_l2(x, region.radius)
        q = region.shape.T @ region.shape
        scaled_eye = q[0, 0] * np.eye(region.dim)
        if np.allclose(q, scaled_eye, rtol=1e-12, atol=1e-12 * abs(q[0, 0])):
            # Distances are preserved up to a constant under u = C x, so the
            # transformed-ball projection is exact here.
            u = _project_ball_l2(region.shape @ x, region.radius)
            z = region.from_transformed(u)
            return z * (region.radius / region.norm(z))
        return _project_ellipsoid_l2(region, x)
    if not region.is_identity_shape:
        raise UnsupportedRegionError(
            f"projection with p={region.p} requires an identity shape matrix"
        )
    if region.p == 1:
        return _project_ball_l1(x, region.radius)
    return np.clip(x, -region.radius, region.radius)


def _unit_sphere_point(rng, dim, p):
    """Random point with ``||u||_p = 1``; uniform on the sphere for p = 2."""
    if p == 2:
        while True:
            g = rng.standard_normal(dim)
            n = np.linalg.norm(g)
            if n > 1e-12:
                return g / n
    if p == math.inf:
        u = rng.uniform(-1.0, 1.0, size=dim)
        face = rng.integers(dim)
        u[face] = rng.choice([-1.0, 1.0])
        return u
    # p == 1: exponential magnitudes normalised to the simplex, random signs.
    g = rng.exponential(size=dim)
    g = g / np.sum(g)
    return g * rng.choice([-1.0, 1.0], size=dim)


def boundary_sample(region, rng):
    """Random point with ``||C x||_p = radius`` (to 1e-12 relative).

    For ``p = 2`` the direction is uniform on the sphere and pushed through
    ``C^{-1}``; for the other orders the transformed point is uniform on the
    corresponding unit sphere surface.
    """
    rng = np.random.default_rng(rng)
    u = _unit_sphere_point(rng, region.dim, region.p) * region.radius
    x = region.from_transformed(u)
    # Undo the round-off of the solve so the boundary invariant holds exactly.
    return x * (region.radius / region.norm(x))


def interior_sample(region, rng):
    """Random point strictly inside the region (boundary sample pulled in)."""
    rng = np.random.default_rng(rng)
    x = boundary_sample(region, rng)
    return x * float(rng.uniform(0.0, 1.0) ** (1.0 / region.dim))
