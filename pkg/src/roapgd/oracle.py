"""Brute-force ground truth for tests: dense boundary search and long-horizon
membership probes.

Nothing here is part of the estimation pipeline; these are the independent
checks the estimator is validated against.  The boundary grids are nested
under resolution doubling, so refining a grid can only raise the maximum it
reports (up to floating-point noise on the shared points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedRegionError
from .geometry import as_state
from .simulate import build_simulator


@dataclass(frozen=True, eq=False)
class GridOracleResult:
    best_xi: np.ndarray
    best_value: float
    points_evaluated: int


def _unit_boundary_points(dim, p, resolution):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        if p == 2:
            angles = 2.0 * math.pi * np.arange(resolution) / resolution
            return np.column_stack([np.cos(angles), np.sin(angles)])
        u = -1.0 + 2.0 * np.arange(resolution) / resolution
        if p == math.inf:
            ones = np.ones_like(u)
            return np.vstack(
                [
                    np.column_stack([u, -ones]),
                    np.column_stack([u, ones]),
                    np.column_stack([-ones, u]),
                    np.column_stack([ones, u]),
                ]
            )
        # p == 1: the diamond |a| + |b| = 1, swept in a.
        return np.vstack(
            [
                np.column_stack([u, 1.0 - np.abs(u)]),
                np.column_stack([u, np.abs(u) - 1.0]),
            ]
        )
    if p == 2:
        m = max(2, resolution // 2)
        polar = math.pi * np.arange(m + 1) / m
        azimuth = 2.0 * math.pi * np.arange(resolution) / resolution
        pol, azi = np.meshgrid(polar, azimuth, indexing="ij")
        sin_p = np.sin(pol)
        return np.column_stack(
            [(sin_p * np.cos(azi)).ravel(), (sin_p * np.sin(azi)).ravel(), np.cos(pol).ravel()]
        )
    if p == math.inf:
        u = -1.0 + 2.0 * np.arange(resolution) / resolution
        a, b = map(np.ravel, np.meshgrid(u, u, indexing="ij"))
        ones = np.ones_like(a)
        faces = []
        for axis in range(3):
            for sign in (-1.0, 1.0):
                cols = [a, b]
                cols.insert(axis, sign * ones)
                faces.append(np.column_stack(cols))
        return np.vstack(faces)
    raise UnsupportedRegionError("1-norm boundary grids are only generated up to 2 dimensions")


def boundary_grid(region, resolution):
    """Deterministic grid of points with ``||C x||_p = r`` (n_x <= 3)."""
    if region.dim > 3:
        raise ValueError(f"boundary grids are limited to 3 dimensions, got {region.dim}")
    unit = _unit_boundary_points(region.dim, region.p, resolution)
    transformed = region.radius * unit
    points = np.linalg.solve(region.shape, transformed.T).T
    norms = np.array([region.norm(x) for x in points])
    return points * (region.radius / norms)[:, None]


def boundary_grid_max(spec, region, horizon, resolution):
    """Maximum squared terminal-state norm over a dense boundary grid."""
    points = boundary_grid(region, resolution)
    with build_simulator(spec) as sim:
        states, diverged = sim.terminal_sweep(points, horizon)
    values = np.einsum("bi,bi->b", states, states)
    values[diverged] = math.inf
    best = int(np.argmax(values))
    return GridOracleResult(points[best], float(values[best]), len(points))


def roa_membership_sample(spec, x0, horizon_long, delta):
    """Long-horizon convergence probe used to scatter the true region of
    attraction.

    A point is counted as a member when the squared state norm is at most
    ``delta`` at the final step *and* over the whole last tenth of the
    trajectory; the tail window rejects limit cycles that merely graze the
    origin at the sampling time.  Stricter than the single-time criterion on
    purpose: oracles should not share the estimator's blind spots.
    """
    with build_simulator(spec) as sim:
        traj = sim.simulate(as_state(x0, sim.state_dim), horizon_long)
    if traj.diverged:
        return False
    tail = traj.states[-(max(1, horizon_long // 10) + 1) :]
    return bool(np.max(np.einsum("bi,bi->b", tail, tail)) <= delta)
