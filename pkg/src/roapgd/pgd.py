"""Worst-case initial-condition search by projected gradient ascent.

Two update rules drive the constrained maximisation of the squared
terminal-state norm over a candidate region:

* ``projected`` -- ascend along the gradient, then project back into the
  region.  Requires a step size; the default normalises it against the
  gradient magnitude so behaviour is scale-free.

* ``closed_form`` -- maximise the first-order expansion of the objective
  over the region *boundary*, which has an analytic solution for every
  supported norm order.  No step size, and convergence is largely
  insensitive to the horizon, so this is the default rule.

Both are local methods on a non-concave problem, so the search restarts from
several random boundary/interior points and reports the worst case found.  A
diverged rollout ends its restart immediately: the offending in-region point
is itself a certificate that the region is not contained in the
approximated region of attraction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradientError
from .geometry import as_state, boundary_sample, interior_sample, project
from .gradients import estimate_gradient, grad_fd
from .simulate import objective_value

RULES = ("closed_form", "projected")

#: Gradient norms below this cannot define an update direction.
DEGENERATE_GRAD_NORM = 1e-300

#: When a perturbed finite-difference point (outside the region) blows up,
#: retry with the perturbation shrunk by this factor, a few times.
FD_SHRINK = 0.1
FD_SHRINK_RETRIES = 3


@dataclass(frozen=True)
class PgdConfig:
    rule: str = "closed_form"
    alpha: float | None = None
    max_iters: int = 200
    restarts: int = 8
    stop_tol: float | None = None
    seed: int = 0
    keep_history: bool = False

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"step size must be positive, got {self.alpha}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.stop_tol is not None and self.stop_tol < 0:
            raise ValueError("stop_tol must be >= 0")


@dataclass(frozen=True, eq=False)
class RestartResult:
    index: int
    best_xi: np.ndarray
    best_value: float
    best_grad_norm: float | None
    termination: str
    iterations: int
    history: list | None = None


@dataclass(frozen=True, eq=False)
class PgdRun:
    """Outcome of one multi-restart search."""

    best_xi: np.ndarray
    best_value: float
    best_grad_norm: float | None
    termination: str
    restarts: tuple

    @property
    def found_witness(self):
        return math.isinf(self.best_value)


def step_projected(region, xi, grad, alpha):
    """Ascent step followed by projection back into the region."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise DegenerateGradientError("gradient contains non-finite entries")
    return project(region, xi + alpha * grad)


def step_closed_form(region, grad):
    """One-shot maximiser of the linearised objective on the region boundary.

    With ``v = C^{-T} grad``: for the 2-norm the maximiser is
    ``(r / ||v||) (C^T C)^{-1} grad``; for the 1-norm it concentrates the
    whole budget on the entry of ``v`` with the largest magnitude (lowest
    index wins ties); for the max-norm it is the sign pattern of ``v`` scaled
    to the boundary, with ``sign(0)`` taken as ``+1``.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise DegenerateGradientError("gradient contains non-finite entries")
    v = np.linalg.solve(region.shape.T, grad)
    if np.linalg.norm(v) < DEGENERATE_GRAD_NORM:
        raise DegenerateGradientError("gradient is numerically zero")
    r = region.radius
    if region.p == 2:
        xi = (r / np.linalg.norm(v)) * np.linalg.solve(region.shape, v)
    elif region.p == 1:
        transformed = np.zeros_like(v)
        i = int(np.argmax(np.abs(v)))
        transformed[i] = r * (1.0 if v[i] >= 0 else -1.0)
        xi = region.from_transformed(transformed)
    else:
        xi = region.from_transformed(np.where(v >= 0.0, r, -r))
    # Cancel solve round-off so boundary iterates stay exactly on the boundary.
    return xi * (r / region.norm(xi))


def _rescale_to_boundary(region, xi):
    xi = as_state(xi, region.dim)
    norm = region.norm(xi)
    if norm < 1e-12 * region.radius:
        return None
    return xi * (region.radius / norm)


def _gradient_with_retries(sim, region, xi, horizon, backend):
    """Gradient at a member point; distinguishes who diverged.

    Returns ``(result, witness)`` where ``witness`` is a member point whose
    rollout diverged (or None).  A perturbed point that diverged *outside*
    the region cannot serve as a witness, so the perturbation is shrunk and
    retried before giving up on the restart.
    """
    res = estimate_gradient(sim, xi, horizon, backend)
    if not res.diverged:
        return res, None
    if math.isinf(res.value):
        return res, xi  # the iterate itself blew up
    if region.contains(res.diverged_input):
        return res, res.diverged_input
    eps = backend.epsilon if backend.epsilon is not None else 1e-4 * max(1.0, float(np.linalg.norm(xi)))
    for _ in range(FD_SHRINK_RETRIES):
        eps *= FD_SHRINK
        res = grad_fd(sim, xi, horizon, epsilon=eps, central=backend.central)
        if not res.diverged:
            return res, None
        if math.isinf(res.value):
            return res, xi
        if region.contains(res.diverged_input):
            return res, res.diverged_input
    return res, None


def _run_restart(sim, region, horizon, config, backend, index, xi0):
    stop_tol = config.stop_tol if config.stop_tol is not None else 1e-9 * region.radius
    xi = xi0
    best_xi, best_value, best_grad_norm = xi0, -math.inf, None
    history = [] if config.keep_history else None
    termination = "max_iters"
    iterations = 0

    for _ in range(config.max_iters):
        iterations += 1
        res, witness = _gradient_with_retries(sim, region, xi, horizon, backend)
        if witness is not None:
            best_xi, best_value, best_grad_norm = witness, math.inf, None
            if history is not None:
                history.append((witness, math.inf))
            termination = "diverged_witness"
            break
        if history is not None:
            history.append((xi, res.value))
        if res.value > best_value:
            best_xi, best_value = xi, res.value
            best_grad_norm = None if res.gradient is None else float(np.linalg.norm(res.gradient))
        if res.diverged:
            termination = "diverged_gradient"
            break
        try:
            if config.rule == "closed_form":
                xi_next = step_closed_form(region, res.gradient)
            else:
                alpha = config.alpha
                if alpha is None:
                    alpha = 1e-2 * region.radius / (float(np.linalg.norm(res.gradient)) + 1e-12)
                xi_next = step_projected(region, xi, res.gradient, alpha)
        except DegenerateGradientError:
            termination = "degenerate_gradient"
            break
        movement = float(np.linalg.norm(xi_next - xi))
        xi = xi_next
        if movement <= stop_tol:
            value, diverged = objective_value(sim, xi, horizon)
            if history is not None:
                history.append((xi, value))
            if diverged:
                best_xi, best_value, best_grad_norm = xi, math.inf, None
                termination = "diverged_witness"
            else:
                if value > best_value:
                    best_xi, best_value = xi, value
                termination = "converged"
            break

    return RestartResult(index, best_xi, best_value, best_grad_norm, termination, iterations, history)


def search(sim, region, horizon, config, backend, warm_start=None, seeds=None, workers=1):
    """Multi-restart worst-case search over the region.

    Restart 0 takes ``warm_start`` (rescaled onto the current boundary) when
    given, which chains the search across bisection stages; explicit
    ``seeds`` override the random initial points of the remaining restarts.
    The reported best is reduced deterministically by (value, restart index),
    so the result does not depend on ``workers``.
    """
    if region.dim != sim.state_dim:
        raise ValueError(f"region dimension {region.dim} != simulator dimension {sim.state_dim}")
    streams = np.random.SeedSequence(config.seed).spawn(config.restarts)

    def initial_point(index):
        if index == 0 and warm_start is not None:
            xi = _rescale_to_boundary(region, warm_start)
            if xi is not None:
                return xi
        if seeds is not None and index < len(seeds):
            xi = as_state(seeds[index], region.dim)
            if config.rule == "closed_form":
                rescaled = _rescale_to_boundary(region, xi)
                if rescaled is not None:
                    return rescaled
            return project(region, xi)
        rng = np.random.default_rng(streams[index])
        if config.rule == "closed_form":
            return boundary_sample(region, rng)
        return interior_sample(region, rng)

    def run(index):
        return _run_restart(sim, region, horizon, config, backend, index, initial_point(index))

    indices = range(config.restarts)
    if workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, indices))
    else:
        results = [run(i) for i in indices]

    best = results[0]
    for candidate in results[1:]:
        if candidate.best_value > best.best_value:
            best = candidate
    return PgdRun(
        best_xi=best.best_xi,
        best_value=best.best_value,
        best_grad_norm=best.best_grad_norm,
        termination=best.termination,
        restarts=tuple(results),
    )
