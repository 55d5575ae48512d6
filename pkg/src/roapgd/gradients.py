"""Gradient estimators for the terminal-state objective.

The objective of the worst-case search is ``L(xi) = ||x_T||^2`` where
``x_T`` is the state reached from ``xi`` after ``T`` closed-loop steps.  Two
interchangeable estimators of its gradient are provided:

* ``costate`` -- exact reverse-mode differentiation for built-in systems:
  roll the trajectory forward, seed the costate with ``2 x_T`` and pull it
  back through the step's vector-Jacobian product; the costate at time zero
  is the gradient.  One trajectory per gradient.

* ``finite_difference`` -- black-box forward differences
  ``(L(xi + eps e_j) - L(xi)) / eps``, costing exactly ``n_x + 1`` simulated
  trajectories (batched over the wire for external simulators).  A central
  variant with ``2 n_x + 1`` simulations exists for oracle tests.

Diverged rollouts never surface as NaN arithmetic: results carry a flag and
the offending input so the search can treat the point as a blow-up witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedBackendError
from .geometry import as_state

METHODS = ("costate", "finite_difference")


@dataclass(frozen=True)
class GradientBackend:
    """Choice of estimator plus its knobs.

    ``epsilon=None`` resolves per call to ``1e-4 * max(1, ||xi||)``, which
    guards both tiny and large states.
    """

    method: str = "costate"
    epsilon: float | None = None
    central: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"gradient method must be one of {METHODS}, got {self.method!r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"perturbation size must be positive, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class GradientResult:
    """Gradient plus the objective value at the evaluation point.

    ``diverged`` marks that some rollout overflowed; ``gradient`` is then
    None and ``diverged_input`` holds the initial state whose rollout blew
    up (the evaluation point itself, or one of the perturbed points).
    """

    gradient: np.ndarray | None
    value: float
    evaluations: int
    diverged: bool = False
    diverged_input: np.ndarray | None = None


def grad_costate(sim, xi, horizon):
    """Reverse-mode gradient via costate back-propagation."""
    if not getattr(sim, "supports_costate", False):
        raise UnsupportedBackendError(
            f"costate backend needs a differentiable built-in step, got {type(sim).__name__}"
        )
    xi = as_state(xi, sim.state_dim)
    traj = sim.simulate(xi, horizon)
    if traj.diverged:
        return GradientResult(None, math.inf, 1, diverged=True, diverged_input=xi)
    p = 2.0 * traj.terminal
    for t in range(horizon - 1, -1, -1):
        p = sim.step_vjp(traj.states[t], t, p)
    return GradientResult(p, traj.terminal_cost, 1)


def _objective_batch(sim, points, horizon):
    states, diverged = sim.terminal_batch(points, horizon)
    values = np.einsum("bi,bi->b", states, states)
    values[diverged] = math.inf
    return values, diverged


def grad_fd(sim, xi, horizon, epsilon=None, central=False):
    """Finite-difference gradient; forward differences by default."""
    xi = as_state(xi, sim.state_dim)
    n = xi.shape[0]
    eps = epsilon if epsilon is not None else 1e-4 * max(1.0, float(np.linalg.norm(xi)))
    basis = np.eye(n) * eps
    if central:
        points = np.vstack([xi[None, :], xi + basis, xi - basis])
    else:
        points = np.vstack([xi[None, :], xi + basis])
    values, diverged = _objective_batch(sim, points, horizon)
    evaluations = len(points)
    if diverged.any():
        first = int(np.flatnonzero(diverged)[0])
        return GradientResult(
            None, float(values[0]), evaluations, diverged=True, diverged_input=points[first]
        )
    if central:
        grad = (values[1 : n + 1] - values[n + 1 :]) / (2.0 * eps)
    else:
        grad = (values[1:] - values[0]) / eps
    return GradientResult(grad, float(values[0]), evaluations)


def estimate_gradient(sim, xi, horizon, backend):
    if backend.method == "costate":
        return grad_costate(sim, xi, horizon)
    return grad_fd(sim, xi, horizon, epsilon=backend.epsilon, central=backend.central)
