"""Ready-made closed-loop systems for demos and tests.

The pendulum policy here is a small tanh network built around a
discrete-time LQR gain: the hidden layer is a pinned random lift and the
output layer is solved so the network linearises to the LQR feedback at the
origin.  That gives a deterministic, locally stabilising network policy
without shipping trained weights.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_discrete_are

from . import dynamics
from .policy import Layer, MlpPolicy
from .simulate import SimulatorSpec


def pendulum_linearisation(params=None):
    """Discrete-time ``(A, B)`` of the pendulum about the upright state."""
    p = dict(dynamics.PENDULUM_DEFAULTS, **(params or {}))
    dt, m, l, mu, g = p["dt"], p["m"], p["l"], p["mu"], p["g"]
    ml2 = m * l * l
    a = np.array([[1.0, dt], [dt * g / l, 1.0 - dt * mu / ml2]])
    b = np.array([[0.0], [dt / ml2]])
    return a, b


def pendulum_feedback_gain(params=None, poles=None):
    """Linear state-feedback row ``k`` (for ``u = k x``) that stabilises the
    upright state: LQR by default, or direct placement of the two closed-loop
    poles when ``poles`` is given (slow dominant poles make the loop linger,
    which the horizon-sensitivity benchmark relies on)."""
    a, b = pendulum_linearisation(params)
    if poles is None:
        p_mat = solve_discrete_are(a, b, np.eye(2), np.eye(1))
        return -np.linalg.solve(np.eye(1) + b.T @ p_mat @ b, b.T @ p_mat @ a)
    p1, p2 = poles
    gain_b = b[1, 0]
    a22_target = p1 + p2 - 1.0
    a21_target = (a22_target - p1 * p2) / a[0, 1]
    return np.array([[(a21_target - a[1, 0]) / gain_b, (a22_target - a[1, 1]) / gain_b]])


def make_pendulum_policy(hidden=16, seed=2024, params=None, state_scale=0.35, poles=None):
    """Stabilising tanh policy for the inverted pendulum.

    The hidden layer is a pinned random lift; the output layer is solved so
    the network linearises to the feedback gain at the origin.
    ``state_scale`` sets how quickly the hidden tanh units saturate away from
    the origin, i.e. how far the network stays close to its linearisation.
    """
    gain = pendulum_feedback_gain(params, poles)
    rng = np.random.default_rng(seed)
    w1 = state_scale * rng.standard_normal((hidden, 2))
    w2 = gain @ np.linalg.pinv(w1)
    return MlpPolicy(
        (
            Layer(w1, np.zeros(hidden), "tanh"),
            Layer(w2, np.zeros(1), "linear"),
        )
    )


def pendulum_spec(params=None, policy=None, **policy_kwargs):
    """Pendulum system in feedback with the preset policy (built when not
    supplied)."""
    if policy is None:
        policy = make_pendulum_policy(params=params, **policy_kwargs)
    return SimulatorSpec("pendulum", 2, dict(params or {}), policy)
