"""Built-in plant dynamics and their reverse-mode derivative helpers.

Each discrete-time step is a plain function of arrays so it can be unit
tested against hand evaluations and fine-step integrations.  The ``*_vjp``
helpers compute vector-Jacobian products ``J(x)^T v`` without forming the
Jacobian; they are the building blocks of costate back-propagation.
"""

from __future__ import annotations

import math

import numpy as np

#: Inverted pendulum parameters.  The damping/mass/length values are
#: documented placeholders (the reference experiment does not publish them);
#: every run echoes the parameter set it used into its output metadata.
PENDULUM_DEFAULTS = {
    "m": 0.15,
    "l": 0.5,
    "mu": 0.05,
    "g": 9.81,
    "dt": 0.02,
    "saturation": 1.0,
}

CARTPOLE_DEFAULTS = {
    "masscart": 1.0,
    "masspole": 0.1,
    "length": 0.5,
    "g": 9.81,
    "dt": 0.02,
    "saturation": 1.0,
}


def saturate(u, limit):
    """Symmetric actuator clamp; ``limit=None`` disables it."""
    if limit is None:
        return u
    return np.clip(u, -limit, limit)


def saturate_derivative(u, limit):
    """Derivative of the clamp w.r.t. its input; 0 at and beyond the limit."""
    if limit is None:
        return np.ones_like(u)
    return (np.abs(u) < limit).astype(float)


def pendulum_step(x, u, params=None):
    """One explicit-Euler step of the torque-saturated inverted pendulum.

    State is ``(theta, q)`` = (angle from upright, angular velocity); the
    upright equilibrium is the origin.
    """
    p = dict(PENDULUM_DEFAULTS, **(params or {}))
    theta, q = x
    dt, m, l, mu, g = p["dt"], p["m"], p["l"], p["mu"], p["g"]
    torque = float(saturate(np.asarray(u, dtype=float), p["saturation"]).reshape(-1)[0])
    ml2 = m * l * l
    theta_next = theta + q * dt
    q_next = q + ((g / l) * math.sin(theta) - (mu / ml2) * q + torque / ml2) * dt
    return np.array([theta_next, q_next])


def pendulum_step_batch(xs, us, params=None):
    p = dict(PENDULUM_DEFAULTS, **(params or {}))
    dt, m, l, mu, g = p["dt"], p["m"], p["l"], p["mu"], p["g"]
    torque = saturate(np.asarray(us, dtype=float).reshape(len(xs)), p["saturation"])
    ml2 = m * l * l
    theta, q = xs[:, 0], xs[:, 1]
    out = np.empty_like(xs)
    out[:, 0] = theta + q * dt
    out[:, 1] = q + ((g / l) * np.sin(theta) - (mu / ml2) * q + torque / ml2) * dt
    return out


def pendulum_jacobians(x, u, params=None):
    """``(df/dx, df/du)`` of the pendulum step, including the clamp factor."""
    p = dict(PENDULUM_DEFAULTS, **(params or {}))
    theta = x[0]
    dt, m, l, mu, g = p["dt"], p["m"], p["l"], p["mu"], p["g"]
    ml2 = m * l * l
    dfdx = np.array(
        [
            [1.0, dt],
            [(g / l) * math.cos(theta) * dt, 1.0 - (mu / ml2) * dt],
        ]
    )
    sat_d = saturate_derivative(np.asarray(u, dtype=float).reshape(-1), p["saturation"])[0]
    dfdu = np.array([[0.0], [dt / ml2 * sat_d]])
    return dfdx, dfdu


def _cubic_field(x, m_mat):
    s = x @ (m_mat @ x)
    return (s - 1.0) * x


def _cubic_field_batch(xs, m_mat):
    s = np.einsum("bi,bi->b", xs @ m_mat, xs)
    return (s - 1.0)[:, None] * xs


def _cubic_field_vjp(y, m_mat, v):
    # J_phi(y) = (s - 1) I + 2 y (M y)^T, so J^T v = (s - 1) v + 2 (y . v) M y.
    my = m_mat @ y
    s = y @ my
    return (s - 1.0) * v + 2.0 * (y @ v) * my


def cubic_step(x, m_mat, dt=0.1):
    """One classical fourth-order Runge-Kutta step of the cubic system.

    Continuous-time field ``dx/dt = (1 - x^T M x) F x`` with ``F = -I``; the
    ellipsoid ``x^T M x = 1`` is a set of equilibria, so its interior is the
    exact region of attraction of the origin.
    """
    k1 = dt * _cubic_field(x, m_mat)
    k2 = dt * _cubic_field(x + 0.5 * k1, m_mat)
    k3 = dt * _cubic_field(x + 0.5 * k2, m_mat)
    k4 = dt * _cubic_field(x + k3, m_mat)
    return x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def cubic_step_batch(xs, m_mat, dt=0.1):
    k1 = dt * _cubic_field_batch(xs, m_mat)
    k2 = dt * _cubic_field_batch(xs + 0.5 * k1, m_mat)
    k3 = dt * _cubic_field_batch(xs + 0.5 * k2, m_mat)
    k4 = dt * _cubic_field_batch(xs + k3, m_mat)
    return xs + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def cubic_step_vjp(x, m_mat, dt, v):
    """``J(x)^T v`` of the Runge-Kutta step, by reverse sweep over stages."""
    k1 = dt * _cubic_field(x, m_mat)
    y2 = x + 0.5 * k1
    k2 = dt * _cubic_field(y2, m_mat)
    y3 = x + 0.5 * k2
    k3 = dt * _cubic_field(y3, m_mat)
    y4 = x + k3

    xb = v.copy()
    k1b = v / 6.0
    k2b = v / 3.0
    k3b = v / 3.0
    k4b = v / 6.0

    y4b = dt * _cubic_field_vjp(y4, m_mat, k4b)
    xb += y4b
    k3b = k3b + y4b

    y3b = dt * _cubic_field_vjp(y3, m_mat, k3b)
    xb += y3b
    k2b = k2b + 0.5 * y3b

    y2b = dt * _cubic_field_vjp(y2, m_mat, k2b)
    xb += y2b
    k1b = k1b + 0.5 * y2b

    xb += dt * _cubic_field_vjp(x, m_mat, k1b)
    return xb


def true_roa_radius_cubic(m_mat):
    """Largest sphere radius contained in the cubic system's true region of
    attraction ``{x : x^T M x < 1}``: the inverse square root of the largest
    eigenvalue of ``M``."""
    m_mat = np.asarray(m_mat, dtype=float)
    if m_mat.ndim != 2 or m_mat.shape[0] != m_mat.shape[1]:
        raise ValueError("M must be a square matrix")
    if not np.allclose(m_mat, m_mat.T, rtol=1e-10, atol=1e-12):
        raise ValueError("M must be symmetric")
    eigs = np.linalg.eigvalsh(m_mat)
    if eigs[0] <= 0.0:
        raise ValueError(f"M must be positive definite (min eigenvalue {eigs[0]:.3e})")
    return float(eigs[-1] ** -0.5)


def cartpole_step(x, u, params=None):
    """One Euler step of the classic cart-pole about its upright equilibrium.

    State ``(pos, vel, theta, omega)``.  Used for property-based testing
    only; there is no published parameter set to reproduce against.
    """
    p = dict(CARTPOLE_DEFAULTS, **(params or {}))
    pos, vel, theta, omega = x
    dt, g = p["dt"], p["g"]
    mc, mp, length = p["masscart"], p["masspole"], p["length"]
    total = mc + mp
    force = float(saturate(np.asarray(u, dtype=float), p["saturation"]).reshape(-1)[0])
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    tmp = (force + mp * length * omega * omega * sin_t) / total
    omega_dot = (g * sin_t - cos_t * tmp) / (length * (4.0 / 3.0 - mp * cos_t * cos_t / total))
    vel_dot = tmp - mp * length * omega_dot * cos_t / total
    return np.array(
        [pos + dt * vel, vel + dt * vel_dot, theta + dt * omega, omega + dt * omega_dot]
    )


def cartpole_step_batch(xs, us, params=None):
    p = dict(CARTPOLE_DEFAULTS, **(params or {}))
    dt, g = p["dt"], p["g"]
    mc, mp, length = p["masscart"], p["masspole"], p["length"]
    total = mc + mp
    force = saturate(np.asarray(us, dtype=float).reshape(len(xs)), p["saturation"])
    pos, vel, theta, omega = xs.T
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    tmp = (force + mp * length * omega * omega * sin_t) / total
    omega_dot = (g * sin_t - cos_t * tmp) / (length * (4.0 / 3.0 - mp * cos_t * cos_t / total))
    vel_dot = tmp - mp * length * omega_dot * cos_t / total
    return np.stack(
        [pos + dt * vel, vel + dt * vel_dot, theta + dt * omega, omega + dt * omega_dot], axis=1
    )
