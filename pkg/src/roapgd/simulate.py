"""Closed-loop simulators: the map from an initial state to the state at a
fixed horizon.

Built-in kinds (``linear``, ``cubic``, ``pendulum``, ``cartpole``) are pure
and deterministic: equal inputs give bit-identical trajectories.  The
``external`` kind talks to a black-box child process over a line protocol and
only reports terminal states.  Any state component exceeding
:data:`OVERFLOW_BOUND` flags the trajectory as diverged; downstream code
treats a diverged rollout as an infinite objective value instead of letting
NaN propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .geometry import as_state
from .policy import MlpPolicy, mlp_forward_batch, mlp_forward_cached, mlp_vjp

#: Any state component beyond this magnitude flags the trajectory as diverged.
OVERFLOW_BOUND = 1e6

BUILTIN_KINDS = ("linear", "cubic", "pendulum", "cartpole")
KINDS = BUILTIN_KINDS + ("external",)


@dataclass(frozen=True, eq=False)
class SimulatorSpec:
    """Declarative description of a closed-loop system.

    ``params`` is kind-specific: ``linear`` takes ``a`` (contraction factor),
    ``cubic`` takes ``M`` (positive-definite matrix) and ``dt``, ``pendulum``
    and ``cartpole`` take their physical parameters, and ``external`` takes
    ``command`` (argv of the simulator process) and ``timeout``.
    """

    kind: str
    state_dim: int
    params: dict = field(default_factory=dict)
    policy: MlpPolicy | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown simulator kind {self.kind!r}")
        if self.kind != "external" and self.state_dim < 1:
            raise ValueError("state_dim must be >= 1")
        expected = {"pendulum": 2, "cartpole": 4}.get(self.kind)
        if expected is not None and self.state_dim != expected:
            raise ValueError(f"{self.kind} has {expected} states, got {self.state_dim}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State history ``x_0 .. x_T`` plus the applied controls.

    When the rollout overflows, ``states`` stops at the last in-bounds state,
    ``diverged`` is set and ``diverged_at`` records the offending step index.
    External simulators return terminal states only, so their trajectories
    hold just the endpoints.
    """

    states: np.ndarray
    controls: np.ndarray | None = None
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def terminal(self):
        return self.states[-1]

    @property
    def terminal_cost(self):
        """Squared norm of the terminal state; infinite for diverged runs."""
        if self.diverged:
            return math.inf
        x = self.terminal
        return float(x @ x)


def _in_bounds(x):
    return bool(np.all(np.isfinite(x)) and np.max(np.abs(x)) <= OVERFLOW_BOUND)


class Simulator:
    """Common interface; see :class:`ModelSimulator` for built-in kinds."""

    state_dim = None

    def terminal_state(self, x0, horizon):
        """``(x_T, diverged)``; ``x_T`` is the last in-bounds state."""
        raise NotImplementedError

    def terminal_batch(self, x0s, horizon):
        """Per-point terminal states, semantically a loop of
        :meth:`terminal_state`; external simulators ship the whole batch in
        one request."""
        out = [self.terminal_state(x0, horizon) for x0 in x0s]
        states = np.array([s for s, _ in out])
        flags = np.array([d for _, d in out], dtype=bool)
        return states, flags

    def terminal_sweep(self, x0s, horizon):
        """Vectorised batch for large point sets (grid oracles).  May differ
        from the scalar path in the last floating-point digits."""
        return self.terminal_batch(x0s, horizon)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ModelSimulator(Simulator):
    """Built-in kind with an explicit per-step map (and optionally its
    vector-Jacobian product for costate back-propagation)."""

    supports_costate = False

    def control(self, x, t):
        return None

    def step(self, x, t):
        raise NotImplementedError

    def step_batch(self, xs, t):
        return np.array([self.step(x, t) for x in xs])

    def step_vjp(self, x, t, v):
        raise NotImplementedError(f"{type(self).__name__} has no differentiable step")

    def simulate(self, x0, horizon):
        """Full rollout with state (and control) history."""
        x = as_state(x0, self.state_dim)
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        states = [x]
        controls = []
        with np.errstate(all="ignore"):
            for t in range(horizon):
                u = self.control(x, t)
                if u is not None:
                    controls.append(np.asarray(u, dtype=float))
                x_next = self.step(x, t)
                if not _in_bounds(x_next):
                    return Trajectory(
                        np.array(states),
                        np.array(controls) if controls else None,
                        diverged=True,
                        diverged_at=t + 1,
                    )
                states.append(x_next)
                x = x_next
        return Trajectory(np.array(states), np.array(controls) if controls else None)

    def terminal_state(self, x0, horizon):
        x = as_state(x0, self.state_dim)
        with np.errstate(all="ignore"):
            for t in range(horizon):
                x_next = self.step(x, t)
                if not _in_bounds(x_next):
                    return x, True
                x = x_next
        return x, False

    def terminal_sweep(self, x0s, horizon):
        xs = np.asarray(x0s, dtype=float).copy()
        diverged = np.zeros(len(xs), dtype=bool)
        with np.errstate(all="ignore"):
            for t in range(horizon):
                alive = ~diverged
                if not alive.any():
                    break
                nxt = self.step_batch(xs[alive], t)
                bad = ~(np.all(np.isfinite(nxt), axis=1) & (np.max(np.abs(nxt), axis=1) <= OVERFLOW_BOUND))
                idx = np.flatnonzero(alive)
                diverged[idx[bad]] = True
                xs[idx[~bad]] = nxt[~bad]
        return xs, diverged


class LinearSimulator(ModelSimulator):
    """Test kind ``x_{t+1} = a x_t``; contraction for ``|a| < 1``."""

    supports_costate = True

    def __init__(self, factor, state_dim):
        self.factor = float(factor)
        self.state_dim = int(state_dim)

    def step(self, x, t):
        return self.factor * x

    def step_batch(self, xs, t):
        return self.factor * xs

    def step_vjp(self, x, t, v):
        return self.factor * v


class CubicSimulator(ModelSimulator):
    """Runge-Kutta discretisation of the cubic system with known true region
    of attraction (the open ellipsoid ``x^T M x < 1``)."""

    supports_costate = True

    def __init__(self, m_mat, state_dim, dt=0.1):
        m_mat = np.asarray(m_mat, dtype=float)
        if m_mat.shape != (state_dim, state_dim):
            raise ValueError(f"M has shape {m_mat.shape}, expected ({state_dim}, {state_dim})")
        self.m_mat = m_mat
        self.dt = float(dt)
        self.state_dim = int(state_dim)

    def step(self, x, t):
        return dynamics.cubic_step(x, self.m_mat, self.dt)

    def step_batch(self, xs, t):
        return dynamics.cubic_step_batch(xs, self.m_mat, self.dt)

    def step_vjp(self, x, t, v):
        return dynamics.cubic_step_vjp(x, self.m_mat, self.dt, v)


class PendulumSimulator(ModelSimulator):
    """Inverted pendulum in feedback with an optional network policy."""

    supports_costate = True
    state_dim = 2

    def __init__(self, params=None, policy=None):
        self.params = dict(dynamics.PENDULUM_DEFAULTS, **(params or {}))
        self.policy = policy
        if policy is not None and policy.input_dim != 2:
            raise ValueError("pendulum policy must take the 2-D state as input")

    def control(self, x, t):
        if self.policy is None:
            return np.zeros(1)
        u, _ = mlp_forward_cached(self.policy, x)
        return u

    def step(self, x, t):
        return dynamics.pendulum_step(x, self.control(x, t), self.params)

    def step_batch(self, xs, t):
        if self.policy is None:
            us = np.zeros(len(xs))
        else:
            us = mlp_forward_batch(self.policy, xs)
        return dynamics.pendulum_step_batch(xs, us, self.params)

    def step_vjp(self, x, t, v):
        if self.policy is None:
            u = np.zeros(1)
        else:
            u, cache = mlp_forward_cached(self.policy, x)
        dfdx, dfdu = dynamics.pendulum_jacobians(x, u, self.params)
        xbar = dfdx.T @ v
        if self.policy is not None:
            xbar = xbar + mlp_vjp(self.policy, cache, dfdu.T @ v)
        return xbar


class CartpoleSimulator(ModelSimulator):
    """Cart-pole about the upright equilibrium; property-test kind (no
    costate support, use finite differences)."""

    state_dim = 4

    def __init__(self, params=None, policy=None):
        self.params = dict(dynamics.CARTPOLE_DEFAULTS, **(params or {}))
        self.policy = policy
        if policy is not None and policy.input_dim != 4:
            raise ValueError("cartpole policy must take the 4-D state as input")

    def control(self, x, t):
        if self.policy is None:
            return np.zeros(1)
        return mlp_forward_cached(self.policy, x)[0]

    def step(self, x, t):
        return dynamics.cartpole_step(x, self.control(x, t), self.params)

    def step_batch(self, xs, t):
        if self.policy is None:
            us = np.zeros(len(xs))
        else:
            us = mlp_forward_batch(self.policy, xs)
        return dynamics.cartpole_step_batch(xs, us, self.params)


class CountingSimulator(Simulator):
    """Wrapper that counts simulated trajectories (batches count their size)."""

    def __init__(self, inner):
        self.inner = inner
        self.count = 0

    @property
    def state_dim(self):
        return self.inner.state_dim

    @property
    def supports_costate(self):
        return getattr(self.inner, "supports_costate", False)

    def terminal_state(self, x0, horizon):
        self.count += 1
        return self.inner.terminal_state(x0, horizon)

    def terminal_batch(self, x0s, horizon):
        self.count += len(x0s)
        return self.inner.terminal_batch(x0s, horizon)

    def terminal_sweep(self, x0s, horizon):
        self.count += len(x0s)
        return self.inner.terminal_sweep(x0s, horizon)

    def simulate(self, x0, horizon):
        self.count += 1
        return self.inner.simulate(x0, horizon)

    def step_vjp(self, x, t, v):
        return self.inner.step_vjp(x, t, v)

    def close(self):
        self.inner.close()


def _cubic_matrix(spec):
    m_raw = spec.params.get("M", "identity")
    if isinstance(m_raw, str):
        if m_raw != "identity":
            raise ValueError(f"unknown matrix shorthand {m_raw!r}")
        return np.eye(spec.state_dim)
    return np.asarray(m_raw, dtype=float)


def build_simulator(spec):
    """Instantiate the simulator described by ``spec``.

    External simulators own a child process; close them (or use them as
    context managers) when done.
    """
    if spec.kind == "linear":
        return LinearSimulator(spec.params.get("a", 0.5), spec.state_dim)
    if spec.kind == "cubic":
        return CubicSimulator(_cubic_matrix(spec), spec.state_dim, spec.params.get("dt", 0.1))
    if spec.kind == "pendulum":
        params = {k: v for k, v in spec.params.items() if k in dynamics.PENDULUM_DEFAULTS}
        return PendulumSimulator(params, spec.policy)
    if spec.kind == "cartpole":
        params = {k: v for k, v in spec.params.items() if k in dynamics.CARTPOLE_DEFAULTS}
        return CartpoleSimulator(params, spec.policy)
    from .external import ExternalSimulator

    return ExternalSimulator(
        spec.params["command"],
        timeout=spec.params.get("timeout", 60.0),
        expected_dim=spec.state_dim if spec.state_dim > 0 else None,
    )


def objective_value(sim, x0, horizon):
    """``(L, diverged)`` where ``L`` is the squared terminal-state norm."""
    x_t, diverged = sim.terminal_state(x0, horizon)
    if diverged:
        return math.inf, True
    return float(x_t @ x_t), False
