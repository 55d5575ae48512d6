import math

import numpy as np
import pytest

from roapgd import (
    CountingSimulator,
    SimulatorSpec,
    build_simulator,
    objective_value,
)


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            SimulatorSpec("quadrotor", 12)

    @pytest.mark.parametrize("kind,dim", [("pendulum", 3), ("cartpole", 2)])
    def test_dimension_consistency(self, kind, dim):
        with pytest.raises(ValueError, match="states"):
            SimulatorSpec(kind, dim)

    def test_cubic_accepts_any_dimension(self):
        for n in (1, 2, 7):
            assert build_simulator(SimulatorSpec("cubic", n)).state_dim == n


class TestBuiltins:
    def test_linear_contraction(self):
        sim = build_simulator(SimulatorSpec("linear", 1, {"a": 0.5}))
        x_t, diverged = sim.terminal_state([1.0], 10)
        assert not diverged
        assert x_t[0] == pytest.approx(0.5**10, rel=1e-15)

    def test_cubic_equilibrium(self):
        sim = build_simulator(SimulatorSpec("cubic", 3, {"M": "identity"}))
        x_t, diverged = sim.terminal_state(np.zeros(3), 100)
        np.testing.assert_array_equal(x_t, np.zeros(3))
        assert not diverged

    def test_pendulum_first_step_regression(self):
        # Zero-torque pendulum (no policy); frozen single-step value.
        sim = build_simulator(SimulatorSpec("pendulum", 2))
        traj = sim.simulate(np.array([0.1, 0.0]), 1)
        assert traj.states.shape == (2, 2)
        assert traj.states[1][0] == 0.1
        assert traj.states[1][1] == pytest.approx(0.039174632692215376, rel=1e-15)

    def test_trajectory_shapes(self, pendulum_closed_loop):
        sim = build_simulator(pendulum_closed_loop)
        traj = sim.simulate(np.array([0.2, -0.1]), 25)
        assert traj.states.shape == (26, 2)
        assert traj.controls.shape == (25, 1)
        assert not traj.diverged
        assert traj.terminal_cost == float(traj.states[-1] @ traj.states[-1])


class TestDeterminismAndSemigroup:
    @pytest.mark.parametrize(
        "spec,x0",
        [
            (SimulatorSpec("linear", 2, {"a": 0.9}), [0.3, -0.7]),
            (SimulatorSpec("cubic", 2, {"M": [[2.0, 0.3], [0.3, 1.0]]}), [0.4, 0.1]),
            (SimulatorSpec("cartpole", 4), [0.05, 0.0, 0.04, -0.01]),
        ],
    )
    def test_repeated_calls_bit_identical(self, spec, x0):
        sim = build_simulator(spec)
        first = sim.simulate(np.array(x0), 50)
        second = sim.simulate(np.array(x0), 50)
        np.testing.assert_array_equal(first.states, second.states)

    def test_closed_loop_pendulum_deterministic(self, pendulum_closed_loop):
        sim = build_simulator(pendulum_closed_loop)
        a = sim.terminal_state(np.array([0.3, 0.2]), 100)[0]
        b = sim.terminal_state(np.array([0.3, 0.2]), 100)[0]
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("split", [(0, 30), (7, 23), (30, 0)])
    def test_semigroup(self, pendulum_closed_loop, split):
        s, t = split
        sim = build_simulator(pendulum_closed_loop)
        x0 = np.array([0.25, -0.15])
        whole = sim.terminal_state(x0, s + t)[0]
        mid = sim.terminal_state(x0, s)[0]
        chained = sim.terminal_state(mid, t)[0]
        np.testing.assert_array_equal(whole, chained)


class TestDivergence:
    def test_cubic_blowup_is_flagged(self):
        sim = build_simulator(SimulatorSpec("cubic", 2, {"M": "identity"}))
        traj = sim.simulate(np.array([2.0, 0.0]), 100)
        assert traj.diverged
        assert traj.diverged_at is not None
        assert np.all(np.isfinite(traj.states))
        assert np.max(np.abs(traj.states)) <= 1e6
        assert traj.terminal_cost == math.inf

    def test_objective_value_is_infinite(self):
        sim = build_simulator(SimulatorSpec("cubic", 2, {"M": "identity"}))
        value, diverged = objective_value(sim, np.array([2.0, 0.0]), 100)
        assert diverged and value == math.inf

    def test_terminal_state_reports_last_in_bounds(self):
        sim = build_simulator(SimulatorSpec("linear", 1, {"a": 10.0}))
        x_t, diverged = sim.terminal_state([1.0], 50)
        assert diverged
        assert abs(x_t[0]) <= 1e6


class TestCubicGroundTruth:
    def test_interior_points_settle(self):
        sim = build_simulator(SimulatorSpec("cubic", 3, {"M": "identity"}))
        rng = np.random.default_rng(21)
        for _ in range(20):
            direction = rng.standard_normal(3)
            x0 = 0.9 * rng.uniform(0.1, 1.0) * direction / np.linalg.norm(direction)
            value, diverged = objective_value(sim, x0, 100)
            assert not diverged and value <= 1e-2

    def test_exterior_points_repelled(self):
        sim = build_simulator(SimulatorSpec("cubic", 3, {"M": "identity"}))
        rng = np.random.default_rng(22)
        for _ in range(20):
            direction = rng.standard_normal(3)
            radius = rng.uniform(1.1, 2.0)
            x0 = radius * direction / np.linalg.norm(direction)
            x_t, diverged = sim.terminal_state(x0, 100)
            assert diverged or np.linalg.norm(x_t) >= np.linalg.norm(x0)


class TestBatches:
    def test_terminal_batch_matches_scalar_bitwise(self, pendulum_closed_loop):
        sim = build_simulator(pendulum_closed_loop)
        points = np.array([[0.1, 0.0], [0.2, -0.1], [-0.3, 0.25]])
        batch_states, batch_flags = sim.terminal_batch(points, 60)
        for i, x0 in enumerate(points):
            x_t, diverged = sim.terminal_state(x0, 60)
            np.testing.assert_array_equal(batch_states[i], x_t)
            assert batch_flags[i] == diverged

    def test_terminal_sweep_agrees_with_batch(self):
        sim = build_simulator(SimulatorSpec("cubic", 2, {"M": [[1.5, 0.2], [0.2, 0.8]]}))
        rng = np.random.default_rng(5)
        points = rng.normal(scale=0.9, size=(40, 2))
        sweep_states, sweep_flags = sim.terminal_sweep(points, 80)
        batch_states, batch_flags = sim.terminal_batch(points, 80)
        np.testing.assert_array_equal(sweep_flags, batch_flags)
        np.testing.assert_allclose(
            sweep_states[~sweep_flags], batch_states[~batch_flags], rtol=1e-12, atol=1e-14
        )

    def test_sweep_freezes_diverged_rows(self):
        sim = build_simulator(SimulatorSpec("cubic", 2, {"M": "identity"}))
        points = np.array([[0.5, 0.0], [3.0, 0.0]])
        states, flags = sim.terminal_sweep(points, 100)
        assert list(flags) == [False, True]
        assert np.all(np.isfinite(states))


class TestCountingWrapper:
    def test_counts_every_entry_point(self):
        sim = CountingSimulator(build_simulator(SimulatorSpec("linear", 2, {"a": 0.5})))
        sim.terminal_state([1.0, 0.0], 5)
        sim.terminal_batch(np.zeros((4, 2)), 5)
        sim.terminal_sweep(np.zeros((3, 2)), 5)
        sim.simulate(np.zeros(2), 5)
        assert sim.count == 1 + 4 + 3 + 1
