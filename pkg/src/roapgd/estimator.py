"""Region certification and the bisection that produces the radius estimate.

A candidate region passes the ``(T, delta)`` criterion when the worst case
found by the search keeps the squared terminal-state norm at or below
``delta``.  A *fail* is a hard certificate (it comes with a violating initial
state, re-simulated on a fresh simulator instance); a *pass* is best-effort
only, since the underlying maximisation is non-concave.  The bisection
therefore reports "search-certified" radii together with the full bracket
trace, so non-monotone observations stay visible instead of being averaged
away.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateRegionError, RoapgdError
from .geometry import Region
from .gradients import GradientBackend
from .oracle import boundary_grid
from .pgd import PgdConfig, search
from .simulate import SimulatorSpec, build_simulator, objective_value


@dataclass(frozen=True)
class AroaCriterion:
    """Finite-horizon surrogate for membership in the region of attraction:
    the squared state norm after ``horizon`` steps must not exceed ``delta``.

    ``horizon`` trades off approximation quality against search difficulty:
    too short and the surrogate is loose, too long and gradients vanish deep
    inside the stable set.
    """

    horizon: int
    delta: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True, eq=False)
class CheckResult:
    passed: bool
    best_xi: np.ndarray
    best_value: float
    run: object


@dataclass(frozen=True, eq=False)
class Witness:
    """Initial state whose rollout violates the criterion, with the value
    seen by the search and the value of the independent re-simulation."""

    xi: np.ndarray
    value: float
    radius: float
    resim_value: float


@dataclass(frozen=True, eq=False)
class BracketStep:
    radius: float
    passed: bool
    best_value: float
    best_grad_norm: float | None


@dataclass(frozen=True, eq=False)
class BisectionOutcome:
    """Largest search-certified radius plus the evidence trail.

    ``r_hat`` is the largest radius that passed; ``witness`` violates the
    criterion at the smallest radius that failed.  ``search_certified`` is
    always True: passes rest on best-effort non-concave maximisation, not on
    a proof.
    """

    r_hat: float
    witness: Witness | None
    trace: tuple
    tol_r: float
    witnesses: tuple = ()
    unbounded_pass: bool = False
    search_certified: bool = True


def check_region(spec, region, criterion, pgd_cfg=None, backend=None, warm_start=None, workers=1):
    """Run the worst-case search and compare against the criterion."""
    pgd_cfg = pgd_cfg or PgdConfig()
    backend = backend or GradientBackend()
    with build_simulator(spec) as sim:
        run = search(sim, region, criterion.horizon, pgd_cfg, backend, warm_start=warm_start, workers=workers)
    return CheckResult(run.best_value <= criterion.delta, run.best_xi, run.best_value, run)


def resimulate_witness(spec, xi, criterion):
    """Re-check a violating point on a fresh simulator instance (guards
    against any state leaking between searches)."""
    with build_simulator(spec) as sim:
        value, diverged = objective_value(sim, xi, criterion.horizon)
    value = math.inf if diverged else value
    if not value > criterion.delta:
        raise RoapgdError(
            f"witness failed re-simulation: value {value} <= delta {criterion.delta}"
        )
    return value


def bisect_radius(
    spec,
    p,
    shape,
    criterion,
    pgd_cfg=None,
    backend=None,
    r_lo=0.1,
    r_hi=1.0,
    tol_r=None,
    workers=1,
    max_doublings=24,
    radius_floor=1e-9,
):
    """Largest radius passing the criterion, to bracket width ``tol_r``.

    The initial bracket is repaired automatically: the lower end is halved
    until it passes (down to ``radius_floor``), the upper end doubled until
    it fails (at most ``max_doublings`` times, after which the outcome is
    flagged ``unbounded_pass``).  Containment is not guaranteed monotone in
    the radius, so the full probe trace is part of the outcome.
    """
    if not 0 < r_lo < r_hi:
        raise ValueError(f"need 0 < r_lo < r_hi, got ({r_lo}, {r_hi})")
    pgd_cfg = pgd_cfg or PgdConfig()
    backend = backend or GradientBackend()
    if tol_r is None:
        tol_r = 1e-3 * r_hi
    shape = np.asarray(shape, dtype=float)

    trace = []
    witnesses = []
    warm = None

    def probe(radius):
        nonlocal warm
        result = check_region(
            spec, Region(p, radius, shape), criterion, pgd_cfg, backend, warm_start=warm, workers=workers
        )
        warm = result.best_xi
        trace.append(
            BracketStep(radius, result.passed, result.best_value, result.run.best_grad_norm)
        )
        if not result.passed:
            resim = resimulate_witness(spec, result.best_xi, criterion)
            witnesses.append(Witness(result.best_xi, result.best_value, radius, resim))
        return result.passed

    def outcome(r_hat, unbounded=False):
        witness = min(witnesses, key=lambda w: w.radius) if witnesses else None
        return BisectionOutcome(
            r_hat, witness, tuple(trace), tol_r, witnesses=tuple(witnesses), unbounded_pass=unbounded
        )

    if not probe(r_lo):
        r_hi = r_lo
        while True:
            r_lo /= 2.0
            if r_lo < radius_floor:
                raise DegenerateRegionError(
                    f"no radius above {radius_floor} passes the criterion; the equilibrium "
                    "may be unstable or delta too small"
                )
            if probe(r_lo):
                break
    else:
        doublings = 0
        while probe(r_hi):
            r_lo = r_hi
            doublings += 1
            if doublings > max_doublings:
                return outcome(r_hi, unbounded=True)
            r_hi *= 2.0

    while r_hi - r_lo > tol_r:
        mid = 0.5 * (r_lo + r_hi)
        if probe(mid):
            r_lo = mid
        else:
            r_hi = mid

    return outcome(r_lo)


@dataclass(frozen=True, eq=False)
class ScalingRow:
    state_dim: int
    sample: int
    r_hat: float
    r_star: float
    ratio: float
    cpu_seconds: float


def random_cubic_instance(seed, state_dim, sample):
    """Pinned random positive-definite matrix with its exact spherical
    ground-truth radius.

    Construction: ``A^T A + 0.1 I`` with standard-normal ``A``, rescaled so
    the largest eigenvalue lands uniformly in ``[1, 10]``; the true radius is
    then the inverse square root of that eigenvalue.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(state_dim), int(sample)]))
    a = rng.standard_normal((state_dim, state_dim))
    m = a.T @ a + 0.1 * np.eye(state_dim)
    lam_max = float(np.linalg.eigvalsh(m)[-1])
    target = float(rng.uniform(1.0, 10.0))
    m = m * (target / lam_max)
    return m, target**-0.5


def scaling_benchmark(
    dims,
    samples_per_dim=10,
    criterion=None,
    seed=0,
    pgd_cfg=None,
    backend=None,
    tol_r=None,
    workers=1,
):
    """Radius-recovery sweep over random cubic systems of growing dimension.

    Returns ``(rows, failures)`` where each row compares the estimated radius
    against the analytic ground truth and carries the wall time of its
    bisection.  Per-sample errors are recorded, not fatal.
    """
    if not dims:
        raise ValueError("dims must be nonempty")
    criterion = criterion or AroaCriterion(100, 1e-2)
    pgd_cfg = pgd_cfg or PgdConfig()
    backend = backend or GradientBackend()
    rows = []
    failures = []
    for state_dim in dims:
        for sample in range(samples_per_dim):
            m, r_star = random_cubic_instance(seed, state_dim, sample)
            spec = SimulatorSpec("cubic", state_dim, {"M": m})
            sample_seed = int(
                np.random.SeedSequence([int(seed), int(state_dim), int(sample), 7]).generate_state(1)[0]
            )
            cfg = replace(pgd_cfg, seed=sample_seed)
            start = time.perf_counter()
            try:
                result = bisect_radius(
                    spec, 2, np.eye(state_dim), criterion, cfg, backend,
                    r_lo=0.1, r_hi=1.5, tol_r=tol_r, workers=workers,
                )
            except RoapgdError as exc:
                failures.append((state_dim, sample, str(exc)))
                continue
            elapsed = time.perf_counter() - start
            rows.append(
                ScalingRow(state_dim, sample, result.r_hat, r_star, result.r_hat / r_star, elapsed)
            )
    return rows, failures


@dataclass(frozen=True, eq=False)
class ConvergenceRow:
    rule: str
    horizon: int
    iteration: int
    distance: float
    value: float


def convergence_benchmark(
    spec,
    region,
    horizons,
    pgd_cfg_pair,
    x0,
    backend=None,
    delta=1e-1,
    dist_tol=None,
    resolution=4096,
):
    """Head-to-head convergence comparison of the two update rules.

    Both rules start from the same ``x0`` at every horizon.  One dense
    boundary sweep at the longest horizon yields the reference worst-case
    point and the set of unstable boundary points (value above ``delta``);
    each iterate's distance to the nearest unstable point is recorded.  The
    set distance is used rather than distance to the single maximiser because
    the maximiser can move substantially with the horizon while the unstable
    set does not.  Returns ``(rows, iterations_to_tol, reference)`` where
    ``iterations_to_tol`` maps ``(rule, horizon)`` to the first iteration
    within ``dist_tol`` of the unstable set (None when never reached).
    """
    closed_cfg, projected_cfg = pgd_cfg_pair
    backend = backend or GradientBackend()
    if dist_tol is None:
        dist_tol = 2e-2 * region.radius
    points = boundary_grid(region, resolution)
    with build_simulator(spec) as sim:
        states, diverged = sim.terminal_sweep(points, max(horizons))
        values = np.einsum("bi,bi->b", states, states)
        values[diverged] = math.inf
        reference = points[int(np.argmax(values))]
        unstable = points[values > delta]
        if len(unstable) == 0:
            unstable = reference[None, :]

        def set_distance(xi):
            return float(np.min(np.linalg.norm(unstable - xi, axis=1)))

        rows = []
        iterations_to_tol = {}
        for cfg in (closed_cfg, projected_cfg):
            cfg = replace(cfg, restarts=1, keep_history=True)
            for horizon in horizons:
                run = search(sim, region, horizon, cfg, backend, seeds=[x0])
                history = run.restarts[0].history
                hit = None
                for k, (xi, value) in enumerate(history):
                    distance = set_distance(xi)
                    rows.append(ConvergenceRow(cfg.rule, horizon, k, distance, value))
                    if hit is None and distance <= dist_tol:
                        hit = k
                iterations_to_tol[(cfg.rule, horizon)] = hit
    return rows, iterations_to_tol, reference
