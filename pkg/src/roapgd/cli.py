"""Command-line front end.

Three commands drive the estimator workflows, all configured by a single
JSON document:

* ``roapgd estimate --config cfg.json`` -- bisect the region radius and
  write ``summary.json`` plus the bracket ``trace.csv``.
* ``roapgd attack --config cfg.json --r 0.8`` -- worst-case search at one
  fixed radius; exit code 3 signals a violating initial state, which makes
  the command usable as a falsification gate in automation.
* ``roapgd bench scaling|convergence --config cfg.json`` -- the benchmark
  sweeps, emitted as CSV.

Exit codes: 0 pass/success, 1 configuration or transport error, 2 degenerate
region (nothing passes), 3 witness found (attack).  Identical config and
seed give identical outputs for built-in systems, wall-time fields aside;
every run echoes its fully-resolved configuration so it can be replayed from
the output directory alone.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateRegionError, RoapgdError, TransportError
from .estimator import (
    AroaCriterion,
    bisect_radius,
    check_region,
    convergence_benchmark,
    resimulate_witness,
    scaling_benchmark,
)
from .geometry import Region
from .gradients import GradientBackend
from .pgd import PgdConfig
from .policy import load_policy
from .simulate import KINDS, SimulatorSpec

#: Bracket used when the region requests "auto".
AUTO_BRACKET = (0.01, 1.0)

#: Below this gradient norm at a passing radius, warn that the horizon may be
#: too long for the search to see anything.
VANISHING_GRAD_NORM = 1e-12


@dataclass
class Experiment:
    """A validated, fully-resolved experiment."""

    spec: SimulatorSpec
    p: float
    shape: np.ndarray
    bracket: tuple | None
    fixed_radius: float | None
    criterion: AroaCriterion
    pgd: PgdConfig
    backend: GradientBackend
    tol_r: float | None
    output: str
    seed: int
    workers: int
    bench: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)


def _matrix_from(value, dim, violations, where):
    if isinstance(value, str):
        if value != "identity":
            violations.append(f"{where}: unknown matrix shorthand {value!r}")
            return None
        return np.eye(dim)
    try:
        mat = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        violations.append(f"{where}: not a numeric matrix")
        return None
    if mat.shape != (dim, dim):
        violations.append(f"{where}: shape {mat.shape} does not match state_dim {dim}")
        return None
    return mat


def resolve_config(doc, config_dir=".", seed_override=None, output_override=None, workers=None):
    """Validate a configuration document, collecting every violation."""
    violations = []
    if not isinstance(doc, dict):
        raise ConfigError(["configuration must be a JSON object"])

    system = doc.get("system") or {}
    kind = system.get("kind")
    if kind not in KINDS:
        violations.append(f"system.kind: must be one of {KINDS}, got {kind!r}")
    state_dim = system.get("state_dim")
    if not isinstance(state_dim, int) or state_dim < 1:
        violations.append(f"system.state_dim: positive integer required, got {state_dim!r}")
        state_dim = 1
    params = system.get("params") or {}
    policy = None
    policy_path = system.get("policy")
    if policy_path is not None:
        try:
            policy = load_policy(os.path.join(config_dir, policy_path))
        except (OSError, ValueError) as exc:
            violations.append(f"system.policy: {exc}")
    if kind == "external" and not isinstance(params.get("command"), list):
        violations.append("system.params.command: external systems need an argv list")
    if kind == "cubic":
        m = _matrix_from(params.get("M", "identity"), state_dim, violations, "system.params.M")
        if m is not None:
            params = dict(params, M=m.tolist())

    region = doc.get("region") or {}
    p_raw = region.get("p", 2)
    p = {1: 1, 2: 2, "inf": math.inf, "Infinity": math.inf}.get(p_raw)
    if p is None:
        violations.append(f"region.p: must be 1, 2 or \"inf\", got {p_raw!r}")
        p = 2
    shape = _matrix_from(region.get("C", "identity"), state_dim, violations, "region.C")
    bracket_raw = region.get("bracket", "auto")
    bracket = None
    if bracket_raw == "auto":
        bracket = AUTO_BRACKET
    elif isinstance(bracket_raw, (list, tuple)) and len(bracket_raw) == 2:
        lo, hi = bracket_raw
        if not (isinstance(lo, (int, float)) and isinstance(hi, (int, float)) and 0 < lo < hi):
            violations.append(f"region.bracket: need 0 < r_lo < r_hi, got {bracket_raw!r}")
        else:
            bracket = (float(lo), float(hi))
    else:
        violations.append(f"region.bracket: [r_lo, r_hi] or \"auto\", got {bracket_raw!r}")
    fixed_radius = region.get("r")
    if fixed_radius is not None and not (isinstance(fixed_radius, (int, float)) and fixed_radius > 0):
        violations.append(f"region.r: must be a positive number, got {fixed_radius!r}")
        fixed_radius = None

    crit = doc.get("criterion") or {}
    # Kind-specific defaults: the mechanical benchmarks use a longer horizon
    # and a looser terminal tolerance than the cubic family.
    default_horizon, default_delta = (200, 1e-1) if kind in ("pendulum", "cartpole") else (100, 1e-2)
    horizon = crit.get("T", default_horizon)
    delta = crit.get("delta", default_delta)
    if not isinstance(horizon, int) or horizon < 1:
        violations.append(f"criterion.T: positive integer required, got {horizon!r}")
        horizon = 1
    if not (isinstance(delta, (int, float)) and delta > 0):
        violations.append(f"criterion.delta: must be positive, got {delta!r}")
        delta = 1.0

    seed = seed_override if seed_override is not None else doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        violations.append(f"seed: non-negative integer required, got {seed!r}")
        seed = 0

    pgd_doc = doc.get("pgd") or {}
    try:
        pgd = PgdConfig(
            rule=pgd_doc.get("rule", "closed_form"),
            alpha=pgd_doc.get("alpha"),
            max_iters=pgd_doc.get("max_iters", 200),
            restarts=pgd_doc.get("restarts", 8),
            stop_tol=pgd_doc.get("stop_tol"),
            seed=seed,
        )
    except (ValueError, TypeError) as exc:
        violations.append(f"pgd: {exc}")
        pgd = PgdConfig(seed=seed)

    grad_doc = doc.get("gradient") or {}
    differentiable = ("linear", "cubic", "pendulum")
    try:
        backend = GradientBackend(
            method=grad_doc.get("backend", "costate" if kind in differentiable else "finite_difference"),
            epsilon=grad_doc.get("epsilon"),
            central=bool(grad_doc.get("central", False)),
        )
    except (ValueError, TypeError) as exc:
        violations.append(f"gradient: {exc}")
        backend = GradientBackend("finite_difference")
    if backend.method == "costate" and kind in ("external", "cartpole"):
        violations.append(f"gradient.backend: costate is unavailable for kind {kind!r}")

    tol_r = doc.get("tol_r")
    if tol_r is not None and not (isinstance(tol_r, (int, float)) and tol_r > 0):
        violations.append(f"tol_r: must be positive, got {tol_r!r}")

    output = output_override or doc.get("output", "roapgd-out")

    spec = None
    if not violations:
        try:
            spec = SimulatorSpec(kind, state_dim, dict(params), policy)
        except ValueError as exc:
            violations.append(f"system: {exc}")
    if violations:
        raise ConfigError(violations)

    resolved = {
        "system": {
            "kind": kind,
            "state_dim": state_dim,
            "params": {k: v for k, v in params.items()},
            "policy": None if policy_path is None else os.path.abspath(os.path.join(config_dir, policy_path)),
        },
        "region": {
            "p": "inf" if p == math.inf else p,
            "C": shape.tolist(),
            "bracket": list(bracket) if bracket else None,
            "r": fixed_radius,
        },
        "criterion": {"T": horizon, "delta": delta},
        "pgd": {
            "rule": pgd.rule,
            "alpha": pgd.alpha,
            "max_iters": pgd.max_iters,
            "restarts": pgd.restarts,
            "stop_tol": pgd.stop_tol,
        },
        "gradient": {"backend": backend.method, "epsilon": backend.epsilon, "central": backend.central},
        "tol_r": tol_r,
        "output": output,
        "seed": seed,
        "bench": doc.get("bench", {}),
    }
    return Experiment(
        spec=spec,
        p=p,
        shape=shape,
        bracket=bracket,
        fixed_radius=fixed_radius,
        criterion=AroaCriterion(horizon, float(delta)),
        pgd=pgd,
        backend=backend,
        tol_r=float(tol_r) if tol_r is not None else None,
        output=output,
        seed=seed,
        workers=workers or 1,
        bench=doc.get("bench", {}),
        resolved=resolved,
    )


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(cell) for cell in row) + "\n")


def _csv_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _prepare_output(exp):
    os.makedirs(exp.output, exist_ok=True)
    _write_json(os.path.join(exp.output, "resolved_config.json"), exp.resolved)


def _finite_or_str(value):
    return value if math.isfinite(value) else repr(value)


def cmd_estimate(exp):
    _prepare_output(exp)
    r_lo, r_hi = exp.bracket
    start = time.perf_counter()
    outcome = bisect_radius(
        exp.spec, exp.p, exp.shape, exp.criterion, exp.pgd, exp.backend,
        r_lo=r_lo, r_hi=r_hi, tol_r=exp.tol_r, workers=exp.workers,
    )
    wall = time.perf_counter() - start
    for step in outcome.trace:
        if step.passed and step.best_grad_norm is not None and step.best_grad_norm < VANISHING_GRAD_NORM:
            print(
                f"warning: gradient norm {step.best_grad_norm:.2e} at radius {step.radius:.6g}; "
                "the horizon may be too large for the search to make progress",
                file=sys.stderr,
            )
            break
    trace_path = os.path.join(exp.output, "trace.csv")
    _write_csv(
        trace_path,
        ["step", "radius", "passed", "best_value"],
        [
            (i, s.radius, s.passed, _finite_or_str(s.best_value))
            for i, s in enumerate(outcome.trace)
        ],
    )
    witness = None
    if outcome.witness is not None:
        witness = {
            "xi": outcome.witness.xi.tolist(),
            "value": _finite_or_str(outcome.witness.value),
            "radius": outcome.witness.radius,
            "resim_value": _finite_or_str(outcome.witness.resim_value),
        }
    summary = {
        "command": "estimate",
        "r_hat": outcome.r_hat,
        "tol_r": outcome.tol_r,
        "witness": witness,
        "flags": {
            "search_certified": outcome.search_certified,
            "unbounded_pass": outcome.unbounded_pass,
        },
        "trace_file": "trace.csv",
        "resolved_config": exp.resolved,
        "wall_time_s": wall,
    }
    _write_json(os.path.join(exp.output, "summary.json"), summary)
    print(f"r_hat = {outcome.r_hat:.6g} (bracket width <= {outcome.tol_r:.3g})")
    return 0


def cmd_attack(exp, radius):
    if radius is None:
        radius = exp.fixed_radius
    if radius is None:
        raise ConfigError(
            ["attack needs a fixed radius: pass --r or set region.r (region.bracket has no single radius)"]
        )
    _prepare_output(exp)
    region = Region(exp.p, float(radius), exp.shape)
    start = time.perf_counter()
    result = check_region(exp.spec, region, exp.criterion, exp.pgd, exp.backend, workers=exp.workers)
    wall = time.perf_counter() - start
    resim = None
    if not result.passed:
        resim = resimulate_witness(exp.spec, result.best_xi, exp.criterion)
    _write_csv(
        os.path.join(exp.output, "restarts.csv"),
        ["restart", "best_value", "termination", "iterations"],
        [
            (r.index, _finite_or_str(r.best_value), r.termination, r.iterations)
            for r in result.run.restarts
        ],
    )
    summary = {
        "command": "attack",
        "radius": float(radius),
        "passed": result.passed,
        "best_value": _finite_or_str(result.best_value),
        "best_xi": result.best_xi.tolist(),
        "witness_resim_value": None if resim is None else _finite_or_str(resim),
        "delta": exp.criterion.delta,
        "per_restart": [
            {
                "restart": r.index,
                "best_value": _finite_or_str(r.best_value),
                "termination": r.termination,
                "iterations": r.iterations,
            }
            for r in result.run.restarts
        ],
        "resolved_config": exp.resolved,
        "wall_time_s": wall,
    }
    _write_json(os.path.join(exp.output, "summary.json"), summary)
    if result.passed:
        print(f"pass: worst value {result.best_value:.6g} <= delta {exp.criterion.delta:.6g}")
        return 0
    print(f"witness: value {result.best_value:.6g} > delta {exp.criterion.delta:.6g}")
    return 3


def cmd_bench_scaling(exp):
    _prepare_output(exp)
    bench = exp.bench
    dims = bench.get("dims")
    if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d >= 1 for d in dims):
        raise ConfigError(["bench.dims: nonempty list of positive integers required"])
    samples = bench.get("samples_per_dim", 10)
    start = time.perf_counter()
    rows, failures = scaling_benchmark(
        dims,
        samples_per_dim=samples,
        criterion=exp.criterion,
        seed=exp.seed,
        pgd_cfg=exp.pgd,
        backend=exp.backend,
        tol_r=exp.tol_r,
        workers=exp.workers,
    )
    wall = time.perf_counter() - start
    _write_csv(
        os.path.join(exp.output, "scaling.csv"),
        ["n_x", "sample", "r_hat", "r_star", "ratio", "cpu_seconds"],
        [(r.state_dim, r.sample, r.r_hat, r.r_star, r.ratio, r.cpu_seconds) for r in rows],
    )
    per_dim = {}
    for row in rows:
        per_dim.setdefault(row.state_dim, []).append(row.ratio)
    summary = {
        "command": "bench-scaling",
        "csv": "scaling.csv",
        "ratio_mean": {str(d): float(np.mean(v)) for d, v in per_dim.items()},
        "ratio_std": {str(d): float(np.std(v)) for d, v in per_dim.items()},
        "failures": [{"n_x": d, "sample": s, "error": e} for d, s, e in failures],
        "resolved_config": exp.resolved,
        "wall_time_s": wall,
    }
    _write_json(os.path.join(exp.output, "summary.json"), summary)
    print(f"scaling benchmark: {len(rows)} rows, {len(failures)} failures -> scaling.csv")
    return 0


def cmd_bench_convergence(exp):
    _prepare_output(exp)
    bench = exp.bench
    violations = []
    horizons = bench.get("T_list")
    if not isinstance(horizons, list) or not horizons or not all(isinstance(t, int) and t >= 1 for t in horizons):
        violations.append("bench.T_list: nonempty list of positive integers required")
    x0 = bench.get("x0")
    if not isinstance(x0, list) or len(x0) != exp.spec.state_dim:
        violations.append(f"bench.x0: list of length {exp.spec.state_dim} required")
    if exp.fixed_radius is None:
        violations.append("region.r: convergence benchmark needs a fixed radius")
    alpha = bench.get("projected_alpha", exp.pgd.alpha)
    if alpha is not None and not (isinstance(alpha, (int, float)) and alpha > 0):
        violations.append(f"bench.projected_alpha: must be positive, got {alpha!r}")
    if violations:
        raise ConfigError(violations)

    region = Region(exp.p, exp.fixed_radius, exp.shape)
    closed_cfg = PgdConfig(
        rule="closed_form", max_iters=exp.pgd.max_iters, restarts=1, stop_tol=0.0, seed=exp.seed
    )
    projected_cfg = PgdConfig(
        rule="projected",
        alpha=None if alpha is None else float(alpha),
        max_iters=bench.get("projected_max_iters", exp.pgd.max_iters),
        restarts=1,
        stop_tol=0.0,
        seed=exp.seed,
    )
    start = time.perf_counter()
    rows, iters_to_tol, reference = convergence_benchmark(
        exp.spec,
        region,
        horizons,
        (closed_cfg, projected_cfg),
        np.asarray(x0, dtype=float),
        backend=exp.backend,
        delta=exp.criterion.delta,
        dist_tol=bench.get("dist_tol"),
        resolution=bench.get("resolution", 4096),
    )
    wall = time.perf_counter() - start
    _write_csv(
        os.path.join(exp.output, "convergence.csv"),
        ["rule", "T", "iteration", "distance", "L_value"],
        [(r.rule, r.horizon, r.iteration, r.distance, _finite_or_str(r.value)) for r in rows],
    )
    summary = {
        "command": "bench-convergence",
        "csv": "convergence.csv",
        "reference_point": reference.tolist(),
        "iterations_to_tolerance": {
            f"{rule},T={t}": hit for (rule, t), hit in iters_to_tol.items()
        },
        "resolved_config": exp.resolved,
        "wall_time_s": wall,
    }
    _write_json(os.path.join(exp.output, "summary.json"), summary)
    print(f"convergence benchmark: {len(rows)} rows -> convergence.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="roapgd",
        description="Estimate regions of attraction by adversarial worst-case search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment configuration (JSON)")
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="parallel restarts (default: available cores)")

    common(sub.add_parser("estimate", help="bisect the radius and write summary.json + trace.csv"))
    attack = sub.add_parser("attack", help="worst-case search at a fixed radius")
    common(attack)
    attack.add_argument("--r", type=float, help="region radius to attack")
    bench = sub.add_parser("bench", help="benchmark sweeps")
    bench.add_argument("kind", choices=["scaling", "convergence"])
    common(bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"config file {args.config}: {exc}"]) from exc
        exp = resolve_config(
            doc,
            config_dir=os.path.dirname(os.path.abspath(args.config)),
            seed_override=args.seed,
            output_override=args.output,
            workers=args.workers,
        )
        if args.command == "estimate":
            return cmd_estimate(exp)
        if args.command == "attack":
            return cmd_attack(exp, args.r)
        if args.kind == "scaling":
            return cmd_bench_scaling(exp)
        return cmd_bench_convergence(exp)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 1
    except TransportError as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
        return 1
    except DegenerateRegionError as exc:
        print(f"error: degenerate region: {exc}", file=sys.stderr)
        return 2
    except RoapgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
