"""Demo wrapped system: cubic dynamics with a known region of attraction.

Discretises ``dx/dt = (1 - x^T M x) F x`` (``F = -I``, ``M`` positive
definite) with one classical fourth-order Runge-Kutta step per sample time.
The open ellipsoid ``x^T M x < 1`` is the exact basin of the origin, which
makes this the standard end-to-end check for protocol clients.

    python -m simadapter simadapter.demos.cubic --dim 2
    python -m simadapter simadapter.demos.cubic --matrix m.json --dt 0.1
"""

import argparse
import json

import numpy as np


def _field(x, m_mat):
    s = x @ (m_mat @ x)
    return (s - 1.0) * x


def make_step(m_mat, dt):
    m_mat = np.asarray(m_mat, dtype=float)

    def step(state, t):
        x = np.asarray(state, dtype=float)
        if not np.all(np.isfinite(x)):
            return x  # already blown up; report as-is
        with np.errstate(all="ignore"):
            k1 = dt * _field(x, m_mat)
            k2 = dt * _field(x + 0.5 * k1, m_mat)
            k3 = dt * _field(x + 0.5 * k2, m_mat)
            k4 = dt * _field(x + k3, m_mat)
            return x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    return step


def make_system(argv):
    parser = argparse.ArgumentParser(prog="simadapter.demos.cubic")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--dim", type=int, help="identity M of this dimension")
    group.add_argument("--matrix", help="JSON file holding M as nested lists")
    parser.add_argument("--dt", type=float, default=0.1)
    args = parser.parse_args(argv)
    if args.matrix:
        with open(args.matrix, encoding="utf-8") as fh:
            m_mat = np.asarray(json.load(fh), dtype=float)
    else:
        m_mat = np.eye(args.dim)
    return len(m_mat), make_step(m_mat, args.dt)
